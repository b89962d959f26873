from collections import Counter

from socgcf.synthetic import SyntheticConfig, generate, write_raw_files
from socgcf.data import load_interactions, load_social


def test_generation_is_seeded():
    cfg = SyntheticConfig(n_users=40, n_items=60, mean_interactions=10, mean_friends=4,
                          item_adoption=0.5, activity_friends=True)
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(SyntheticConfig(**{**cfg.__dict__, "seed": 1}))


def test_social_graph_has_no_loops_or_duplicates():
    cfg = SyntheticConfig(n_users=200, n_items=100, mean_interactions=5, mean_friends=6, homophily=1.0)
    _, social = generate(cfg)
    assert all(a != b for a, b in social)
    assert len(set(social)) == len(social)


def test_files_round_trip(tmp_path):
    cfg = SyntheticConfig(n_users=30, n_items=50, mean_interactions=8, mean_friends=3)
    raw, social = generate(cfg)
    inter, soc = write_raw_files(tmp_path, cfg)
    assert load_interactions(inter) == raw
    assert load_social(soc) == social


def test_activity_raises_counts():
    raw, _ = generate(SyntheticConfig(n_users=100, n_items=200, mean_interactions=20, mean_friends=2))
    per_user = Counter(r.user for r in raw)
    assert min(per_user.values()) >= 1
    assert 10 < sum(per_user.values()) / len(per_user) < 40
