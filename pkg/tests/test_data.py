import logging
import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from conftest import SMALL_RATIO
from socgcf.data import (Dataset, RawInteraction as R, dataset_stats, dedup_interactions,
                         kcore_filter_items, load_dataset, load_interactions, load_social,
                         preprocess, rebuild_social, save_dataset, select_users_by_jaccard,
                         temporal_split)


def test_canonical_loader_skips_malformed_lines(tmp_path, caplog):
    p = tmp_path / "i.txt"
    p.write_text("u1 a 5\nu1 b 6 4.0\nbroken\nu2 a notanint\n# comment\n\nu2 c 7\n")
    with caplog.at_level(logging.WARNING):
        recs = load_interactions(p)
    assert recs == [R("u1", "a", 5), R("u1", "b", 6, 4.0), R("u2", "c", 7)]
    assert "3, 4" in caplog.text


def test_adjacency_loader_assigns_positions(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("u1 x y z\nu2 y\n")
    recs = load_interactions(p, "adjacency")
    assert [(r.user, r.item, r.timestamp) for r in recs] == [
        ("u1", "x", 0), ("u1", "y", 1), ("u1", "z", 2), ("u2", "y", 0)]


def test_loader_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("only two\nnope\n")
    with pytest.raises(ValueError, match="zero valid records"):
        load_interactions(p)
    with pytest.raises(ValueError):
        load_interactions(tmp_path / "missing.txt")
    with pytest.raises(ValueError):
        load_interactions(p, "json")


def test_load_social_ignores_extra_columns(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("a b 1\nc\nb c\n")
    assert load_social(p) == [("a", "b"), ("b", "c")]


def test_dedup_keeps_earliest():
    out = dedup_interactions([R("u", "i", 9), R("u", "i", 3), R("u", "j", 1)])
    assert sorted(out) == [R("u", "i", 3), R("u", "j", 1)]


def test_kcore_single_pass():
    raw = [R(f"u{n}", "hot", n) for n in range(3)] + [R("u0", "cold", 0)]
    assert {r.item for r in kcore_filter_items(raw, 3)} == {"hot"}
    with pytest.raises(ValueError, match="filtered out"):
        kcore_filter_items(raw, 4)


def test_jaccard_selection_and_ties():
    raw = [R("b", "x", 0), R("b", "y", 0), R("a", "x", 0), R("a", "y", 0),
           R("c", "x", 0), R("d", "z", 0)]
    # |I| = 3; ratio 1.5 -> q = 2. a and b tie at 2/3, c has 1/3.
    assert select_users_by_jaccard(raw, 1.5) == {"a", "b"}
    # ratio 2.0 -> q = round_half_up(1.5) = 2
    assert select_users_by_jaccard(raw, 2.0) == {"a", "b"}
    assert select_users_by_jaccard(raw, 3.0) == {"a"}


def test_jaccard_selection_keeps_everyone_when_q_too_large(caplog):
    raw = [R("a", "x", 0), R("b", "y", 0)]
    with caplog.at_level(logging.WARNING):
        assert select_users_by_jaccard(raw, 0.1) == {"a", "b"}
    assert "keeping all" in caplog.text


def test_temporal_split_counts():
    triples = [(0, i, t) for i, t in enumerate([5, 1, 3, 2, 4])] + [(1, 9, 0)] + [(2, 0, 0), (2, 1, 0)]
    train, test = temporal_split(triples, 0.2)
    # user 0: ceil(0.2 * 5) = 1 -> latest (item 0, ts 5); user 1 has one record; user 2 keeps one
    assert sorted(test) == [(0, 0), (2, 1)]
    assert (1, 9) in train and (2, 0) in train


def test_temporal_split_float_guard():
    triples = [(0, i, i) for i in range(15)]
    _, test = temporal_split(triples, 0.2)
    assert len(test) == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 30), st.integers(0, 50)), min_size=1,
                max_size=80, unique_by=lambda t: (t[0], t[1])),
       st.floats(0.05, 0.95))
def test_temporal_split_properties(triples, frac):
    train, test = temporal_split(triples, frac)
    assert sorted(train + test) == sorted((u, i) for u, i, _ in triples)
    assert not set(train) & set(test)
    ts = {(u, i): t for u, i, t in triples}
    n_by_user = Counter(u for u, _, _ in triples)
    for u, n in n_by_user.items():
        tr = [ts[p] for p in train if p[0] == u]
        te = [ts[p] for p in test if p[0] == u]
        assert tr, "every user keeps a training interaction"
        if te:
            assert max(tr) <= min(te)
        expected = 0 if n < 2 else min(math.ceil(round(frac * n, 9)), n - 1)
        assert len(te) == expected


def test_rebuild_social_drops_missing_and_self_loops():
    umap = {"a": 0, "b": 1, "c": 2}
    edges = [("b", "a"), ("a", "b"), ("a", "a"), ("a", "zz"), ("c", "b")]
    assert rebuild_social(edges, umap) == [(0, 1), (1, 2)]


def test_dataset_validation():
    with pytest.raises(ValueError, match="overlap"):
        Dataset(1, 2, [(0, 0)], [(0, 0)], [])
    with pytest.raises(ValueError, match="out of range"):
        Dataset(1, 2, [(0, 5)], [], [])
    with pytest.raises(ValueError, match="self-loop"):
        Dataset(2, 2, [], [], [(1, 1)])
    with pytest.raises(ValueError, match="duplicate"):
        Dataset(2, 2, [], [], [(0, 1), (1, 0)])


def _check_pipeline(d: Dataset, ratio: float, k: int = 10):
    counts = Counter(i for _, i in d.train + d.test)
    assert len(counts) == d.n_items and min(counts.values()) >= k
    assert d.n_users == math.floor(d.n_items / ratio + 0.5)
    assert not set(d.train) & set(d.test)


def test_preprocess_fixed_point(small_dataset):
    _check_pipeline(small_dataset, SMALL_RATIO)
    assert dataset_stats(small_dataset)[3] == 2 * len(small_dataset.social_edges)


def test_preprocess_ids_follow_sorted_original_ids(small_dataset):
    for mapping in (small_dataset.user_id_map, small_dataset.item_id_map):
        assert [k for k, _ in sorted(mapping.items(), key=lambda kv: kv[1])] == sorted(mapping)


def test_single_pass_can_leave_sparse_items(small_raw):
    raw, social = small_raw
    d = preprocess(raw, social, ratio=3.0, single_pass=True)
    counts = Counter(i for _, i in d.train + d.test)
    # one pass: user selection happens after filtering, so some items lose support
    assert min(counts.values()) < 10
    n_filtered_items = len({r.item for r in kcore_filter_items(dedup_interactions(raw), 10)})
    assert d.n_users == math.floor(n_filtered_items / 3.0 + 0.5)


def test_save_load_round_trip(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path)
    back = load_dataset(tmp_path)
    assert back.n_users == small_dataset.n_users and back.n_items == small_dataset.n_items
    assert sorted(back.train) == sorted(small_dataset.train)
    assert sorted(back.test) == sorted(small_dataset.test)
    assert back.social_edges == small_dataset.social_edges
    assert back.user_id_map == small_dataset.user_id_map
    assert (tmp_path / "stats.txt").read_text().startswith(f"users={back.n_users} ")
