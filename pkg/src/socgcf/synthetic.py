"""Synthetic raw interaction + friendship data with topic structure and
social homophily, in the same shape as the real raw files.

Users mix a few latent topics. Friendships form mostly between users with
the same dominant topic, and active users make more friends. Each user's
item choices blend their own topic mix with their friends' mix, and some
later choices copy an item a friend already consumed; both kinds of social
influence grow over the user's timeline. Items belong to one topic and are
drawn with Zipf popularity inside it.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .data import RawInteraction

__all__ = ["SyntheticConfig", "EPINIONS_LIKE", "generate", "write_raw_files"]


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 1500
    n_items: int = 3000
    n_topics: int = 16
    topic_concentration: float = 0.3
    mean_interactions: float = 80.0
    activity_sigma: float = 1.0
    mean_friends: float = 30.0
    homophily: float = 0.8
    social_influence: float = 0.5
    item_adoption: float = 0.0
    activity_friends: bool = False
    zipf_exponent: float = 0.5
    seed: int = 0


# Epinions-shaped stand-in: processed at ratio 11.95 it keeps about 250 users and
# 3,000 items. Friends' items are adopted late in each timeline, so the social
# graph carries signal that the interaction graph alone does not.
EPINIONS_LIKE = SyntheticConfig(item_adoption=0.8, activity_friends=True)


def generate(cfg: SyntheticConfig = EPINIONS_LIKE) -> tuple[list[RawInteraction], list[tuple[str, str]]]:
    rng = np.random.default_rng(cfg.seed)
    n, m, t = cfg.n_users, cfg.n_items, cfg.n_topics

    theta = rng.dirichlet(np.full(t, cfg.topic_concentration), size=n)
    dominant = theta.argmax(axis=1)

    counts = np.maximum(2, rng.lognormal(np.log(cfg.mean_interactions), cfg.activity_sigma, size=n)
                        .astype(int))

    # friendships: each user proposes links, same-topic partners with prob `homophily`;
    # with `activity_friends` both proposal counts and partner choice follow activity
    edges = set()
    by_topic = [np.flatnonzero(dominant == k) for k in range(t)]
    if cfg.activity_friends:
        pull = counts / counts.mean()
        n_prop = rng.poisson(cfg.mean_friends / 2.0 * pull)
        pick = [counts[idx] / counts[idx].sum() for idx in by_topic]
        pick_all = counts / counts.sum()
    else:
        n_prop = rng.poisson(cfg.mean_friends / 2.0, size=n)
        pick = [None] * t
        pick_all = None
    for u in range(n):
        for _ in range(n_prop[u]):
            k = dominant[u]
            pool = by_topic[k]
            if rng.random() < cfg.homophily and len(pool) > 1:
                v = int(rng.choice(pool, p=pick[k]))
            else:
                v = int(rng.choice(n, p=pick_all))
            if v != u:
                edges.add((min(u, v), max(u, v)))
    friends = [[] for _ in range(n)]
    for a, b in edges:
        friends[a].append(b)
        friends[b].append(a)
    social_theta = np.array([theta[f].mean(axis=0) if f else theta[u] for u, f in enumerate(friends)])

    item_topic = rng.integers(t, size=m)
    ranks = np.empty(m)
    items_of = []
    for k in range(t):
        members = rng.permutation(np.flatnonzero(item_topic == k))
        items_of.append(members)
        ranks[members] = np.arange(1, len(members) + 1)
    weight = ranks ** -cfg.zipf_exponent
    within = [weight[idx] / weight[idx].sum() for idx in items_of]

    def topic_item(mix: np.ndarray) -> int | None:
        k = rng.choice(t, p=mix / mix.sum())
        return int(rng.choice(items_of[k], p=within[k])) if len(items_of[k]) else None

    # first pass: choices from topic mixes only; friends copy from these lists
    first = [[topic_item((1.0 - cfg.social_influence * p) * theta[u]
                         + cfg.social_influence * p * social_theta[u])
              for p in np.linspace(0.0, 1.0, counts[u])] for u in range(n)]
    raw: list[RawInteraction] = []
    for u in range(n):
        ts = np.sort(rng.integers(1_000_000_000, 1_500_000_000, size=counts[u]))
        progress = np.linspace(0.0, 1.0, counts[u])
        for stamp, p, item in zip(ts, progress, first[u]):
            if friends[u] and rng.random() < cfg.item_adoption * p:
                pool = first[int(rng.choice(friends[u]))]
                item = pool[int(rng.integers(len(pool)))]
            if item is None:
                continue
            raw.append(RawInteraction(f"u{u}", f"i{item}", int(stamp)))
    social = [(f"u{a}", f"u{b}") for a, b in sorted(edges)]
    return raw, social


def write_raw_files(directory: Union[str, Path], cfg: SyntheticConfig = EPINIONS_LIKE
                    ) -> tuple[Path, Path]:
    """Write ``interactions.txt`` (canonical format) and ``social.txt``; returns both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    raw, social = generate(cfg)
    inter = directory / "interactions.txt"
    soc = directory / "social.txt"
    with open(inter, "w", encoding="ascii", newline="\n") as fh:
        for r in raw:
            fh.write(f"{r.user} {r.item} {r.timestamp}\n")
    with open(soc, "w", encoding="ascii", newline="\n") as fh:
        for a, b in social:
            fh.write(f"{a} {b}\n")
    return inter, soc
