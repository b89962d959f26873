"""Loading raw interaction/social files and the filtering pipeline that turns
them into a remapped, temporally split :class:`Dataset`."""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, NamedTuple, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# items-per-user ratios used when selecting users, per dataset
DEFAULT_RATIOS = {
    "gowalla": 1.44,
    "librarything": 1.60,
    "ciao": 18.78,
    "epinions": 11.95,
}


class RawInteraction(NamedTuple):
    user: str
    item: str
    timestamp: int
    rating: Optional[float] = None


@dataclass(frozen=True)
class Dataset:
    n_users: int
    n_items: int
    train: list[tuple[int, int]]
    test: list[tuple[int, int]]
    social_edges: list[tuple[int, int]]
    user_id_map: dict[str, int] = field(default_factory=dict)
    item_id_map: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("train", "test"):
            pairs = getattr(self, name)
            for u, i in pairs:
                if not (0 <= u < self.n_users and 0 <= i < self.n_items):
                    raise ValueError(f"{name} pair ({u}, {i}) out of range")
        if set(self.train) & set(self.test):
            raise ValueError("train and test overlap")
        seen = set()
        for a, b in self.social_edges:
            if a == b:
                raise ValueError(f"self-loop ({a}, {a}) in social edges")
            if not (0 <= a < self.n_users and 0 <= b < self.n_users):
                raise ValueError(f"social edge ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate social edge {key}")
            seen.add(key)

    def train_items_by_user(self) -> list[np.ndarray]:
        return _group(self.train, self.n_users)

    def test_items_by_user(self) -> list[np.ndarray]:
        return _group(self.test, self.n_users)


def _group(pairs: Sequence[tuple[int, int]], n_users: int) -> list[np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(n_users)]
    for u, i in pairs:
        buckets[u].append(i)
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


# ---------------------------------------------------------------- loading

def load_interactions(path: PathLike,
                      format: Literal["canonical", "adjacency"] = "canonical") -> list[RawInteraction]:
    """Parse an interaction file.

    ``canonical`` lines are ``user item timestamp [rating]``. ``adjacency``
    lines are ``user item1 item2 ...`` and get positional timestamps 0, 1, ...
    Malformed lines are skipped and logged with their line number.
    """
    if format not in ("canonical", "adjacency"):
        raise ValueError(f"unknown interaction format {format!r}")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read interactions file {path}: {exc}") from exc

    records: list[RawInteraction] = []
    bad: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if format == "adjacency":
            if len(parts) < 2:
                bad.append(lineno)
                continue
            records.extend(RawInteraction(parts[0], it, pos) for pos, it in enumerate(parts[1:]))
            continue
        if len(parts) not in (3, 4):
            bad.append(lineno)
            continue
        try:
            ts = int(parts[2])
            rating = float(parts[3]) if len(parts) == 4 else None
        except ValueError:
            bad.append(lineno)
            continue
        records.append(RawInteraction(parts[0], parts[1], ts, rating))

    if bad:
        shown = ", ".join(map(str, bad[:10]))
        logger.warning("%s: skipped %d malformed line(s): %s%s", path, len(bad), shown,
                       " ..." if len(bad) > 10 else "")
    if not records:
        raise ValueError(f"{path}: zero valid records")
    return records


def load_social(path: PathLike) -> list[tuple[str, str]]:
    """One ``u v`` pair per line; extra columns (e.g. trust weights) are ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read social file {path}: {exc}") from exc
    edges = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) < 2:
            logger.warning("%s:%d: malformed social line skipped", path, lineno)
            continue
        edges.append((parts[0], parts[1]))
    return edges


# ---------------------------------------------------------------- pipeline steps

def dedup_interactions(raw: Iterable[RawInteraction]) -> list[RawInteraction]:
    """Collapse repeated (user, item) records, keeping the earliest timestamp."""
    best: dict[tuple[str, str], RawInteraction] = {}
    for r in raw:
        key = (r.user, r.item)
        if key not in best or r.timestamp < best[key].timestamp:
            best[key] = r
    return list(best.values())


def kcore_filter_items(raw: Sequence[RawInteraction], k: int = 10) -> list[RawInteraction]:
    """Keep records whose item has at least ``k`` records in ``raw`` (one pass)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(r.item for r in raw)
    kept = [r for r in raw if counts[r.item] >= k]
    if not kept:
        raise ValueError(f"no item has at least {k} interactions; everything was filtered out")
    return kept


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def select_users_by_jaccard(filtered: Sequence[RawInteraction], ratio: float) -> set[str]:
    """Keep the ``round(|I| / ratio)`` users whose item sets are most Jaccard-similar
    to the full filtered item set ``I``. Ties go to the lexicographically smaller ID."""
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    items = {r.item for r in filtered}
    user_items: dict[str, set[str]] = defaultdict(set)
    for r in filtered:
        user_items[r.user].add(r.item)

    q = _round_half_up(len(items) / ratio)
    if q > len(user_items):
        logger.warning("requested %d users but only %d are available; keeping all", q, len(user_items))
        return set(user_items)

    def sim(u: str) -> float:
        s = user_items[u]
        return len(s & items) / len(s | items)

    ranked = sorted(user_items, key=lambda u: (-sim(u), u))
    return set(ranked[:q])


def _ceil_fraction(fraction: float, n: int) -> int:
    # guard against 0.2 * 15 = 3.0000000000000004
    return math.ceil(round(fraction * n, 9))


def temporal_split(interactions: Sequence[tuple[int, int, int]], test_fraction: float = 0.2
                   ) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Per-user split of ``(user, item, timestamp)`` triples.

    The ``ceil(test_fraction * n_u)`` latest interactions of each user go to
    test; equal timestamps are ordered by item index. Users with fewer than two
    interactions stay entirely in train, and at least one interaction per user
    is always kept for training.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    by_user: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for u, i, ts in interactions:
        by_user[u].append((ts, i))

    train, test = [], []
    for u in sorted(by_user):
        events = sorted(by_user[u])
        n = len(events)
        n_test = 0 if n < 2 else min(_ceil_fraction(test_fraction, n), n - 1)
        cut = n - n_test
        train.extend((u, i) for _, i in events[:cut])
        test.extend((u, i) for _, i in events[cut:])
    return train, test


def rebuild_social(raw_edges: Iterable[tuple[str, str]], user_id_map: dict[str, int]
                   ) -> list[tuple[int, int]]:
    """Undirected social edges over surviving users, as sorted ``(a, b)`` with ``a < b``."""
    pairs = set()
    for a, b in raw_edges:
        if a == b or a not in user_id_map or b not in user_id_map:
            continue
        ia, ib = user_id_map[a], user_id_map[b]
        pairs.add((min(ia, ib), max(ia, ib)))
    return sorted(pairs)


def dataset_stats(d: Dataset) -> tuple[int, int, int, int]:
    """``(n_users, n_items, n_edges, n_social)``; social links are counted in both directions."""
    return d.n_users, d.n_items, len(d.train) + len(d.test), 2 * len(d.social_edges)


# ---------------------------------------------------------------- full pipeline

def preprocess(raw: Sequence[RawInteraction], raw_social: Iterable[tuple[str, str]] = (),
               ratio: float = 1.0, k_core: int = 10, test_fraction: float = 0.2,
               single_pass: bool = False, max_rounds: int = 100) -> Dataset:
    """Run item filtering, Jaccard user selection, remapping and the temporal split.

    By default filtering and selection alternate until the item set is
    stable, so that every item in the result keeps at least ``k_core``
    interactions among the selected users and the user count equals
    ``round(|items| / ratio)``. With ``single_pass`` each step runs once and
    item counts may drop below ``k_core`` after user selection.
    """
    records = dedup_interactions(raw)
    for round_ in range(1, max_rounds + 1):
        records = kcore_filter_items(records, k_core)
        n_items = len({r.item for r in records})
        users = select_users_by_jaccard(records, ratio)
        kept = [r for r in records if r.user in users]
        counts = Counter(r.item for r in kept)
        settled = len(counts) == n_items and min(counts.values()) >= k_core
        logger.debug("round %d: %d items, %d users, %d interactions", round_, n_items,
                     len(users), len(kept))
        records = kept
        if settled or single_pass:
            break
    else:
        raise RuntimeError(f"item filtering and user selection did not settle in {max_rounds} rounds")

    user_ids = sorted({r.user for r in records})
    item_ids = sorted({r.item for r in records})
    umap = {u: idx for idx, u in enumerate(user_ids)}
    imap = {i: idx for idx, i in enumerate(item_ids)}
    triples = [(umap[r.user], imap[r.item], r.timestamp) for r in records]
    train, test = temporal_split(triples, test_fraction)
    social = rebuild_social(raw_social, umap)
    return Dataset(len(user_ids), len(item_ids), train, test, social, umap, imap)


# ---------------------------------------------------------------- persistence

def _write_pairs(path: Path, pairs: Iterable[tuple[int, int]]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for a, b in pairs:
            fh.write(f"{a} {b}\n")


def _read_pairs(path: Path) -> list[tuple[int, int]]:
    out = []
    for line in path.read_text(encoding="ascii").splitlines():
        parts = line.split()
        if parts:
            out.append((int(parts[0]), int(parts[1])))
    return out


def _write_map(path: Path, mapping: dict[str, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, idx in sorted(mapping.items(), key=lambda kv: kv[1]):
            fh.write(f"{key} {idx}\n")


def _read_map(path: Path) -> dict[str, int]:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if parts:
            out[parts[0]] = int(parts[1])
    return out


def stats_line(d: Dataset) -> str:
    n_users, n_items, n_edges, n_social = dataset_stats(d)
    return f"users={n_users} items={n_items} edges={n_edges} social={n_social}"


def save_dataset(d: Dataset, directory: PathLike) -> None:
    """Write train/test/social pair files, the two ID maps and ``stats.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_pairs(directory / "train.txt", sorted(d.train))
    _write_pairs(directory / "test.txt", sorted(d.test))
    _write_pairs(directory / "social.txt", d.social_edges)
    _write_map(directory / "user_map.txt", d.user_id_map)
    _write_map(directory / "item_map.txt", d.item_id_map)
    (directory / "stats.txt").write_text(stats_line(d) + "\n", encoding="ascii")


def load_dataset(directory: PathLike) -> Dataset:
    directory = Path(directory)
    if not (directory / "train.txt").exists():
        raise FileNotFoundError(f"no preprocessed dataset in {directory}")
    umap = _read_map(directory / "user_map.txt")
    imap = _read_map(directory / "item_map.txt")
    social_path = directory / "social.txt"
    social = _read_pairs(social_path) if social_path.exists() else []
    return Dataset(len(umap), len(imap), _read_pairs(directory / "train.txt"),
                   _read_pairs(directory / "test.txt"), social, umap, imap)
