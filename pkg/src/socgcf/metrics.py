"""Top-k ranking metrics and ablation reporting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .data import Dataset
from .model import EmbeddingState

__all__ = [
    "MetricsReport",
    "topk_from_scores",
    "rank_topk",
    "precision_recall",
    "ndcg_at_k",
    "evaluate_all",
    "ablation_report",
]


@dataclass(frozen=True)
class MetricsReport:
    k: int
    precision: float
    recall: float
    ndcg: float
    n_eval_users: int

    def to_text(self) -> str:
        """Flat ``key=value`` block."""
        return (f"k={self.k}\nprecision={self.precision!r}\nrecall={self.recall!r}\n"
                f"ndcg={self.ndcg!r}\nn_users={self.n_eval_users}\n")

    @staticmethod
    def csv_header() -> str:
        return "run,k,precision,recall,ndcg,n_users"

    def csv_row(self, run: str) -> str:
        return f"{run},{self.k},{self.precision!r},{self.recall!r},{self.ndcg!r},{self.n_eval_users}"

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(int(kv["k"]), float(kv["precision"]), float(kv["recall"]),
                   float(kv["ndcg"]), int(kv["n_users"]))


def topk_from_scores(scores: np.ndarray, k: int, exclude: Optional[Iterable[int]] = None) -> np.ndarray:
    """Indices of the ``k`` highest scores, excluded indices removed, ties by ascending index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.array(scores, dtype=np.float64)
    if exclude is not None:
        ex = np.asarray(list(exclude) if not isinstance(exclude, np.ndarray) else exclude,
                        dtype=np.int64)
        scores[ex] = -np.inf
        n_cand = len(scores) - len(np.unique(ex))
    else:
        n_cand = len(scores)
    k = min(k, n_cand)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    if k < len(scores):
        # partition to the k-th value, then resolve ties at the boundary by index
        kth = np.partition(scores, len(scores) - k)[len(scores) - k]
        above = np.flatnonzero(scores > kth)
        at = np.flatnonzero(scores == kth)[: k - len(above)]
        cand = np.concatenate([above, at])
    else:
        cand = np.arange(len(scores))
    order = np.lexsort((cand, -scores[cand]))
    return cand[order].astype(np.int64)


def rank_topk(final: EmbeddingState, u: int, k: int, exclude: Optional[Iterable[int]] = None) -> np.ndarray:
    return topk_from_scores(final.e_items @ final.e_users[u], k, exclude)


def precision_recall(topk: Sequence[int], test_items: Iterable[int]) -> tuple[float, float]:
    test = set(int(t) for t in test_items)
    if not test:
        raise ValueError("test_items must be non-empty")
    topk = list(topk)
    tp = sum(1 for i in topk if int(i) in test)
    precision = tp / len(topk) if topk else 0.0
    return precision, tp / len(test)


def ndcg_at_k(topk: Sequence[int], test_items: Iterable[int], k: int) -> float:
    """Binary-gain NDCG with ``log2(rank + 1)`` discount."""
    test = set(int(t) for t in test_items)
    if not test:
        raise ValueError("test_items must be non-empty")
    dcg = sum(1.0 / math.log2(r + 2) for r, i in enumerate(list(topk)[:k]) if int(i) in test)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(len(test), k)))
    return dcg / idcg


def evaluate_all(final: EmbeddingState, dataset: Dataset, k: int = 20,
                 chunk_size: int = 1024) -> MetricsReport:
    """Mean precision/recall/NDCG@k over users that have at least one test item.

    Training items of each user are excluded from their ranking.
    """
    train_by_user = dataset.train_items_by_user()
    test_by_user = dataset.test_items_by_user()
    users = np.array([u for u in range(dataset.n_users) if len(test_by_user[u])], dtype=np.int64)
    if len(users) == 0:
        raise ValueError("no user has a test item; nothing to evaluate")

    per_user = np.zeros((len(users), 3))
    for start in range(0, len(users), chunk_size):
        block = users[start:start + chunk_size]
        scores = final.e_users[block] @ final.e_items.T
        for row, u in enumerate(block):
            top = topk_from_scores(scores[row], k, train_by_user[u])
            p, r = precision_recall(top, test_by_user[u])
            per_user[start + row] = (p, r, ndcg_at_k(top, test_by_user[u], k))
    # fsum keeps aggregation order-independent
    n = len(users)
    p, r, nd = (math.fsum(per_user[:, c]) / n for c in range(3))
    return MetricsReport(k, p, r, nd, n)


def _pct(value: float, base: float) -> str:
    if base == 0.0:
        return "n/a"
    return f"{100.0 * (value - base) / base:+.1f}%"


def ablation_report(runs: Mapping[str, MetricsReport], baseline: str,
                    extra_baselines: Sequence[str] = ()) -> str:
    """Text table of each run's recall/precision/NDCG with relative change vs ``baseline``.

    Each name in ``extra_baselines`` adds another set of delta columns.
    """
    if len(runs) < 1:
        raise ValueError("need at least one run")
    bases = [baseline, *[b for b in extra_baselines if b != baseline]]
    for b in bases:
        if b not in runs:
            raise ValueError(f"baseline run {b!r} not among runs {sorted(runs)}")
    width = max(len(n) for n in runs) + 2
    lines = []
    for b in bases:
        ref = runs[b]
        lines.append(f"deltas vs {b}")
        lines.append(f"{'run':<{width}}{'recall':>20}{'precision':>20}{'ndcg':>20}")
        for name, rep in runs.items():
            cells = [f"{getattr(rep, m):.4f} ({_pct(getattr(rep, m), getattr(ref, m))})"
                     for m in ("recall", "precision", "ndcg")]
            lines.append(f"{name:<{width}}" + "".join(f"{c:>20}" for c in cells))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
