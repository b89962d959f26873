"""Propagation operators: the normalized interaction blocks, the bucketed
user-correlation matrix and the normalized friendship matrix."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .sparse import SparseMatrix, bipartite_normalize, nnz_degrees, sym_normalize, transpose

logger = logging.getLogger(__name__)

__all__ = [
    "GraphInputs",
    "build_R",
    "build_interaction_operator",
    "jaccard_pairs",
    "classify_f",
    "build_C",
    "build_S",
    "build_graph_inputs",
    "CORRELATION_LEVELS",
    "operator_stats",
    "run_label",
]

# (lower bound of Jaccard bucket, typical value)
_BUCKETS = ((0.9, 1.0), (0.6, 0.5), (0.4, 0.05), (0.1, 0.005))
CORRELATION_LEVELS = (0.0, 0.005, 0.05, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class GraphInputs:
    r_norm: SparseMatrix
    r_norm_t: SparseMatrix
    s_norm: Optional[SparseMatrix] = None
    c_norm: Optional[SparseMatrix] = None
    use_social: bool = False
    use_correlation: bool = False

    @property
    def n_users(self) -> int:
        return self.r_norm.n_rows

    @property
    def n_items(self) -> int:
        return self.r_norm.n_cols

    def with_channels(self, use_social: bool, use_correlation: bool) -> "GraphInputs":
        """Same operators, different channel switches."""
        if use_social and self.s_norm is None:
            logger.warning("social operator unavailable; social channel stays off")
            use_social = False
        if use_correlation and self.c_norm is None:
            raise ValueError("correlation operator was not built")
        return GraphInputs(self.r_norm, self.r_norm_t, self.s_norm, self.c_norm,
                           use_social, use_correlation)

    @property
    def label(self) -> str:
        return run_label(self.use_social, self.use_correlation)


def run_label(use_social: bool, use_correlation: bool) -> str:
    """Ablation name of a channel combination."""
    return {
        (False, False): "lightgcn",
        (False, True): "w_interact",
        (True, False): "w_social",
        (True, True): "model_all",
    }[(bool(use_social), bool(use_correlation))]


def build_R(d: Dataset) -> SparseMatrix:
    """Binary user x item matrix over training pairs only."""
    if not d.train:
        raise ValueError("empty training set")
    u, i = np.array(d.train, dtype=np.int64).T
    r = SparseMatrix.from_coo(u, i, 1.0, (d.n_users, d.n_items))
    return SparseMatrix(r.n_rows, r.n_cols, r.row_offsets, r.col_indices, np.ones(r.nnz))


def build_interaction_operator(r: SparseMatrix) -> tuple[SparseMatrix, SparseMatrix]:
    r_norm = bipartite_normalize(r)
    return r_norm, transpose(r_norm)


def jaccard_pairs(r: SparseMatrix, floor: float = 0.1) -> SparseMatrix:
    """Symmetric user x user Jaccard index of item sets, off-diagonal, entries >= ``floor``.

    Co-occurrence counts are accumulated user by user through the item->users
    adjacency, so only pairs that share an item are ever touched.
    """
    if not 0.0 <= floor < 1.0:
        raise ValueError("floor must lie in [0, 1)")
    n = r.n_rows
    rt = transpose(r)
    deg = nnz_degrees(r, "rows")
    ro, ci = r.row_offsets, r.col_indices
    tro, tci = rt.row_offsets, rt.col_indices

    rows, cols, vals = [], [], []
    for u in range(n):
        items = ci[ro[u]:ro[u + 1]]
        if len(items) == 0:
            continue
        neigh = np.concatenate([tci[tro[i]:tro[i + 1]] for i in items])
        others, inter = np.unique(neigh, return_counts=True)
        mask = others != u
        others, inter = others[mask], inter[mask]
        union = deg[u] + deg[others] - inter
        jac = inter / union
        keep = jac >= floor
        rows.append(np.full(int(keep.sum()), u, dtype=np.int64))
        cols.append(others[keep])
        vals.append(jac[keep])
    if not rows:
        return SparseMatrix.zeros(n, n)
    return SparseMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                                 np.concatenate(vals), (n, n))


def classify_f(j):
    """Bucket a Jaccard index into its typical correlation value.

    [0, .1) -> 0, [.1, .4) -> .005, [.4, .6) -> .05, [.6, .9) -> .5, [.9, 1] -> 1.
    Accepts a scalar or an array.
    """
    arr = np.asarray(j, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("Jaccard values must lie in [0, 1]")
    out = np.zeros_like(arr)
    # descending thresholds; first match wins
    assigned = np.zeros(arr.shape, dtype=bool)
    for lo, value in _BUCKETS:
        hit = (arr >= lo) & ~assigned
        out[hit] = value
        assigned |= hit
    return float(out) if out.ndim == 0 else out


def build_C(r: SparseMatrix, floor: float = 0.1) -> SparseMatrix:
    """Normalized bucketed correlation matrix."""
    jac = jaccard_pairs(r, floor)
    levels = classify_f(jac.values)
    keep = levels > 0
    rows = jac.row_indices()[keep]
    c = SparseMatrix.from_coo(rows, jac.col_indices[keep], levels[keep], jac.shape)
    return sym_normalize(c)


def build_S(d: Dataset) -> Optional[SparseMatrix]:
    """Normalized friendship matrix, or ``None`` when there are no edges."""
    if not d.social_edges:
        return None
    a, b = np.array(d.social_edges, dtype=np.int64).T
    s = SparseMatrix.from_coo(np.concatenate([a, b]), np.concatenate([b, a]), 1.0,
                              (d.n_users, d.n_users))
    # from_coo sums repeated edges; S is binary
    s = SparseMatrix(s.n_rows, s.n_cols, s.row_offsets, s.col_indices, np.ones(s.nnz))
    return sym_normalize(s)


def build_graph_inputs(d: Dataset, use_social: bool = True, use_correlation: bool = True,
                       jaccard_floor: float = 0.1) -> GraphInputs:
    """Build every operator a channel combination needs.

    The correlation matrix is built only from training interactions.
    """
    r = build_R(d)
    r_norm, r_norm_t = build_interaction_operator(r)
    s_norm = build_S(d) if use_social else None
    if use_social and s_norm is None:
        logger.warning("dataset has no social edges; social channel disabled")
        use_social = False
    c_norm = build_C(r, jaccard_floor) if use_correlation else None
    return GraphInputs(r_norm, r_norm_t, s_norm, c_norm, use_social, use_correlation)


def operator_stats(g: GraphInputs) -> list[tuple[str, int, float]]:
    """``(name, nnz, density)`` for each present operator."""
    out = []
    for name, mat in (("R", g.r_norm), ("S", g.s_norm), ("C", g.c_norm)):
        if mat is not None:
            cells = mat.n_rows * mat.n_cols
            out.append((name, mat.nnz, mat.nnz / cells if cells else 0.0))
    return out
