"""Self-checks: dense reference propagation, LightGCN reduction, gradient
check and metric oracles.

The reference paths here deliberately avoid the sparse kernels and the
model module so that they can catch mistakes in either.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .graph import CORRELATION_LEVELS, GraphInputs, build_interaction_operator
from .metrics import ndcg_at_k, precision_recall, topk_from_scores
from .model import EmbeddingState, ForwardTrace, ModelConfig, forward
from .sparse import SparseMatrix, sym_normalize
from .train import derive_rng, finite_diff_check

__all__ = [
    "ToyGraph",
    "random_toy_graph",
    "dense_forward",
    "dense_oracle_check",
    "minimal_lightgcn_layer",
    "lightgcn_reduction_check",
    "gradient_check",
    "metric_oracle_check",
    "CheckResult",
    "run_all_checks",
    "social_sign_flip",
]

CHANNELS = ((False, False), (False, True), (True, False), (True, True))


@dataclass
class ToyGraph:
    """Raw binary R, binary S and bucketed C of a small random instance."""

    r: np.ndarray
    s: np.ndarray
    c: np.ndarray

    def graph_inputs(self, use_social: bool, use_correlation: bool) -> GraphInputs:
        r_norm, r_norm_t = build_interaction_operator(SparseMatrix.from_dense(self.r))
        s_norm = sym_normalize(SparseMatrix.from_dense(self.s))
        c_norm = sym_normalize(SparseMatrix.from_dense(self.c))
        return GraphInputs(r_norm, r_norm_t, s_norm, c_norm, use_social, use_correlation)


def random_toy_graph(n: int, m: int, rng: np.random.Generator, density: float = 0.3) -> ToyGraph:
    r = (rng.random((n, m)) < density).astype(float)
    upper = np.triu(rng.random((n, n)) < density, 1)
    s = (upper | upper.T).astype(float)
    levels = np.asarray(CORRELATION_LEVELS[1:])
    cu = np.triu(rng.random((n, n)) < density, 1) * rng.choice(levels, size=(n, n))
    c = cu + cu.T
    return ToyGraph(r, s, c)


def _dense_sym_norm(a: np.ndarray) -> np.ndarray:
    deg = np.count_nonzero(a, axis=1).astype(float)
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    return inv[:, None] * a * inv[None, :]


def dense_forward(toy: ToyGraph, e0: np.ndarray, cfg: ModelConfig,
                  use_social: bool, use_correlation: bool) -> list[np.ndarray]:
    """All layer snapshots plus the layer mean, from fully materialized matrices.

    The interaction operator is the normalized ``(n+m)`` square block matrix
    ``[[0, R], [R^T, 0]]``; the user-user channels are added to its top-left
    block.
    """
    n, m = toy.r.shape
    a = np.zeros((n + m, n + m))
    a[:n, n:] = toy.r
    a[n:, :n] = toy.r.T
    a_norm = _dense_sym_norm(a)
    w_a, w_c, w_s = cfg.agg_weights
    p = np.zeros_like(a_norm)
    p[:n, n:] = w_a * a_norm[:n, n:]
    p[n:, :n] = a_norm[n:, :n]
    if use_social:
        p[:n, :n] += w_s * _dense_sym_norm(toy.s)
    if use_correlation:
        p[:n, :n] += w_c * _dense_sym_norm(toy.c)
    layers = [e0]
    for _ in range(cfg.n_layers):
        layers.append(p @ layers[-1])
    return layers + [sum(layers) / len(layers)]


ForwardFn = Callable[[EmbeddingState, GraphInputs, ModelConfig], ForwardTrace]


def dense_oracle_check(n_graphs: int = 24, seed: int = 0,
                       forward_fn: ForwardFn = forward) -> float:
    """Max abs deviation between ``forward_fn`` and :func:`dense_forward` over random toys."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for g_idx in range(n_graphs):
        n = int(rng.integers(2, 13))
        m = int(rng.integers(2, 31 - n))
        toy = random_toy_graph(n, m, rng, density=float(rng.uniform(0.15, 0.5)))
        k = g_idx % 5
        weights = (1.0, 1.0, 1.0) if g_idx % 2 == 0 else tuple(rng.uniform(0.2, 2.0, 3))
        cfg = ModelConfig(embed_dim=int(rng.integers(1, 6)), n_layers=k, agg_weights=weights)
        use_social, use_corr = CHANNELS[g_idx % 4]
        e0 = rng.normal(size=(n + m, cfg.embed_dim))
        trace = forward_fn(EmbeddingState(e0[:n], e0[n:]), toy.graph_inputs(use_social, use_corr), cfg)
        ref = dense_forward(toy, e0, cfg, use_social, use_corr)
        got = [s.stacked() for s in trace.layers] + [trace.final.stacked()]
        for a, b in zip(got, ref):
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def minimal_lightgcn_layer(edges: list[tuple[int, int]], e_users: np.ndarray, e_items: np.ndarray
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Plain edge-list LightGCN layer with ``1/sqrt(deg_u deg_i)`` weights."""
    du: dict[int, int] = {}
    di: dict[int, int] = {}
    for u, i in edges:
        du[u] = du.get(u, 0) + 1
        di[i] = di.get(i, 0) + 1
    out_u = np.zeros_like(e_users)
    out_i = np.zeros_like(e_items)
    for u, i in edges:
        w = 1.0 / math.sqrt(du[u] * di[i])
        out_u[u] += w * e_items[i]
        out_i[i] += w * e_users[u]
    return out_u, out_i


def lightgcn_reduction_check(n_graphs: int = 10, seed: int = 1) -> float:
    """Max abs deviation between per-layer embeddings with both user-user channels
    off and repeated :func:`minimal_lightgcn_layer`."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_graphs):
        n, m = int(rng.integers(2, 15)), int(rng.integers(2, 15))
        toy = random_toy_graph(n, m, rng)
        edges = [tuple(map(int, x)) for x in np.argwhere(toy.r > 0)]
        cfg = ModelConfig(embed_dim=4, n_layers=3, agg_weights=(1.0, 1.0, 1.0))
        e_u, e_i = rng.normal(size=(n, 4)), rng.normal(size=(m, 4))
        trace = forward(EmbeddingState(e_u, e_i), toy.graph_inputs(False, False), cfg)
        for layer in trace.layers[1:]:
            e_u, e_i = minimal_lightgcn_layer(edges, e_u, e_i)
            worst = max(worst, float(np.max(np.abs(layer.e_users - e_u))),
                        float(np.max(np.abs(layer.e_items - e_i))))
    return worst


def gradient_check(seed: int = 3, eps: float = 1e-4, l2_lambda: float = 1e-2
                   ) -> dict[tuple[bool, bool], float]:
    """Finite-difference error on a 5-user / 8-item / d=4 / K=2 instance, per channel combination."""
    rng = derive_rng(seed, "gradient-check")
    toy = random_toy_graph(5, 8, rng, density=0.4)
    toy.r[np.arange(5), rng.integers(0, 8, 5)] = 1.0  # every user has a positive
    cfg = ModelConfig(embed_dim=4, n_layers=2, agg_weights=(1.0, 1.0, 1.0), init_std=0.5)
    out = {}
    for use_social, use_corr in CHANNELS:
        g = toy.graph_inputs(use_social, use_corr)
        out[(use_social, use_corr)] = finite_diff_check(g, cfg, eps, l2_lambda=l2_lambda, seed=seed)
    return out


def metric_oracle_check() -> list[tuple[str, float, float]]:
    """``(name, got, expected)`` for a hand-worked 3-user fixture (k=4, 8 items)."""
    k = 4
    # user 0: perfect; user 1: single test item at rank 2; user 2: no hits
    scores = np.array([
        [8, 7, 6, 5, 4, 3, 2, 1],
        [1, 8, 7, 2, 3, 4, 5, 6],
        [8, 7, 6, 5, 1, 1, 1, 1],
    ], dtype=float)
    tests = [{0, 1}, {2}, {7}]
    got = []
    for u in range(3):
        top = topk_from_scores(scores[u], k)
        p, r = precision_recall(top, tests[u])
        got.append((p, r, ndcg_at_k(top, tests[u], k)))
    expected = [(2 / 4, 1.0, 1.0), (1 / 4, 1.0, math.log(2) / math.log(3)), (0.0, 0.0, 0.0)]
    rows = []
    for u in range(3):
        for name, a, b in zip(("precision", "recall", "ndcg"), got[u], expected[u]):
            rows.append((f"user{u}.{name}", a, b))
    return rows


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.value < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (tol {self.tolerance:.0e})"


def run_all_checks(forward_fn: ForwardFn = forward) -> list[CheckResult]:
    results = [CheckResult("dense-oracle propagation", dense_oracle_check(forward_fn=forward_fn), 1e-10)]
    results.append(CheckResult("lightgcn reduction", lightgcn_reduction_check(), 1e-12))
    for (s, c), err in gradient_check().items():
        results.append(CheckResult(f"gradient social={int(s)} correlation={int(c)}", err, 1e-4))
    metric_err = max(abs(a - b) for _, a, b in metric_oracle_check())
    results.append(CheckResult("metric oracles", metric_err, 1e-9))
    return results


def social_sign_flip(state: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> ForwardTrace:
    """Deliberately broken forward (negated social term); used to show the oracle bites."""
    if g.s_norm is not None:
        s = g.s_norm
        neg = SparseMatrix(s.n_rows, s.n_cols, s.row_offsets, s.col_indices, -s.values)
        g = GraphInputs(g.r_norm, g.r_norm_t, neg, g.c_norm, g.use_social, g.use_correlation)
    return forward(state, g, cfg)
