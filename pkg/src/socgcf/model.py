"""Linear three-signal propagation over user and item embeddings.

Each layer computes::

    E_U' = w_a * R~ E_I + w_c * C~ E_U + w_s * S~ E_U
    E_I' = R~^T E_U

with no weight matrices and no activation, and the final embeddings are the
mean over the input and all ``K`` propagated layers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import GraphInputs
from .sparse import spmm

__all__ = [
    "ModelConfig",
    "EmbeddingState",
    "ForwardTrace",
    "init_embeddings",
    "propagate_layer",
    "propagate_layer_adjoint",
    "forward",
    "forward_final",
    "backward",
    "score",
    "score_all_items",
]


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    n_layers: int = 3
    agg_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)  # (interaction, correlation, social)
    seed: int = 0
    init_std: float = 0.1

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        w = np.asarray(self.agg_weights, dtype=np.float64)
        if w.shape != (3,) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("agg_weights must be three finite non-negative reals")


@dataclass
class EmbeddingState:
    e_users: np.ndarray
    e_items: np.ndarray

    def __post_init__(self):
        self.e_users = np.asarray(self.e_users, dtype=np.float64)
        self.e_items = np.asarray(self.e_items, dtype=np.float64)
        if self.e_users.ndim != 2 or self.e_items.ndim != 2 \
                or self.e_users.shape[1] != self.e_items.shape[1]:
            raise ValueError("user and item blocks must be 2-D with equal width")

    @property
    def n_users(self) -> int:
        return self.e_users.shape[0]

    @property
    def n_items(self) -> int:
        return self.e_items.shape[0]

    @property
    def dim(self) -> int:
        return self.e_users.shape[1]

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.e_users.copy(), self.e_items.copy())

    def stacked(self) -> np.ndarray:
        """Users block on top of items block, ``(n + m) x d``."""
        return np.vstack([self.e_users, self.e_items])

    @classmethod
    def from_stacked(cls, e: np.ndarray, n_users: int) -> "EmbeddingState":
        return cls(e[:n_users], e[n_users:])

    def __add__(self, other: "EmbeddingState") -> "EmbeddingState":
        return EmbeddingState(self.e_users + other.e_users, self.e_items + other.e_items)

    def __mul__(self, alpha: float) -> "EmbeddingState":
        return EmbeddingState(alpha * self.e_users, alpha * self.e_items)

    __rmul__ = __mul__


@dataclass
class ForwardTrace:
    layers: list[EmbeddingState] = field(default_factory=list)
    final: EmbeddingState | None = None


def init_embeddings(n_users: int, n_items: int, cfg: ModelConfig,
                    rng: np.random.Generator | None = None) -> EmbeddingState:
    """Gaussian N(0, init_std^2) embeddings; seeded from ``cfg.seed`` unless ``rng`` is given."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    e_u = rng.normal(0.0, cfg.init_std, size=(n_users, cfg.embed_dim))
    e_i = rng.normal(0.0, cfg.init_std, size=(n_items, cfg.embed_dim))
    return EmbeddingState(e_u, e_i)


def _check_dims(state: EmbeddingState, g: GraphInputs) -> None:
    if state.n_users != g.n_users or state.n_items != g.n_items:
        raise ValueError(f"embedding shape ({state.n_users}, {state.n_items}) does not match "
                         f"graph ({g.n_users}, {g.n_items})")


def _user_user(x: np.ndarray, g: GraphInputs, w_c: float, w_s: float) -> np.ndarray | None:
    out = None
    if g.use_correlation and g.c_norm is not None and w_c != 0.0:
        out = w_c * spmm(g.c_norm, x)
    if g.use_social and g.s_norm is not None and w_s != 0.0:
        term = w_s * spmm(g.s_norm, x)
        out = term if out is None else out + term
    return out


def propagate_layer(state: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> EmbeddingState:
    _check_dims(state, g)
    w_a, w_c, w_s = cfg.agg_weights
    e_u = w_a * spmm(g.r_norm, state.e_items)
    extra = _user_user(state.e_users, g, w_c, w_s)
    if extra is not None:
        e_u = e_u + extra
    e_i = spmm(g.r_norm_t, state.e_users)
    return EmbeddingState(e_u, e_i)


def propagate_layer_adjoint(grad: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> EmbeddingState:
    """Transpose of :func:`propagate_layer` as a linear map.

    S~ and C~ are symmetric, so only the interaction blocks swap roles.
    """
    w_a, w_c, w_s = cfg.agg_weights
    g_u = spmm(g.r_norm, grad.e_items)
    extra = _user_user(grad.e_users, g, w_c, w_s)
    if extra is not None:
        g_u = g_u + extra
    g_i = w_a * spmm(g.r_norm_t, grad.e_users)
    return EmbeddingState(g_u, g_i)


def forward(state0: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> ForwardTrace:
    _check_dims(state0, g)
    layers = [state0]
    for _ in range(cfg.n_layers):
        layers.append(propagate_layer(layers[-1], g, cfg))
    scale = 1.0 / (cfg.n_layers + 1)
    e_u = sum(s.e_users for s in layers) * scale
    e_i = sum(s.e_items for s in layers) * scale
    return ForwardTrace(layers, EmbeddingState(e_u, e_i))


def forward_final(state0: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> EmbeddingState:
    """Final embeddings only, without keeping the layer snapshots."""
    _check_dims(state0, g)
    cur = state0
    acc_u, acc_i = state0.e_users.copy(), state0.e_items.copy()
    for _ in range(cfg.n_layers):
        cur = propagate_layer(cur, g, cfg)
        acc_u += cur.e_users
        acc_i += cur.e_items
    scale = 1.0 / (cfg.n_layers + 1)
    return EmbeddingState(acc_u * scale, acc_i * scale)


def backward(grad_final: EmbeddingState, g: GraphInputs, cfg: ModelConfig) -> EmbeddingState:
    """Gradient w.r.t. the input embeddings given the gradient w.r.t. the final ones.

    The forward map is ``(1 / (K+1)) * sum_k P^k``, so its adjoint is evaluated
    by Horner's rule on ``P^T``.
    """
    scale = 1.0 / (cfg.n_layers + 1)
    base = grad_final * scale
    acc = base
    for _ in range(cfg.n_layers):
        acc = base + propagate_layer_adjoint(acc, g, cfg)
    return acc


def score(final: EmbeddingState, u: int, i: int) -> float:
    if not (0 <= u < final.n_users) or not (0 <= i < final.n_items):
        raise IndexError(f"user {u} / item {i} out of range")
    return float(final.e_users[u] @ final.e_items[i])


def score_all_items(final: EmbeddingState, u) -> np.ndarray:
    """Scores of every item for user ``u`` (or a row per user for an index array)."""
    return final.e_users[u] @ final.e_items.T
