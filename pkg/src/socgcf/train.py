"""BPR training of the input embeddings with mini-batch Adam."""
from __future__ import annotations

import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import expit

from .data import Dataset
from .graph import GraphInputs
from .metrics import MetricsReport, evaluate_all
from .model import EmbeddingState, ModelConfig, backward, forward_final, init_embeddings

logger = logging.getLogger(__name__)

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "AdamState",
    "TrainingError",
    "derive_rng",
    "sample_epoch",
    "bpr_loss",
    "bpr_objective",
    "grad_step",
    "train",
    "finite_diff_check",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    l2_lambda: float = 1e-4
    batch_size: int = 2048
    max_epochs: int = 1500
    eval_every: int = 10
    patience: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_k: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_every < 1 or self.patience < 1:
            raise ValueError("eval_every and patience must be >= 1")


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator for one consumer (``"init"``, ``"sampling"``, ...) of a root seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(label.encode())]))


# ---------------------------------------------------------------- sampling

def _pair_keys(users: np.ndarray, items: np.ndarray, n_items: int) -> np.ndarray:
    return users.astype(np.int64) * n_items + items.astype(np.int64)


def sample_epoch(train: np.ndarray, n_items: int, rng: np.random.Generator) -> np.ndarray:
    """One ``(user, positive, negative)`` triple per training pair, shuffled.

    ``train`` is an ``(N, 2)`` array of ``(user, item)``. Negatives are drawn
    uniformly from the items the user has not interacted with, by rejection.
    Users who interacted with every item are skipped.
    """
    train = np.asarray(train, dtype=np.int64).reshape(-1, 2)
    if len(train) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    users, items = train[:, 0], train[:, 1]
    known = np.unique(_pair_keys(users, items, n_items))
    per_user = np.bincount(users)
    full = np.flatnonzero(per_user >= n_items)
    if len(full):
        logger.warning("skipping %d user(s) who interacted with every item", len(full))
        keep = ~np.isin(users, full)
        users, items = users[keep], items[keep]

    order = rng.permutation(len(users))
    users, items = users[order], items[order]
    neg = rng.integers(0, n_items, size=len(users))
    bad = np.flatnonzero(np.isin(_pair_keys(users, neg, n_items), known))
    while len(bad):
        neg[bad] = rng.integers(0, n_items, size=len(bad))
        still = np.isin(_pair_keys(users[bad], neg[bad], n_items), known)
        bad = bad[still]
    return np.stack([users, items, neg], axis=1)


# ---------------------------------------------------------------- loss and gradient

def bpr_loss(pos_scores, neg_scores, params_norm_sq: float = 0.0, l2_lambda: float = 0.0) -> float:
    """Summed ``-ln sigmoid(pos - neg)`` plus ``l2_lambda * params_norm_sq``."""
    diff = np.asarray(pos_scores, dtype=np.float64) - np.asarray(neg_scores, dtype=np.float64)
    if not np.all(np.isfinite(diff)):
        raise ValueError("scores must be finite")
    return float(np.sum(np.logaddexp(0.0, -diff)) + l2_lambda * params_norm_sq)


def bpr_objective(state0: EmbeddingState, g: GraphInputs, cfg: ModelConfig, batch: np.ndarray,
                  l2_lambda: float, full_reg: bool = False) -> tuple[float, EmbeddingState]:
    """BPR loss of a batch of triples and its exact gradient w.r.t. the input embeddings.

    The L2 term sums the squared norms of the three input rows of every
    triple (a row used by several triples counts once per triple), or of
    every row when ``full_reg`` is set.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    grad_u = np.zeros_like(state0.e_users)
    grad_i = np.zeros_like(state0.e_items)
    loss = 0.0

    if len(batch):
        u, i, j = batch.T
        final = forward_final(state0, g, cfg)
        eu, ei, ej = final.e_users[u], final.e_items[i], final.e_items[j]
        diff = np.einsum("bd,bd->b", eu, ei - ej)
        loss += bpr_loss(diff, np.zeros_like(diff))
        coef = -expit(-diff)[:, None]
        gf_u = np.zeros_like(final.e_users)
        gf_i = np.zeros_like(final.e_items)
        np.add.at(gf_u, u, coef * (ei - ej))
        np.add.at(gf_i, i, coef * eu)
        np.add.at(gf_i, j, -coef * eu)
        back = backward(EmbeddingState(gf_u, gf_i), g, cfg)
        grad_u += back.e_users
        grad_i += back.e_items

    if l2_lambda:
        if full_reg:
            ru, ri = np.arange(state0.n_users), np.arange(state0.n_items)
        else:
            ru, ri = batch[:, 0], batch[:, 1:].ravel()
        xu, xi = state0.e_users[ru], state0.e_items[ri]
        loss += l2_lambda * float(np.sum(xu * xu) + np.sum(xi * xi))
        np.add.at(grad_u, ru, 2.0 * l2_lambda * xu)
        np.add.at(grad_i, ri, 2.0 * l2_lambda * xi)
    return loss, EmbeddingState(grad_u, grad_i)


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m_users: np.ndarray
    m_items: np.ndarray
    v_users: np.ndarray
    v_items: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, state: EmbeddingState) -> "AdamState":
        return cls(np.zeros_like(state.e_users), np.zeros_like(state.e_items),
                   np.zeros_like(state.e_users), np.zeros_like(state.e_items))


def _adam_block(param, grad, m, v, t, cfg: TrainConfig):
    m *= cfg.adam_beta1
    m += (1.0 - cfg.adam_beta1) * grad
    v *= cfg.adam_beta2
    v += (1.0 - cfg.adam_beta2) * grad * grad
    m_hat = m / (1.0 - cfg.adam_beta1 ** t)
    v_hat = v / (1.0 - cfg.adam_beta2 ** t)
    return param - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def grad_step(state0: EmbeddingState, g: GraphInputs, cfg: ModelConfig, batch: np.ndarray,
              adam: AdamState, tcfg: TrainConfig) -> tuple[EmbeddingState, AdamState, float]:
    """One Adam step on a batch. ``adam`` is updated in place and returned.

    An empty batch with ``l2_lambda == 0`` is a no-op.
    """
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0 and tcfg.l2_lambda == 0:
        return state0, adam, 0.0
    loss, grad = bpr_objective(state0, g, cfg, batch, tcfg.l2_lambda)
    if not (np.isfinite(loss) and np.all(np.isfinite(grad.e_users)) and np.all(np.isfinite(grad.e_items))):
        raise TrainingError(f"non-finite loss or gradient at Adam step {adam.t + 1} (loss={loss})")
    adam.t += 1
    e_u = _adam_block(state0.e_users, grad.e_users, adam.m_users, adam.v_users, adam.t, tcfg)
    e_i = _adam_block(state0.e_items, grad.e_items, adam.m_items, adam.v_items, adam.t, tcfg)
    return EmbeddingState(e_u, e_i), adam, loss


# ---------------------------------------------------------------- training loop

@dataclass
class TrainHistory:
    records: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    epochs_to_best: int = 0
    best_recall: float = float("-inf")

    CSV_HEADER = "epoch,loss,recall20,precision20,ndcg20"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        lines += [f"{e},{l!r},{r!r},{p!r},{n!r}" for e, l, r, p, n in self.records]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), encoding="ascii")

    @property
    def mean_epoch_seconds(self) -> float:
        return float(np.mean(self.epoch_seconds)) if self.epoch_seconds else 0.0


def train(dataset: Dataset, g: GraphInputs, model_cfg: ModelConfig, train_cfg: TrainConfig,
          state0: Optional[EmbeddingState] = None,
          on_eval: Optional[Callable[[int, float, MetricsReport], None]] = None,
          ) -> tuple[EmbeddingState, TrainHistory]:
    """Train with early stopping on test recall@k; returns the best-recall input embeddings.

    Evaluation runs every ``eval_every`` epochs and after the last epoch.
    Training stops after ``patience`` consecutive evaluations without a
    recall improvement.
    """
    if state0 is None:
        state0 = init_embeddings(dataset.n_users, dataset.n_items, model_cfg,
                                 rng=derive_rng(model_cfg.seed, "init"))
    history = TrainHistory()
    if train_cfg.max_epochs <= 0:
        return state0, history

    rng = derive_rng(train_cfg.seed, "sampling")
    pairs = np.array(dataset.train, dtype=np.int64).reshape(-1, 2)
    adam = AdamState.zeros_like(state0)
    state = state0
    best = state0
    stale = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        tic = time.perf_counter()
        triples = sample_epoch(pairs, dataset.n_items, rng)
        total = 0.0
        for start in range(0, len(triples), train_cfg.batch_size):
            state, adam, loss = grad_step(state, g, model_cfg,
                                          triples[start:start + train_cfg.batch_size], adam, train_cfg)
            total += loss
        mean_loss = total / max(len(triples), 1)
        history.epoch_losses.append(mean_loss)
        history.epoch_seconds.append(time.perf_counter() - tic)

        if epoch % train_cfg.eval_every and epoch != train_cfg.max_epochs:
            continue
        report = evaluate_all(forward_final(state, g, model_cfg), dataset, k=train_cfg.eval_k)
        history.records.append((epoch, mean_loss, report.recall, report.precision, report.ndcg))
        if on_eval is not None:
            on_eval(epoch, mean_loss, report)
        logger.info("epoch %d loss %.5f recall@%d %.4f", epoch, mean_loss, train_cfg.eval_k, report.recall)
        if report.recall > history.best_recall:
            history.best_recall = report.recall
            history.epochs_to_best = epoch
            best = state.copy()
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break
    return best, history


# ---------------------------------------------------------------- gradient verification

def finite_diff_check(g: GraphInputs, model_cfg: ModelConfig, eps: float = 1e-4,
                      batch: Optional[np.ndarray] = None, l2_lambda: float = 0.0,
                      state0: Optional[EmbeddingState] = None, full_reg: bool = False,
                      seed: int = 0) -> float:
    """Max relative error between the analytic gradient and central differences.

    Every coordinate of the input embeddings is perturbed. Relative error is
    ``|a - n| / max(|a|, |n|, 1e-6)``. Without ``batch`` one triple per
    training pair is drawn.
    """
    n, m = g.n_users, g.n_items
    if state0 is None:
        state0 = init_embeddings(n, m, model_cfg, rng=derive_rng(seed, "init"))
    if batch is None:
        r = g.r_norm
        pairs = np.stack([r.row_indices(), r.col_indices], axis=1)
        batch = sample_epoch(pairs, m, derive_rng(seed, "sampling"))

    def loss_at(x: np.ndarray) -> float:
        return bpr_objective(EmbeddingState.from_stacked(x, n), g, model_cfg, batch,
                             l2_lambda, full_reg)[0]

    _, grad = bpr_objective(state0, g, model_cfg, batch, l2_lambda, full_reg)
    analytic = grad.stacked()
    x = state0.stacked()
    numeric = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        up = loss_at(x)
        x[idx] = orig - eps
        down = loss_at(x)
        x[idx] = orig
        numeric[idx] = (up - down) / (2.0 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))
