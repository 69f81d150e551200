"""Sigmoid, relative-bias, InfoNCE, and triplet losses over paired embeddings.

All sums use numerically stable softplus / log-sum-exp so that inverse
temperatures in the hundreds do not overflow. Hand-derived gradients for
the two sigmoid parameterizations live here as well; the optimizer module
consumes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import BadEdge, InvalidBatch, NonPositiveTemperature
from .geometry import PairedConfig


class Parameterization(Enum):
    BIAS = "bias"
    REL_BIAS = "rel_bias"


@dataclass(frozen=True)
class LossParams:
    inv_temp: float
    bias: float = 0.0
    rel_bias: float = 0.0
    parameterization: Parameterization = Parameterization.BIAS

    def __post_init__(self):
        if self.inv_temp <= 0:
            raise NonPositiveTemperature(f"inv_temp must be > 0, got {self.inv_temp}")


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)), stable for large |x|."""
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_temp(t: float):
    if t <= 0:
        raise NonPositiveTemperature(f"inverse temperature must be > 0, got {t}")


def _term_matrix(gram: np.ndarray, t: float, b: float) -> np.ndarray:
    """Per-entry softplus terms: diagonal uses -t*g + b, off-diagonal t*g - b."""
    z = t * gram - b
    np.fill_diagonal(z, -np.diagonal(z))
    return softplus(z)


def sigmoid_loss(pair: PairedConfig, t: float, b: float) -> float:
    """Sum of softplus(-t<U_i,V_i> + b) plus softplus(t<U_i,V_j> - b), i != j."""
    _check_temp(t)
    return float(np.sum(_term_matrix(pair.gram(), t, b)))


def rb_sigmoid_loss(pair: PairedConfig, t: float, b_rel: float) -> float:
    """Relative-bias parameterization: identical to sigmoid_loss with b = b_rel * t."""
    _check_temp(t)
    return sigmoid_loss(pair, t, b_rel * t)


def sigmoid_loss_grads(u: np.ndarray, v: np.ndarray, t: float, b: float):
    """Loss and analytic gradients w.r.t. (U, V, t, b).

    Returns (loss, dU, dV, dt, db).
    """
    _check_temp(t)
    gram = u @ v.T
    z = t * gram - b
    np.fill_diagonal(z, -np.diagonal(z))
    loss = float(np.sum(softplus(z)))
    sig = _sigmoid(z)
    # dL/dgram: +t*sig off-diagonal, -t*sig on the diagonal
    w = t * sig
    diag = np.diagonal(w).copy()
    np.fill_diagonal(w, -diag)
    du = w @ v
    dv = w.T @ u
    # dL/dt keeps the sign pattern of z's dependence on t
    gsign = gram.copy()
    np.fill_diagonal(gsign, -np.diagonal(gsign))
    dt = float(np.sum(sig * gsign))
    db = float(np.sum(np.diagonal(sig)) - (np.sum(sig) - np.sum(np.diagonal(sig))))
    return loss, du, dv, dt, db


def rb_sigmoid_loss_grads(u: np.ndarray, v: np.ndarray, t: float, b_rel: float):
    """Loss and gradients w.r.t. (U, V, t, b_rel) for the relative-bias form."""
    loss, du, dv, dt, db = sigmoid_loss_grads(u, v, t, b_rel * t)
    # b = b_rel * t: chain rule folds db into both dt and db_rel
    return loss, du, dv, dt + b_rel * db, t * db


def infonce_loss(pair: PairedConfig, t: float) -> float:
    """Symmetric InfoNCE with log-sum-exp stabilization."""
    _check_temp(t)
    logits = t * pair.gram()
    diag = np.diagonal(logits)
    row_lse = np.logaddexp.reduce(logits, axis=1)
    col_lse = np.logaddexp.reduce(logits, axis=0)
    n = pair.count
    return float(np.sum(row_lse - diag) / n + np.sum(col_lse - diag) / n)


def triplet_loss(pair: PairedConfig, alpha: float) -> float:
    """Hinge over ||U_i - V_i||^2 - ||U_i - V_j||^2 + alpha for i != j."""
    g = pair.gram()
    # ||U_i - V_j||^2 = 2 - 2 <U_i, V_j> on the sphere
    margins = 2.0 * (g - np.diagonal(g)[:, None]) + alpha
    np.fill_diagonal(margins, 0.0)
    return float(np.sum(np.maximum(margins, 0.0)))


def loss_sandwich(pair: PairedConfig, t: float, b: float):
    """(lower, upper) with lower = max single softplus term, upper = N^2 * lower."""
    _check_temp(t)
    terms = _term_matrix(pair.gram(), t, b)
    top = float(terms.max())
    n = pair.count
    return top, n * n * top


class BatchMethod(Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


def batch_expected_sigmoid_loss(pair: PairedConfig, t: float, b: float, batch: int,
                                method: BatchMethod = BatchMethod.EXACT,
                                samples: int = 10000, seed: int = 0) -> float:
    """Expected sigmoid loss of a uniform batch of `batch` distinct indices.

    Exact mode uses linearity of expectation: each positive term appears with
    probability B/N and each ordered negative with B(B-1)/(N(N-1)).
    """
    _check_temp(t)
    n = pair.count
    if batch < 2 or batch > n:
        raise InvalidBatch(f"batch must satisfy 2 <= B <= N, got B={batch}, N={n}")
    terms = _term_matrix(pair.gram(), t, b)
    pos_sum = float(np.sum(np.diagonal(terms)))
    neg_sum = float(np.sum(terms)) - pos_sum
    if method is BatchMethod.EXACT:
        return (batch / n) * pos_sum + (batch * (batch - 1)) / (n * (n - 1)) * neg_sum
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(samples):
        idx = rng.choice(n, size=batch, replace=False)
        sub = terms[np.ix_(idx, idx)]
        total += float(np.sum(sub))
    return total / samples


def multimodal_loss(sets, edges, t: float, b_rel: float, double_edges: bool = False) -> float:
    """Sum of pairwise relative-bias losses over the synchronization graph.

    `sets` is a sequence of k same-shape embedding matrices (or EmbeddingSets);
    each undirected edge (j1, j2) contributes one term with j1 as U and j2 as V.
    The pairwise loss already contains both orderings of the negatives, so a
    single term per edge matches the symmetric intent; set double_edges to add
    the reversed orientation too.
    """
    _check_temp(t)
    mats = [s.vectors if hasattr(s, "vectors") else np.asarray(s, dtype=np.float64) for s in sets]
    k = len(mats)
    total = 0.0
    for j1, j2 in edges:
        if j1 == j2 or not (0 <= j1 < k) or not (0 <= j2 < k):
            raise BadEdge(f"edge ({j1}, {j2}) invalid for {k} modalities")
        pairs = [(j1, j2)] if not double_edges else [(j1, j2), (j2, j1)]
        for a, bb in pairs:
            g = mats[a] @ mats[bb].T
            z = t * (g - b_rel)
            np.fill_diagonal(z, -np.diagonal(z))
            total += float(np.sum(softplus(z)))
    return total
