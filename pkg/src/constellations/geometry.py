"""Core data types for paired spherical embeddings and their Gram statistics.

Everything here is a pure function of its inputs; the dataclasses are frozen
views over numpy arrays and all constructors renormalize rows onto the unit
sphere (tolerance ``UNIT_TOL``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidQuantile, SolverFailure, ZeroVector

UNIT_TOL = 1e-9
_ZERO_NORM = 1e-15


@dataclass(frozen=True)
class EmbeddingSet:
    """N unit vectors in R^d, stored row-major."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionMismatch(f"expected a nonempty 2-D array, got shape {v.shape}")
        object.__setattr__(self, "vectors", v)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return bool(np.all(np.abs(self.row_norms() - 1.0) <= tol))


def renormalize(embedding_set: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit norm, preserving direction.

    Raises ZeroVector for rows with norm below 1e-15.
    """
    v = embedding_set.vectors
    norms = np.linalg.norm(v, axis=1)
    bad = np.nonzero(norms < _ZERO_NORM)[0]
    if bad.size:
        raise ZeroVector(int(bad[0]))
    return EmbeddingSet(v / norms[:, None])


def unit_rows(vectors: np.ndarray) -> EmbeddingSet:
    """Convenience constructor: wrap and renormalize a raw matrix."""
    return renormalize(EmbeddingSet(np.asarray(vectors, dtype=np.float64)))


@dataclass(frozen=True)
class PairedConfig:
    """Paired embeddings {(U_i, V_i)} of two modalities; same shape on both sides."""

    u: EmbeddingSet
    v: EmbeddingSet

    def __post_init__(self):
        if self.u.dim != self.v.dim or self.u.count != self.v.count:
            raise DimensionMismatch(
                f"u is {self.u.count}x{self.u.dim}, v is {self.v.count}x{self.v.dim}"
            )

    @property
    def count(self) -> int:
        return self.u.count

    @property
    def dim(self) -> int:
        return self.u.dim

    def gram(self) -> np.ndarray:
        """Full N x N matrix of inner products <U_i, V_j>."""
        return self.u.vectors @ self.v.vectors.T


@dataclass(frozen=True)
class ConstellationParams:
    """Margin / relative-bias pair describing a separation target."""

    margin: float
    rel_bias: float

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if abs(self.rel_bias) > 1:
            raise ValueError(f"|rel_bias| must be <= 1, got {self.rel_bias}")


@dataclass(frozen=True)
class GramStats:
    """Extremal and mean statistics of the paired Gram matrix.

    Negative-pair fields are None when N == 1 (no off-diagonal entries).
    opt_margin and opt_rel_bias are the half-difference / midpoint of the
    worst positive and best negative inner products.
    """

    min_pos: float
    max_pos: float
    mean_pos: float
    min_neg: Optional[float]
    max_neg: Optional[float]
    mean_neg: Optional[float]
    opt_margin: Optional[float]
    opt_rel_bias: Optional[float]
    separated: Optional[bool]


def _stats_from_extremes(pos: np.ndarray, neg: Optional[np.ndarray],
                         min_pos: float, max_neg: Optional[float]) -> GramStats:
    if neg is None:
        return GramStats(
            min_pos=min_pos,
            max_pos=float(pos.max()),
            mean_pos=float(pos.mean()),
            min_neg=None, max_neg=None, mean_neg=None,
            opt_margin=None, opt_rel_bias=None, separated=None,
        )
    m = 0.5 * (min_pos - max_neg)
    b = 0.5 * (min_pos + max_neg)
    return GramStats(
        min_pos=min_pos,
        max_pos=float(pos.max()),
        mean_pos=float(pos.mean()),
        min_neg=float(neg.min()),
        max_neg=max_neg,
        mean_neg=float(neg.mean()),
        opt_margin=m,
        opt_rel_bias=b,
        separated=bool(m >= 0),
    )


def _pos_neg(pair: PairedConfig):
    g = pair.gram()
    pos = np.diagonal(g).copy()
    n = pair.count
    if n == 1:
        return pos, None
    off = ~np.eye(n, dtype=bool)
    return pos, g[off]


def gram_stats(pair: PairedConfig) -> GramStats:
    """Extremal/mean Gram statistics plus the optimal (m*, b_rel*)."""
    pos, neg = _pos_neg(pair)
    if neg is None:
        return _stats_from_extremes(pos, None, float(pos.min()), None)
    return _stats_from_extremes(pos, neg, float(pos.min()), float(neg.max()))


def _lower_quantile(sorted_values: np.ndarray, q: float) -> float:
    # lower interpolation: index = floor(q * (len - 1))
    idx = int(np.floor(q * (len(sorted_values) - 1)))
    return float(sorted_values[idx])


def trimmed_stats(pair: PairedConfig, q_pos: float, q_neg: float) -> GramStats:
    """As gram_stats, but with the worst positive replaced by its q_pos-quantile
    and the best negative by the (1 - q_neg)-quantile (lower interpolation)."""
    if not (0 <= q_pos < 0.5) or not (0 <= q_neg < 0.5):
        raise InvalidQuantile(f"quantiles must lie in [0, 0.5), got {q_pos}, {q_neg}")
    pos, neg = _pos_neg(pair)
    pos_sorted = np.sort(pos)
    min_pos = _lower_quantile(pos_sorted, q_pos)
    if neg is None:
        return _stats_from_extremes(pos, None, min_pos, None)
    neg_sorted = np.sort(neg)
    max_neg = _lower_quantile(neg_sorted, 1.0 - q_neg)
    return _stats_from_extremes(pos, neg, min_pos, max_neg)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking the defining margin / relative-bias inequalities."""

    passed: bool
    # (i, i) entries are positive-pair violations, (i, j) with i != j negative ones.
    violations: list = field(default_factory=list)  # [(i, j, slack), ...], slack < 0

    def __bool__(self) -> bool:
        return self.passed


def validate_constellation(pair: PairedConfig, params: ConstellationParams,
                           tol: float = UNIT_TOL) -> ValidationReport:
    """Check <U_i,V_i> >= m + b_rel - tol and <U_i,V_j> <= -m + b_rel + tol."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    g = pair.gram()
    n = pair.count
    m, b = params.margin, params.rel_bias
    violations = []
    pos_slack = np.diagonal(g) - (m + b)
    for i in np.nonzero(pos_slack < -tol)[0]:
        violations.append((int(i), int(i), float(pos_slack[i])))
    if n > 1:
        neg_slack = (-m + b) - g
        np.fill_diagonal(neg_slack, np.inf)
        for i, j in zip(*np.nonzero(neg_slack < -tol)):
            violations.append((int(i), int(j), float(neg_slack[i, j])))
    return ValidationReport(passed=not violations, violations=violations)


@dataclass(frozen=True)
class XiReport:
    """Variance diagnostic of the difference vectors x_i = U_i - V_i.

    xi == mean_of_norms - norm_of_mean == (1/N) sum ||x_i - xbar||^2.
    A vanishing xi means a single shift vector maps V onto U.
    """

    xi: float
    mean_of_norms: float
    norm_of_mean: float
    random_baseline: float
    deviation: float


def xi_report(pair: PairedConfig, seed: int = 0) -> XiReport:
    if pair.count < 2:
        raise DimensionMismatch("xi_report needs N >= 2")
    x = pair.u.vectors - pair.v.vectors
    xbar = x.mean(axis=0)
    mean_of_norms = float(np.mean(np.sum(x * x, axis=1)))
    norm_of_mean = float(xbar @ xbar)
    deviation = float(np.mean(np.sum((x - xbar) ** 2, axis=1)))
    perm = np.random.default_rng(seed).permutation(pair.count)
    xr = pair.u.vectors - pair.v.vectors[perm]
    random_baseline = float(np.mean(np.sum(xr * xr, axis=1)))
    return XiReport(
        xi=mean_of_norms - norm_of_mean,
        mean_of_norms=mean_of_norms,
        norm_of_mean=norm_of_mean,
        random_baseline=random_baseline,
        deviation=deviation,
    )


def cone_membership(embedding_set: EmbeddingSet, i: int, tol: float = 1e-8) -> bool:
    """Whether row i lies within distance tol of the convex cone of the others.

    Solved as nonnegative least squares min ||U_i - sum_j a_j U_j||, a >= 0.
    """
    from scipy.optimize import nnls

    if embedding_set.count < 2:
        raise DimensionMismatch("cone_membership needs N >= 2")
    v = embedding_set.vectors
    others = np.delete(v, i, axis=0)
    try:
        _, residual = nnls(others.T, v[i])
    except RuntimeError as exc:  # scipy raises on iteration exhaustion
        raise SolverFailure(str(exc)) from exc
    return bool(residual <= tol)
