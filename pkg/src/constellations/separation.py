"""Linear separability of the two modalities and the constructive gap
certificate: positive functional, hull projection, Carathéodory reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    Infeasible,
    NumericalDegeneracy,
    PreconditionViolated,
    SolverFailure,
)
from .geometry import EmbeddingSet, PairedConfig

STRICT_TOL = 1e-10


@dataclass(frozen=True)
class SeparationResult:
    """Certificate h with all U strictly positive and V negative outside a
    small support set (at most d indices)."""

    h: np.ndarray
    support: tuple
    u_margin: float
    v_violations: tuple

    def __post_init__(self):
        if self.u_margin <= 0:
            raise ValueError(f"certificate must have positive u_margin, got {self.u_margin}")
        if not set(self.v_violations) <= set(self.support):
            raise ValueError("v_violations must be contained in the support set")


def perceptron_separator(u: EmbeddingSet, v: EmbeddingSet, max_epochs: int = 1000):
    """Classic no-bias perceptron on labels U:+1, V:-1.

    Returns a unit vector with strict signs on every row, or None when no
    mistake-free pass happens within max_epochs.
    """
    data = np.vstack([u.vectors, v.vectors])
    labels = np.concatenate([np.ones(u.count), -np.ones(v.count)])
    h = np.zeros(u.dim)
    for _ in range(max_epochs):
        mistakes = 0
        for x, y in zip(data, labels):
            if y * (h @ x) <= 0:
                h += y * x
                mistakes += 1
        if mistakes == 0:
            h /= np.linalg.norm(h)
            if np.all(u.vectors @ h > 0) and np.all(v.vectors @ h < 0):
                return h
    return None


def positive_functional(u: EmbeddingSet, max_epochs: int = 1000) -> np.ndarray:
    """Unit h0 with <h0, U_i> > 0 for all i.

    Mistake-driven perceptron first; exact linear program as fallback.
    Raises Infeasible when no open half-space contains all rows.
    """
    mat = u.vectors
    h = mat.mean(axis=0)
    for _ in range(max_epochs):
        scores = mat @ h
        bad = np.nonzero(scores <= 0)[0]
        if bad.size == 0:
            h = h / np.linalg.norm(h)
            if np.all(mat @ h > 0):
                return h
        else:
            h = h + mat[bad[0]]
    # LP fallback: maximize s subject to <h, U_i> >= s, |h_j| <= 1
    from scipy.optimize import linprog

    d = u.dim
    # variables (h, s); minimize -s
    c = np.zeros(d + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-mat, np.ones((u.count, 1))])
    b_ub = np.zeros(u.count)
    bounds = [(-1, 1)] * d + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success or res.x[-1] <= STRICT_TOL:
        raise Infeasible("no strictly positive functional exists for the given rows")
    h = res.x[:d]
    h /= np.linalg.norm(h)
    if not np.all(mat @ h > 0):
        raise Infeasible("functional found by LP fails strict verification")
    return h


def project_to_hull(point: np.ndarray, embedding_set: EmbeddingSet, tol: float = 1e-6,
                    max_iters: int = 200000):
    """Euclidean projection of `point` onto the convex hull of the rows.

    Frank-Wolfe with away steps and exact line search on the quadratic
    objective; stops when the duality gap drops below tol^2. Returns
    (projection, weights) with weights a convex combination reproducing the
    projection within tol.
    """
    mat = embedding_set.vectors
    p = np.asarray(point, dtype=np.float64)
    n = mat.shape[0]
    lam = np.zeros(n)
    lam[0] = 1.0
    x = mat[0].copy()
    for _ in range(max_iters):
        grad = mat @ (x - p)
        s = int(np.argmin(grad))
        gap = float(lam @ grad - grad[s])
        if gap <= tol * tol:
            return x, lam
        active = np.nonzero(lam > 0)[0]
        a = int(active[np.argmax(grad[active])])
        fw_gain = lam @ grad - grad[s]
        away_gain = grad[a] - lam @ grad
        if fw_gain >= away_gain:
            direction = mat[s] - x
            gamma_max = 1.0
            toward, away_from = s, None
        else:
            direction = x - mat[a]
            gamma_max = lam[a] / (1.0 - lam[a]) if lam[a] < 1.0 else 1.0
            toward, away_from = None, a
        denom = float(direction @ direction)
        if denom <= 0:
            return x, lam
        gamma = float(np.clip(-((x - p) @ direction) / denom, 0.0, gamma_max))
        if gamma == 0.0:
            return x, lam
        if toward is not None:
            lam *= 1.0 - gamma
            lam[toward] += gamma
        else:
            lam *= 1.0 + gamma
            lam[away_from] -= gamma
            lam[away_from] = max(lam[away_from], 0.0)
        lam = np.maximum(lam, 0.0)
        lam /= lam.sum()
        x = lam @ mat
    raise SolverFailure(f"hull projection did not reach gap {tol**2} in {max_iters} iterations")


_COND_LIMIT = 1e10


def caratheodory_reduce(weights: np.ndarray, points: EmbeddingSet, target_point: np.ndarray,
                        max_support: int | None = None) -> np.ndarray:
    """Shrink the support of a convex combination without moving its barycenter.

    Points must lie on a common affine hyperplane, so at most d of them are
    affinely independent; the loop removes one support index per affine
    dependence until the support size is at most d (or max_support).
    """
    lam = np.asarray(weights, dtype=np.float64).copy()
    mat = points.vectors
    d = points.dim
    target = np.asarray(target_point, dtype=np.float64)
    if np.linalg.norm(lam @ mat - target) > 1e-8:
        raise PreconditionViolated("weights do not reproduce the target point")
    cap = d if max_support is None else max_support
    while True:
        support = np.nonzero(lam > 1e-14)[0]
        if support.size <= cap:
            break
        sub = mat[support]
        # rows of the affine system: coordinates plus the sum-to-zero constraint
        system = np.vstack([sub.T, np.ones(support.size)])
        _, sv, vt = np.linalg.svd(system)
        c = vt[-1]
        # a usable dependence needs the smallest singular value to vanish
        # relative to the largest; 1/_COND_LIMIT is the cutoff
        if sv.size >= support.size and sv[-1] > sv[0] / _COND_LIMIT:
            raise NumericalDegeneracy("no usable affine dependence among support points")
        if np.linalg.norm(system @ c) > 1e-6:
            raise NumericalDegeneracy("affine dependence residual too large")
        if not np.any(c > 0):
            c = -c
        ratios = np.where(c > 1e-14, lam[support] / np.where(c > 1e-14, c, 1.0), np.inf)
        k = int(np.argmin(ratios))
        theta = ratios[k]
        new_sub = lam[support] - theta * c
        new_sub[k] = 0.0
        new_sub = np.maximum(new_sub, 0.0)
        lam[support] = new_sub
        lam /= lam.sum()
    if np.linalg.norm(lam @ mat - target) > 1e-6:
        raise NumericalDegeneracy("reduced combination drifted from the target point")
    return lam


def _sign_pattern_ok(pair: PairedConfig) -> bool:
    g = pair.gram()
    diag = np.diagonal(g)
    off = g.copy()
    np.fill_diagonal(off, -np.inf)
    return bool(np.all(diag > STRICT_TOL) and np.all(off < -STRICT_TOL))


def modality_gap_certificate(pair: PairedConfig) -> SeparationResult:
    """Unit h with <h, U_i> > 0 for all i and <h, V_j> < 0 outside at most d
    indices.

    Steps: verify the strict sign pattern, certify an open half-space around
    U, take the minimum-norm point h of conv(U) (its optimality condition
    gives <U_i, h> >= |h|^2 > 0), rescale the rows to the hyperplane
    <h, q> = 1, reduce the convex combination representing h/|h|^2 to at most
    d points, and read the support off the surviving weights. All
    postconditions are re-verified by direct inner products.
    """
    n, d = pair.count, pair.dim
    if n < d + 2:
        raise PreconditionViolated(f"need N >= d + 2, got N={n}, d={d}")
    if not _sign_pattern_ok(pair):
        raise PreconditionViolated("strict sign pattern fails (some <U_i,V_i> <= 0 "
                                   "or <U_i,V_j> >= 0 for i != j)")
    positive_functional(pair.u)  # raises Infeasible when the hypotheses fail
    h, mu = project_to_hull(np.zeros(d), pair.u, tol=1e-7)
    hn2 = float(h @ h)
    if hn2 <= STRICT_TOL:
        raise Infeasible("origin lies in conv(U); no separating functional")
    dots = pair.u.vectors @ h
    if np.any(dots <= STRICT_TOL):
        raise SolverFailure("hull projection violated its optimality condition")
    q = pair.u.vectors / dots[:, None]
    lam = mu * dots / hn2
    lam = np.maximum(lam, 0.0)
    lam /= lam.sum()
    lam = caratheodory_reduce(lam, EmbeddingSet(q), h / hn2)
    support = tuple(int(i) for i in np.nonzero(lam > 1e-14)[0])
    h_unit = h / np.linalg.norm(h)
    u_scores = pair.u.vectors @ h_unit
    v_scores = pair.v.vectors @ h_unit
    u_margin = float(u_scores.min())
    if u_margin <= STRICT_TOL:
        raise SolverFailure("certificate fails strict positivity on U")
    violations = tuple(int(j) for j in np.nonzero(v_scores >= -STRICT_TOL)[0])
    if not set(violations) <= set(support):
        raise SolverFailure("a V row outside the support is not strictly negative")
    return SeparationResult(h=h_unit, support=support, u_margin=u_margin,
                            v_violations=violations)
