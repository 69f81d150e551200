"""Explicit configuration builders: spherical codes, lifts, adapters, and the
hard-to-separate counterexample used to probe the separation machinery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstructionFailure,
    InfeasibleParams,
    InvalidDelta,
    InvalidK,
    InvalidLift,
    NonUnitW,
    TargetUnreachable,
)
from .geometry import (
    ConstellationParams,
    EmbeddingSet,
    PairedConfig,
    unit_rows,
    validate_constellation,
)

_CERT_TOL = 1e-9


@dataclass(frozen=True)
class SphericalCode:
    """Unit vectors with certified pairwise inner products <= alpha."""

    points: EmbeddingSet
    alpha: float

    def __post_init__(self):
        g = self.points.vectors @ self.points.vectors.T
        np.fill_diagonal(g, -np.inf)
        if self.points.count > 1 and g.max() > self.alpha + _CERT_TOL:
            raise ConstructionFailure(
                f"pairwise inner product {g.max():.6g} exceeds certified alpha {self.alpha}"
            )


@dataclass(frozen=True)
class LiftParams:
    delta: float
    phi: float

    def __post_init__(self):
        if not (0 <= self.delta <= 1) or not (0 <= self.phi <= 1):
            raise InvalidLift(f"delta, phi must lie in [0, 1], got {self.delta}, {self.phi}")
        if self.delta ** 2 + self.phi ** 2 > 1 + 1e-12:
            raise InvalidLift(f"delta^2 + phi^2 = {self.delta**2 + self.phi**2} > 1")


@dataclass(frozen=True)
class MultiModalConfig:
    """k same-shape embedding sets, one per modality."""

    sets: tuple

    def __post_init__(self):
        if len(self.sets) < 2:
            raise InvalidK("need at least 2 modalities")
        d0, n0 = self.sets[0].dim, self.sets[0].count
        for s in self.sets[1:]:
            if s.dim != d0 or s.count != n0:
                raise InvalidK("all modalities must share (N, d)")
        object.__setattr__(self, "sets", tuple(self.sets))

    @property
    def k(self) -> int:
        return len(self.sets)

    def pair(self, j1: int, j2: int) -> PairedConfig:
        return PairedConfig(self.sets[j1], self.sets[j2])


@dataclass(frozen=True)
class SynchronizationGraph:
    k: int
    edges: tuple

    def __post_init__(self):
        seen = set()
        for j1, j2 in self.edges:
            if j1 == j2 or not (0 <= j1 < self.k) or not (0 <= j2 < self.k):
                raise InvalidK(f"bad edge ({j1}, {j2}) for k={self.k}")
            seen.add((min(j1, j2), max(j1, j2)))
        object.__setattr__(self, "edges", tuple(self.edges))

    @staticmethod
    def complete(k: int) -> "SynchronizationGraph":
        return SynchronizationGraph(k, tuple((a, b) for a in range(k) for b in range(a + 1, k)))

    @staticmethod
    def star(k: int, center: int = 0) -> "SynchronizationGraph":
        return SynchronizationGraph(k, tuple((center, j) for j in range(k) if j != center))


def simplex(k: int, ambient_dim: int | None = None) -> EmbeddingSet:
    """k unit vectors in R^{k-1} with pairwise inner products -1/(k-1).

    Zero-padded to ambient_dim when requested.
    """
    if k < 2:
        raise InvalidK(f"simplex needs k >= 2, got {k}")
    centered = np.eye(k) - 1.0 / k
    # rows live in the hyperplane orthogonal to the all-ones vector; express
    # them in an orthonormal basis of that hyperplane to land in R^{k-1}
    _, s, vt = np.linalg.svd(centered)
    basis = vt[: k - 1]
    coords = centered @ basis.T
    coords /= np.linalg.norm(coords, axis=1)[:, None]
    d = k - 1 if ambient_dim is None else ambient_dim
    if d < k - 1:
        raise InvalidK(f"ambient_dim {d} < k-1 = {k - 1}")
    out = np.zeros((k, d))
    out[:, : k - 1] = coords
    return unit_rows(out)


def greedy_spherical_code(d: int, alpha: float, target_n: int, seed: int = 0,
                          max_tries: int = 200000) -> SphericalCode:
    """Sample a (d, alpha)-code of size target_n by greedy rejection.

    Seeded deterministically. Starts from an orthonormal basis when alpha >= 0
    (or a simplex when a simplex fits the bound), then extends with uniform
    sphere samples kept only when compatible with everything accepted so far.
    Raises TargetUnreachable (with the partial code attached) on budget
    exhaustion.
    """
    if d < 1 or not (-1 <= alpha < 1) or target_n < 1:
        raise InfeasibleParams(f"bad code request d={d}, alpha={alpha}, n={target_n}")
    kept: list[np.ndarray] = []
    if alpha >= 0:
        for i in range(min(d, target_n)):
            e = np.zeros(d)
            e[i] = 1.0
            kept.append(e)
    elif target_n <= d + 1 and alpha >= -1.0 / (target_n - 1) - 1e-12:
        pts = simplex(target_n, ambient_dim=d).vectors
        return SphericalCode(EmbeddingSet(pts), alpha)
    rng = np.random.default_rng(seed)
    tries = 0
    while len(kept) < target_n and tries < max_tries:
        tries += 1
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        if not kept or np.max(np.stack(kept) @ x) <= alpha:
            kept.append(x)
    code_points = EmbeddingSet(np.stack(kept)) if kept else None
    if len(kept) < target_n:
        partial = SphericalCode(code_points, alpha) if kept else None
        raise TargetUnreachable(len(kept), partial)
    return SphericalCode(code_points, alpha)


def code_as_constellation(code: SphericalCode):
    """U = V = code points; margin (1-alpha)/2, relative bias (1+alpha)/2."""
    pts = code.points
    pair = PairedConfig(pts, pts)
    params = ConstellationParams(margin=(1 - code.alpha) / 2, rel_bias=(1 + code.alpha) / 2)
    return pair, params


def lift_constellation(pair: PairedConfig, params: ConstellationParams, lift: LiftParams):
    """Append (phi, +/-sqrt(1 - delta^2 - phi^2)) coordinates to both sides.

    New params: m' = delta^2 m, b_rel' = delta^2 b_rel + phi^2 - (1 - delta^2 - phi^2).
    """
    delta, phi = lift.delta, lift.phi
    rest = 1.0 - delta ** 2 - phi ** 2
    last = np.sqrt(max(rest, 0.0))
    n = pair.count
    u = np.hstack([delta * pair.u.vectors, np.full((n, 1), phi), np.full((n, 1), last)])
    v = np.hstack([delta * pair.v.vectors, np.full((n, 1), phi), np.full((n, 1), -last)])
    out = PairedConfig(unit_rows(u), unit_rows(v))
    new_params = ConstellationParams(
        margin=delta ** 2 * params.margin,
        rel_bias=delta ** 2 * params.rel_bias + phi ** 2 - rest,
    )
    return out, new_params


def build_constellation(d: int, m: float, b_rel: float, target_n: int, seed: int = 0,
                        max_tries: int = 200000):
    """Constellation with exactly the requested (m, b_rel), via a spherical code.

    Sets alpha = (1 + b_rel - 3m) / (1 + b_rel + m), builds a (d-2, alpha)-code,
    then lifts with delta^2 = 2m / (1 - alpha) and
    phi^2 = (2 b_rel + 2 - delta^2 (3 + alpha)) / 4.
    """
    if d < 3:
        raise InfeasibleParams(f"need d >= 3, got {d}")
    if m <= 0 or m + b_rel >= 1 or 3 * m >= 1 + b_rel:
        raise InfeasibleParams(
            f"(m, b_rel) = ({m}, {b_rel}) outside the strict feasible interior"
        )
    alpha = (1 + b_rel - 3 * m) / (1 + b_rel + m)
    delta_sq = 2 * m / (1 - alpha)
    phi_sq = (2 * b_rel + 2 - delta_sq * (3 + alpha)) / 4
    if phi_sq < -1e-12 or delta_sq + phi_sq > 1 + 1e-12:
        raise InfeasibleParams(
            f"derived lift parameters out of range: delta^2={delta_sq}, phi^2={phi_sq}"
        )
    phi_sq = max(phi_sq, 0.0)
    code = greedy_spherical_code(d - 2, alpha, target_n, seed=seed, max_tries=max_tries)
    base_pair, base_params = code_as_constellation(code)
    lift = LiftParams(delta=np.sqrt(delta_sq), phi=np.sqrt(phi_sq))
    out, out_params = lift_constellation(base_pair, base_params, lift)
    # report the requested params exactly; the lift reproduces them up to rounding
    exact = ConstellationParams(margin=m, rel_bias=b_rel)
    if not validate_constellation(out, exact, tol=1e-9):
        raise ConstructionFailure("constructed configuration failed validation")
    return out, exact


def multimodal_constellation(code: SphericalCode, k: int, delta: float):
    """One copy of the code per modality, suffixed by scaled simplex vertices.

    U_i^{(j)} = (delta X_i, sqrt(1 - delta^2) w_j). Returned params:
    m = delta^2 (1 - alpha) / 2 and b_rel = delta^2 (1 + alpha) / 2 - (1 - delta^2)/(k - 1),
    which every modality pair satisfies with certified slack.
    """
    if k < 2:
        raise InvalidK(f"need k >= 2, got {k}")
    if not (0 <= delta < 1):
        raise InvalidDelta(f"delta must lie in [0, 1), got {delta}")
    w = simplex(k).vectors
    x = code.points.vectors
    tail = np.sqrt(1 - delta ** 2)
    sets = []
    for j in range(k):
        block = np.hstack([delta * x, np.tile(tail * w[j], (code.points.count, 1))])
        sets.append(unit_rows(block))
    config = MultiModalConfig(tuple(sets))
    alpha = code.alpha
    m = delta ** 2 * (1 - alpha) / 2
    b_rel = delta ** 2 * (1 + alpha) / 2 - (1 - delta ** 2) / (k - 1)
    return config, ConstellationParams(margin=m, rel_bias=float(np.clip(b_rel, -1, 1)))


def apply_locked_adapters(pair: PairedConfig, delta: float) -> PairedConfig:
    """U -> (delta U, +sqrt(1-delta^2)), V -> (delta V, -sqrt(1-delta^2))."""
    if not (0 <= delta <= 1):
        raise InvalidDelta(f"delta must lie in [0, 1], got {delta}")
    tail = np.sqrt(1 - delta ** 2)
    n = pair.count
    u = np.hstack([delta * pair.u.vectors, np.full((n, 1), tail)])
    v = np.hstack([delta * pair.v.vectors, np.full((n, 1), -tail)])
    return PairedConfig(unit_rows(u), unit_rows(v))


def apply_modality_adapter(embedding_set: EmbeddingSet, delta: float, w: np.ndarray) -> EmbeddingSet:
    """Rows X -> (delta X, sqrt(1-delta^2) w) for a unit suffix direction w."""
    if not (0 <= delta <= 1):
        raise InvalidDelta(f"delta must lie in [0, 1], got {delta}")
    w = np.asarray(w, dtype=np.float64)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise NonUnitW(f"suffix direction has norm {np.linalg.norm(w)}")
    tail = np.sqrt(1 - delta ** 2)
    block = np.hstack([
        delta * embedding_set.vectors,
        np.tile(tail * w, (embedding_set.count, 1)),
    ])
    return unit_rows(block)


def adapter_identity_params(delta: float, t: float, b_rel: float, k: int | None = None):
    """(t_eff, b_rel_eff) making the adapter-composed loss equal the raw loss.

    Two modalities: the adapters shift every inner product by -(1 - delta^2);
    with simplex suffixes for k modalities the cross shift is -(1-delta^2)/(k-1).
    Either way t_eff = t delta^2 and b_rel_eff absorbs the shift.
    """
    if not (0 < delta <= 1):
        raise InvalidDelta(f"delta must lie in (0, 1], got {delta}")
    shift = (1 - delta ** 2) if k is None else (1 - delta ** 2) / (k - 1)
    return t * delta ** 2, (b_rel + shift) / delta ** 2


def _gon_core(n_total: int, zenith_offset: float):
    """d=3 core: two parallel arcs of points plus two equatorial self-pairs."""
    n_gon = n_total - 2
    if n_gon < 2:
        raise ConstructionFailure("need at least 4 points for the 3-D core")
    beta = 0.15 * np.pi  # half-width of the azimuthal arc holding the gon points
    gamma = 0.3 * np.pi  # equatorial points at pi +/- gamma
    if n_gon == 1:
        azimuths = np.array([0.0])
    else:
        azimuths = np.linspace(-beta, beta, n_gon)
    theta_u = np.pi / 4 + zenith_offset
    theta_v = 3 * np.pi / 4 - zenith_offset
    u = np.stack([
        np.sin(theta_u) * np.cos(azimuths),
        np.sin(theta_u) * np.sin(azimuths),
        np.full(n_gon, np.cos(theta_u)),
    ], axis=1)
    v = np.stack([
        np.sin(theta_v) * np.cos(azimuths),
        np.sin(theta_v) * np.sin(azimuths),
        np.full(n_gon, np.cos(theta_v)),
    ], axis=1)
    eq1 = np.array([np.cos(np.pi - gamma), np.sin(np.pi - gamma), 0.0])
    eq2 = np.array([np.cos(np.pi + gamma), np.sin(np.pi + gamma), 0.0])
    u = np.vstack([u, eq1, eq2])
    v = np.vstack([v, eq1, eq2])
    return u, v


def _sign_pattern_holds(u: np.ndarray, v: np.ndarray) -> bool:
    g = u @ v.T
    diag = np.diagonal(g)
    if np.any(diag <= 0):
        return False
    off = g.copy()
    np.fill_diagonal(off, -np.inf)
    return bool(np.all(off < 0))


def tightness_config(d: int, n: int, eps: float = 1e-2, seed: int = 0,
                     zenith_offset: float = 0.02) -> PairedConfig:
    """A sign-pattern configuration that resists full linear separation.

    d = 3: two parallel arcs at zeniths pi/4 + offset and 3pi/4 - offset plus
    two equatorial self-paired points. d > 3: d-3 simplex-vertex self-pairs,
    with the 3-D core embedded in their orthogonal complement and blended
    toward one extra simplex vertex by the eps-mix, then renormalized.
    Retries smaller eps / offset before giving up.
    """
    if d < 3 or n < d + 2 or not (0 < eps < 0.1):
        raise ConstructionFailure(f"preconditions fail: d={d}, n={n}, eps={eps}")
    del seed  # construction is deterministic; parameter kept for interface parity
    offsets = [zenith_offset, zenith_offset / 4, zenith_offset / 16]
    eps_ladder = [eps, 1e-3, 1e-4]
    for off in offsets:
        if d == 3:
            u, v = _gon_core(n, off)
            if _sign_pattern_holds(u, v):
                return PairedConfig(unit_rows(u), unit_rows(v))
            continue
        n_core = n - (d - 3)
        if n_core < 4:
            raise ConstructionFailure("not enough points left for the 3-D core")
        core_u, core_v = _gon_core(n_core, off)
        omega = simplex(d + 1, ambient_dim=d).vectors
        fixed = omega[: d - 3]
        blend = omega[d - 3]
        # orthonormal basis of the 3-dim complement of span(fixed)
        _, s, vt = np.linalg.svd(fixed)
        basis = vt[d - 3:]
        emb_u = core_u @ basis
        emb_v = core_v @ basis
        for e in eps_ladder:
            uu = np.vstack([fixed, e * blend + np.sqrt(1 - e ** 2) * emb_u])
            vv = np.vstack([fixed, e * blend + np.sqrt(1 - e ** 2) * emb_v])
            uu /= np.linalg.norm(uu, axis=1)[:, None]
            vv /= np.linalg.norm(vv, axis=1)[:, None]
            if _sign_pattern_holds(uu, vv):
                return PairedConfig(unit_rows(uu), unit_rows(vv))
    raise ConstructionFailure(
        f"sign pattern unattainable at d={d}, n={n} for the tried offsets/eps"
    )
