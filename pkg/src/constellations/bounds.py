"""Closed-form feasibility and cardinality bounds for margin / relative-bias
pairs, plus the region classifier used by the CLI and the plots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleParams
from .geometry import PairedConfig


@dataclass(frozen=True)
class RegionLabel:
    feasible: bool
    exponential_exists: bool
    modality_gap_guaranteed: bool

    def __post_init__(self):
        if self.exponential_exists and not self.feasible:
            raise ValueError("exponential_exists implies feasible")


@dataclass(frozen=True)
class ExponentBounds:
    """Growth-rate bounds in nats for constellations at fixed (m, b_rel)."""

    lower_nats: float
    upper_nats: float
    alpha_star: float


def nats_to_bits(x: float) -> float:
    return x / np.log(2.0)


def _check_params(m: float, b_rel: float):
    if m < 0 or abs(b_rel) > 1:
        raise InfeasibleParams(f"need m >= 0 and |b_rel| <= 1, got ({m}, {b_rel})")


def margin_feasibility(m: float, b_rel: float, n: int | None = None):
    """(ok, violated) for the two necessary inequalities.

    Checks m + b_rel <= 1 and (3 - 4/n) m <= 1 + b_rel (asymptotic factor 3
    when n is None). `violated` lists human-readable descriptions.
    """
    _check_params(m, b_rel)
    violated = []
    if m + b_rel > 1:
        violated.append(f"m + b_rel = {m + b_rel:.6g} > 1")
    factor = 3.0 if n is None else 3.0 - 4.0 / n
    if factor * m > 1 + b_rel:
        violated.append(f"{factor:.6g} * m = {factor * m:.6g} > 1 + b_rel = {1 + b_rel:.6g}")
    return not violated, violated


def _alpha_star(m: float, b_rel: float) -> float:
    return (1 + b_rel - 3 * m) / (1 + b_rel + m)


def _check_interior(m: float, b_rel: float):
    _check_params(m, b_rel)
    if m <= 0 or m + b_rel >= 1 or 3 * m >= 1 + b_rel:
        raise InfeasibleParams(
            f"({m}, {b_rel}) is not in the strict feasible interior"
        )


def lower_exponent(m: float, b_rel: float) -> float:
    """Guaranteed growth rate in nats: -(1/2) ln(1 - alpha^2)."""
    _check_interior(m, b_rel)
    alpha = _alpha_star(m, b_rel)
    return float(-0.5 * np.log1p(-alpha * alpha))


def upper_exponent(m: float, b_rel: float) -> float:
    """Cap on the growth rate in nats: -(1/2) ln(1 - alpha) = -(1/2) ln(4m/(1+b_rel+m))."""
    _check_interior(m, b_rel)
    alpha = _alpha_star(m, b_rel)
    return float(-0.5 * np.log1p(-alpha))


def exponent_bounds(m: float, b_rel: float) -> ExponentBounds:
    return ExponentBounds(
        lower_nats=lower_exponent(m, b_rel),
        upper_nats=upper_exponent(m, b_rel),
        alpha_star=_alpha_star(m, b_rel),
    )


def classify_region(m: float, b_rel: float) -> RegionLabel:
    """Feasibility (non-strict), exponential-size existence (strict interior),
    and guaranteed modality gap (m > |b_rel| on top of existence)."""
    _check_params(m, b_rel)
    feasible, _ = margin_feasibility(m, b_rel)
    exponential = feasible and m > 0 and m + b_rel < 1 and 3 * m < 1 + b_rel
    gap = exponential and m > abs(b_rel)
    return RegionLabel(
        feasible=feasible,
        exponential_exists=exponential,
        modality_gap_guaranteed=gap,
    )


def averaged_gram_inequality_check(pair: PairedConfig):
    """(lhs, rhs, holds) for the universal averaged-Gram inequality.

    lhs = (1/N^2) sum_{i != j} <U_i, V_j>,
    rhs = ((N-2)/(2N^2)) sum_i <U_i, V_i> - 1/2.
    Holds for every unit-norm input; a failure signals a bug, not a finding.
    """
    n = pair.count
    if n < 2:
        raise InfeasibleParams("need N >= 2")
    g = pair.gram()
    diag_sum = float(np.trace(g))
    off_sum = float(np.sum(g)) - diag_sum
    lhs = off_sum / (n * n)
    rhs = (n - 2) / (2 * n * n) * diag_sum - 0.5
    return lhs, rhs, bool(lhs >= rhs - 1e-12)
