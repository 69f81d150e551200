"""Exhaustive nearest-neighbor retrieval across the two modalities and the
batch-loss robustness bound as an executable check."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidBatch, NonPositiveTemperature
from .geometry import PairedConfig
from .losses import BatchMethod, batch_expected_sigmoid_loss


class Direction(Enum):
    U_TO_V = "u2v"
    V_TO_U = "v2u"


@dataclass(frozen=True)
class RetrievalReport:
    direction: Direction
    success_fraction: float
    failures: tuple
    unique: bool


_TIE_TOL = 1e-12


def nn_retrieve(pair: PairedConfig, direction: Direction = Direction.U_TO_V) -> RetrievalReport:
    """Exact inner-product retrieval: query i succeeds iff its own partner
    attains the maximum score. Ties count as successes but clear `unique`."""
    g = pair.gram()
    scores = g if direction is Direction.U_TO_V else g.T
    n = pair.count
    failures = []
    unique = True
    for i in range(n):
        row = scores[i]
        own = row[i]
        best = row.max()
        if own < best - _TIE_TOL:
            failures.append(i)
        else:
            others = np.delete(row, i)
            if others.size and others.max() >= own - _TIE_TOL:
                unique = False
    return RetrievalReport(
        direction=direction,
        success_fraction=1.0 - len(failures) / n,
        failures=tuple(failures),
        unique=unique,
    )


def robustness_check(pair: PairedConfig, t: float, b: float, batch: int):
    """Expected-batch-loss retrieval guarantee as a dict of observables.

    xi_loss = expected sigmoid loss of a size-`batch` batch divided by log 2;
    bound_fraction = max(0, 1 - N * xi_loss / (B (B - 1))); actual_fraction is
    the worse of the two retrieval directions. `holds` asserts the bound.
    """
    if t <= 0:
        raise NonPositiveTemperature(f"inverse temperature must be > 0, got {t}")
    n = pair.count
    if not (np.sqrt(n) < batch < n):
        raise InvalidBatch(f"need sqrt(N) < B < N, got B={batch}, N={n}")
    xi_loss = batch_expected_sigmoid_loss(pair, t, b, batch, method=BatchMethod.EXACT)
    xi_loss /= np.log(2.0)
    bound_fraction = max(0.0, 1.0 - n * xi_loss / (batch * (batch - 1)))
    u2v = nn_retrieve(pair, Direction.U_TO_V).success_fraction
    v2u = nn_retrieve(pair, Direction.V_TO_U).success_fraction
    actual = min(u2v, v2u)
    return {
        "xi_loss": float(xi_loss),
        "bound_fraction": float(bound_fraction),
        "actual_fraction": float(actual),
        "holds": bool(actual >= bound_fraction - 1e-12),
    }
