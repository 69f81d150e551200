import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from constellations import (
    averaged_gram_inequality_check,
    classify_region,
    exponent_bounds,
    lower_exponent,
    margin_feasibility,
    upper_exponent,
)
from constellations.bounds import RegionLabel, nats_to_bits
from constellations.errors import InfeasibleParams

from conftest import random_pair


def test_reference_point_closed_forms():
    # alpha* = (1 - 0.3) / (1 + 0.1) = 7/11 at (m, b_rel) = (0.1, 0)
    alpha = 7.0 / 11.0
    bounds = exponent_bounds(0.1, 0.0)
    assert bounds.alpha_star == pytest.approx(alpha, abs=1e-12)
    assert bounds.lower_nats == pytest.approx(-0.5 * np.log(1 - alpha ** 2), abs=1e-12)
    assert bounds.upper_nats == pytest.approx(-0.5 * np.log(1 - alpha), abs=1e-12)
    # hand evaluation: 0.5 * ln(121/72) and 0.5 * ln(11/4)
    assert bounds.lower_nats == pytest.approx(0.2595622132903428, abs=1e-12)
    assert bounds.upper_nats == pytest.approx(0.5058004558392399, abs=1e-12)


def test_lower_below_upper_on_slice():
    for m in np.linspace(0.01, 0.3, 30):
        assert lower_exponent(m, 0.0) <= upper_exponent(m, 0.0)


@given(m=st.floats(0.01, 0.3), b_rel=st.floats(-0.3, 0.6))
@settings(max_examples=100, deadline=None)
def test_lower_below_upper_generic(m, b_rel):
    if m + b_rel >= 0.99 or 3 * m >= 0.99 * (1 + b_rel):
        return
    assert lower_exponent(m, b_rel) <= upper_exponent(m, b_rel)
    assert lower_exponent(m, b_rel) > 0


def test_exponents_reject_boundary_and_exterior():
    for m, b_rel in [(0.0, 0.0), (0.5, 0.5), (0.4, 0.2)]:
        with pytest.raises(InfeasibleParams):
            lower_exponent(m, b_rel)
        with pytest.raises(InfeasibleParams):
            upper_exponent(m, b_rel)


def test_margin_feasibility_inequalities():
    ok, violated = margin_feasibility(0.2, 0.1)
    assert ok and violated == []
    ok, violated = margin_feasibility(0.6, 0.5)
    assert not ok and len(violated) == 2
    # the finite-N factor 3 - 4/N is weaker than the asymptotic factor 3
    ok_async, _ = margin_feasibility(0.35, 0.0)
    ok_small, _ = margin_feasibility(0.35, 0.0, n=4)
    assert not ok_async and ok_small


def test_margin_feasibility_rejects_bad_domain():
    with pytest.raises(InfeasibleParams):
        margin_feasibility(-0.1, 0.0)
    with pytest.raises(InfeasibleParams):
        margin_feasibility(0.1, 1.5)


def test_classify_region_cases():
    interior = classify_region(0.2, 0.0)
    assert interior.feasible and interior.exponential_exists
    assert interior.modality_gap_guaranteed

    biased = classify_region(0.1, 0.4)
    assert biased.exponential_exists and not biased.modality_gap_guaranteed

    boundary = classify_region(0.5, 0.5)
    assert boundary.feasible and not boundary.exponential_exists

    outside = classify_region(0.9, 0.5)
    assert not outside.feasible and not outside.exponential_exists


def test_region_label_invariant():
    with pytest.raises(ValueError):
        RegionLabel(feasible=False, exponential_exists=True,
                    modality_gap_guaranteed=False)


def test_nats_to_bits():
    assert nats_to_bits(np.log(2.0)) == pytest.approx(1.0)


@given(seed=st.integers(0, 10_000), n=st.integers(2, 12), d=st.integers(1, 8))
@settings(max_examples=100, deadline=None)
def test_averaged_gram_inequality_universal(seed, n, d):
    pair = random_pair(n, d, seed=seed)
    lhs, rhs, holds = averaged_gram_inequality_check(pair)
    assert holds
    assert lhs >= rhs - 1e-12


def test_averaged_gram_inequality_tight_on_antipodal_pair():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(4)
    x /= np.linalg.norm(x)
    from constellations import EmbeddingSet, PairedConfig

    pair = PairedConfig(EmbeddingSet(np.stack([x, -x])),
                        EmbeddingSet(np.stack([x, -x])))
    lhs, rhs, holds = averaged_gram_inequality_check(pair)
    assert holds
    assert lhs == pytest.approx(rhs, abs=1e-12)
