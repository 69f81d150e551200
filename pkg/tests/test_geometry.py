import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from constellations import (
    ConstellationParams,
    EmbeddingSet,
    PairedConfig,
    gram_stats,
    renormalize,
    trimmed_stats,
    unit_rows,
    validate_constellation,
    xi_report,
)
from constellations.errors import DimensionMismatch, InvalidQuantile, ZeroVector
from constellations.geometry import cone_membership

from conftest import random_pair


def test_embedding_set_shape_checks():
    with pytest.raises(DimensionMismatch):
        EmbeddingSet(np.zeros(3))
    with pytest.raises(DimensionMismatch):
        EmbeddingSet(np.zeros((0, 3)))
    s = EmbeddingSet(np.eye(3))
    assert s.count == 3 and s.dim == 3
    assert s.is_unit()


def test_renormalize_preserves_direction():
    raw = np.array([[3.0, 4.0], [0.0, -2.0]])
    out = renormalize(EmbeddingSet(raw))
    np.testing.assert_allclose(out.vectors, [[0.6, 0.8], [0.0, -1.0]])


def test_renormalize_rejects_zero_rows():
    with pytest.raises(ZeroVector):
        renormalize(EmbeddingSet(np.array([[1.0, 0.0], [0.0, 0.0]])))


def test_pair_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        PairedConfig(EmbeddingSet(np.eye(3)), EmbeddingSet(np.eye(4)))


def test_gram_stats_hand_example():
    u = EmbeddingSet(np.eye(2))
    v = unit_rows(np.array([[1.0, 1.0], [0.0, 1.0]]))
    stats = gram_stats(PairedConfig(u, v))
    s = 1.0 / np.sqrt(2.0)
    assert stats.min_pos == pytest.approx(s)
    assert stats.max_pos == pytest.approx(1.0)
    assert stats.max_neg == pytest.approx(s)
    assert stats.min_neg == pytest.approx(0.0)
    assert stats.opt_margin == pytest.approx(0.0)
    assert stats.opt_rel_bias == pytest.approx(s)
    assert stats.separated


def test_gram_stats_singleton_has_no_negatives():
    one = unit_rows(np.array([[1.0, 0.0]]))
    stats = gram_stats(PairedConfig(one, one))
    assert stats.min_neg is None
    assert stats.opt_margin is None
    assert stats.separated is None


@given(seed=st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_opt_params_are_midpoint_and_half_gap(seed):
    pair = random_pair(8, 5, seed=seed)
    stats = gram_stats(pair)
    g = pair.gram()
    pos = np.diagonal(g)
    neg = g[~np.eye(8, dtype=bool)]
    assert stats.opt_margin == pytest.approx((pos.min() - neg.max()) / 2)
    assert stats.opt_rel_bias == pytest.approx((pos.min() + neg.max()) / 2)
    assert stats.separated == (pos.min() >= neg.max())


def test_trimmed_stats_at_zero_matches_extremes(small_pair):
    full = gram_stats(small_pair)
    trimmed = trimmed_stats(small_pair, 0.0, 0.0)
    assert trimmed.opt_margin == pytest.approx(full.opt_margin)
    assert trimmed.opt_rel_bias == pytest.approx(full.opt_rel_bias)


def test_trimmed_stats_uses_lower_interpolation():
    # positives 0.1..0.6 over six pairs: the 0.25-quantile of six sorted
    # values sits at index floor(0.25 * 5) = 1
    d = 7
    diags = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    u = np.zeros((6, d))
    v = np.zeros((6, d))
    for i, c in enumerate(diags):
        u[i, i] = 1.0
        v[i, i] = c
        v[i, 6] = np.sqrt(1 - c * c)
    pair = PairedConfig(unit_rows(u), unit_rows(v))
    stats = trimmed_stats(pair, 0.25, 0.0)
    assert stats.min_pos == pytest.approx(0.2)


@pytest.mark.parametrize("q", [-0.1, 0.5, 0.7])
def test_trimmed_stats_rejects_bad_quantiles(small_pair, q):
    with pytest.raises(InvalidQuantile):
        trimmed_stats(small_pair, q, 0.0)
    with pytest.raises(InvalidQuantile):
        trimmed_stats(small_pair, 0.0, q)


def test_validate_constellation_accepts_orthogonal_identity(identity_pair):
    report = validate_constellation(identity_pair, ConstellationParams(0.5, 0.5))
    assert report.passed
    assert bool(report)
    assert report.violations == []


def test_validate_constellation_reports_slack():
    u = EmbeddingSet(np.eye(2))
    v = unit_rows(np.array([[1.0, 1.0], [0.0, 1.0]]))
    report = validate_constellation(PairedConfig(u, v), ConstellationParams(0.9, 0.0))
    assert not report.passed
    indices = {(i, j) for i, j, _ in report.violations}
    assert (0, 0) in indices  # positive pair below m + b_rel
    assert (0, 1) in indices  # negative pair above -m + b_rel
    assert all(slack < 0 for _, _, slack in report.violations)


def test_validate_constellation_tolerance_absorbs_drift(identity_pair):
    params = ConstellationParams(0.5, 0.5)
    # diag is exactly m + b_rel and off-diag exactly -m + b_rel; tol 0 must
    # still accept equality
    assert validate_constellation(identity_pair, params, tol=0.0).passed


def test_xi_vanishes_for_shifted_copies():
    rng = np.random.default_rng(3)
    u = rng.standard_normal((10, 6))
    shift = rng.standard_normal(6)
    pair = PairedConfig(EmbeddingSet(u), EmbeddingSet(u - shift))
    report = xi_report(pair)
    assert report.xi == pytest.approx(0.0, abs=1e-12)
    assert report.deviation == pytest.approx(0.0, abs=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_xi_identity_and_nonnegativity(seed):
    pair = random_pair(9, 4, seed=seed)
    report = xi_report(pair)
    assert report.xi >= -1e-12
    assert report.xi == pytest.approx(report.mean_of_norms - report.norm_of_mean)
    assert report.xi == pytest.approx(report.deviation)


def test_xi_report_needs_two_rows():
    one = unit_rows(np.array([[1.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        xi_report(PairedConfig(one, one))


def test_cone_membership():
    pts = unit_rows(np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]))
    assert cone_membership(pts, 2)       # inside the cone of rows 0 and 1
    assert not cone_membership(pts, 3)   # orthogonal to everything else
