import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from holdout import (
    AnchorError,
    BoundMode,
    DomainError,
    LossAnchors,
    eval_loss,
    eval_variance_bound,
    fit_interpolating_curve,
    fit_power_curve,
    negative_utility,
)
from holdout.curves import utility_profile

N = 4177
OLS_ANCHORS = LossAnchors(4.9394, 4.9426, 4.9594, N)
RF_ANCHORS = LossAnchors(4.6379, 4.6692, 5.0571, N)

# log(beta) / log(alpha) with alpha = 834 / 2087, evaluated at 30 digits (mpmath)
OLS_EXPONENT = 1.99790946118942148235805185579
RF_EXPONENT = 2.82881595695946079363692686284


def test_power_fit_parameters_match_recomputation():
    c = fit_power_curve(OLS_ANCHORS)
    assert c.beta == pytest.approx(0.16, rel=1e-9)
    assert c.alpha == pytest.approx(834 / 2087, rel=1e-15)
    assert c.exponent == pytest.approx(OLS_EXPONENT, rel=1e-9)
    assert c.scale == pytest.approx(0.0200, abs=1e-12)
    assert c.offset == 4.9394
    r = fit_power_curve(RF_ANCHORS)
    assert r.exponent == pytest.approx(RF_EXPONENT, rel=1e-9)
    assert r.scale == pytest.approx(0.4192, abs=1e-12)


@pytest.mark.parametrize(
    "losses, message",
    [
        ((1.0, 2.0, 2.0), "beta >= 1"),
        ((1.0, 3.0, 2.0), "beta >= 1"),
        ((1.0, 1.0, 2.0), "beta <= 0"),
        ((1.0, 0.5, 2.0), "beta <= 0"),
        ((1.0, 1.0, 1.0), "zero scale"),
        ((2.0, 1.5, 1.0), "decreasing"),
    ],
)
def test_power_fit_rejects_bad_anchors(losses, message):
    with pytest.raises(AnchorError, match=message) as info:
        fit_power_curve(LossAnchors(*losses, 100))
    for v in losses:
        assert str(v) in str(info.value)


def test_pchip_fallback_warns_and_is_monotone():
    a = LossAnchors(1.0, 0.8, 2.0, 100)
    with pytest.warns(UserWarning, match="PCHIP"):
        c = fit_power_curve(a, fallback="pchip")
    assert c.fit_kind == "pchip"
    v = eval_loss(c, c.domain())
    assert np.all(np.diff(v) >= -1e-12)


@pytest.mark.parametrize("kind", ["pchip", "cubic_spline"])
def test_interpolants_reproduce_a_line(kind):
    c = fit_interpolating_curve([(1, 1.0), (11, 2.0), (21, 3.0)], kind)
    for m in (3.5, 6, 16, 20):
        assert eval_loss(c, m) == pytest.approx(1 + (m - 1) / 10, abs=1e-12)


def test_interpolant_errors():
    with pytest.raises(DomainError, match="duplicate"):
        fit_interpolating_curve([(1, 1.0), (1, 2.0), (5, 3.0)])
    with pytest.raises(DomainError, match="increase"):
        fit_interpolating_curve([(1, 1.0), (9, 2.0), (5, 3.0)])
    with pytest.raises(DomainError):
        fit_interpolating_curve([(1, 1.0), (9, 2.0)], "cubic_spline")
    with pytest.raises(DomainError):
        fit_interpolating_curve([(1, 1.0), (2, 2.0), (3, 3.0)], "linear")


def test_pchip_monotone_on_dense_grid():
    pts = [(1, 0.1), (30, 0.15), (40, 0.9), (80, 1.0), (200, 3.0)]
    c = fit_interpolating_curve(pts, "pchip")
    grid = np.linspace(1, 200, 5000)
    assert np.all(np.diff(eval_loss(c, grid)) >= -1e-12)


def test_spline_through_anchors_agrees_at_middle_anchor():
    power = fit_power_curve(OLS_ANCHORS)
    spline = fit_interpolating_curve(OLS_ANCHORS.points(), "cubic_spline", N)
    assert eval_loss(spline, 835) == pytest.approx(eval_loss(power, 835), rel=0.02)


@pytest.mark.parametrize("anchors", [OLS_ANCHORS, RF_ANCHORS])
def test_fits_pass_through_anchors_and_agree(anchors):
    fits = [
        fit_power_curve(anchors),
        fit_interpolating_curve(anchors.points(), "pchip", N),
        fit_interpolating_curve(anchors.points(), "cubic_spline", N),
    ]
    for c in fits:
        for m, loss in anchors.points():
            assert abs(eval_loss(c, m, 0.0) - loss) < 1e-9
            assert eval_loss(c, m, 1.0) == pytest.approx(loss - 1.0, abs=1e-9)
    grid = np.arange(2, anchors.m_lmo)
    base = eval_loss(fits[0], grid)
    for c in fits[1:]:
        assert np.max(np.abs(eval_loss(c, grid) / base - 1)) < 0.05


def test_extrapolation_is_refused():
    c = fit_power_curve(OLS_ANCHORS)
    for m in (0, 2089):
        with pytest.raises(DomainError, match="outside"):
            eval_loss(c, m)


def flat(level, n_total=200):
    return fit_interpolating_curve([(1, level), (40, level), (100, level)], "pchip", n_total)


def test_variance_bound_cases():
    assert np.all(eval_variance_bound(flat(1.0), np.arange(1, 101), 1.0) == 0.0)

    # E = delta^2 = 1 at m = 1 with sigma2 = 1: practical value 2
    c = fit_interpolating_curve([(1, 2.0), (5, 2.5), (10, 3.0)], "pchip")
    assert eval_variance_bound(c, 1, 1.0) == pytest.approx(4.0)
    assert eval_variance_bound(c, 1, 1.0, BoundMode("asymmetric")) == pytest.approx(16.0)
    # MC oracle: Var(delta^2 - 2 delta eps) with delta = 1, eps ~ N(0, 1)
    eps = np.random.default_rng(0).standard_normal(400_000)
    assert np.var(1 - 2 * eps) == pytest.approx(4.0, rel=0.01)

    with pytest.raises(DomainError, match="negative expected loss"):
        eval_variance_bound(c, 1, 2.5)


def test_heteroskedastic_bound_uses_sigma2_max():
    c = flat(3.0)
    mode = BoundMode(sigma2_max=1.5)
    # E = 3 - 1 = 2 at sigma2 = 1; bound = 4 * 1.5 * 2 / m
    assert eval_variance_bound(c, 10, 1.0, mode) == pytest.approx(4 * 1.5 * 2 / 10)
    assert mode.heteroskedastic and mode.effective_sigma2(0.3) == 1.5
    with pytest.raises(DomainError):
        BoundMode("skewed")
    with pytest.raises(DomainError):
        BoundMode(sigma2_max=0.0)


def test_negative_utility_cases():
    c = fit_power_curve(OLS_ANCHORS)
    m = np.arange(1, 2089)
    np.testing.assert_allclose(negative_utility(c, m, 0.0), eval_loss(c, m, 0.0), rtol=0, atol=0)

    cf = flat(1.5)  # E = 1 at sigma2 = 0.5
    u = negative_utility(cf, np.arange(1, 101), 0.5)
    np.testing.assert_allclose(u, 1 + 4 * 0.5 * 1 / np.arange(1, 101), rtol=1e-12)
    assert np.all(np.diff(u) < 0)


def test_linear_toy_curve_grid_values():
    # E(m) = c0 + c1 * t with t = (m - 1) / 99, through collinear points
    c0, c1, s2 = 0.5, 0.3, 0.2
    pts = [(1, c0), (50, c0 + c1 * 49 / 99), (100, c0 + c1)]
    c = fit_interpolating_curve(pts, "pchip")
    for m in (1, 2, 10, 33, 77, 100):
        E = c0 + c1 * (m - 1) / 99 - s2
        assert negative_utility(c, m, s2) == pytest.approx(E + 4 * s2 * E / m, abs=1e-12)


def test_utility_profile_marks_infeasible_points():
    c = fit_power_curve(OLS_ANCHORS)
    m, E, V, U = utility_profile(c, 4.95, BoundMode())
    assert np.all(np.isnan(V[E < 0])) and np.all(np.isfinite(V[E >= 0]))
    assert np.any(E < 0) and np.any(E >= 0)


anchor_triples = st.tuples(
    st.floats(0.01, 10.0), st.floats(0.01, 0.99), st.floats(0.001, 5.0), st.integers(20, 5000)
)


@settings(max_examples=100, deadline=None)
@given(anchor_triples)
def test_anchor_exactness_property(t):
    l0, frac, scale, n = t
    a = LossAnchors(l0, l0 + frac * scale, l0 + scale, n)
    assume(a.l_loo < a.l_kref < a.l_lmo)
    for c in (
        fit_power_curve(a),
        fit_interpolating_curve(a.points(), "pchip", n),
        fit_interpolating_curve(a.points(), "cubic_spline", n),
    ):
        for m, loss in a.points():
            assert abs(eval_loss(c, m) - loss) < 1e-9 * max(1.0, abs(loss))
    p = fit_power_curve(a)
    if p.exponent > 0:
        assert np.all(np.diff(eval_loss(p, p.domain())) >= 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.5, 4.0), st.integers(1, 2088))
def test_bound_scaling_property(s2_max, factor, m):
    c = fit_power_curve(OLS_ANCHORS)
    v1 = eval_variance_bound(c, m, 1.0, BoundMode(sigma2_max=s2_max))
    v2 = eval_variance_bound(c, m, 1.0, BoundMode(sigma2_max=s2_max * factor))
    assert v1 >= 0 and math.isclose(v2, factor * v1, rel_tol=1e-12)
    E = eval_loss(c, m, 1.0)
    assert math.isclose(v1 * m, 4 * s2_max * E, rel_tol=1e-12)
