import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magstep.errors import NoInteriorMinimum, ValidationError, ZeroField
from magstep.fiber1d import (NON_TRAPPING, SYMMETRIC_TRAPPING, TRAPPING, UNIFORM, MAGNETIC_WALL,
                             Grid1D, assemble_fiber, band_curve, classify, decay_rate,
                             degennes_oracle, minimize_band, mu, mu_weber, neumann_section,
                             split_simpson, weber_solve)

THETA0 = degennes_oracle()


def test_degennes_oracle_stable_under_refinement():
    assert abs(degennes_oracle(N=120, L=14.0) - THETA0) < 1e-10
    theta, xi = degennes_oracle(with_xi=True)
    # xi^2 = Theta0 at the minimizer; a flat minimum pins xi only to ~sqrt(eps)
    assert abs(xi ** 2 - theta) < 1e-6


def test_neumann_section_is_a_lower_envelope():
    # the section at the minimizer is the minimum
    _, xi = degennes_oracle(with_xi=True)
    for x in (xi - 0.2, xi + 0.2):
        assert neumann_section(x) > THETA0


@pytest.mark.parametrize("b1,b2,case", [
    (1, -0.5, TRAPPING), (-0.5, 1, TRAPPING), (1, -1, SYMMETRIC_TRAPPING),
    (1, 0.5, NON_TRAPPING), (2, 2, UNIFORM), (0, 3, MAGNETIC_WALL)])
def test_classify(b1, b2, case):
    f = classify(b1, b2)
    assert f.case == case
    assert max(abs(f.b1), abs(f.b2)) == 1.0


def test_classify_rescales():
    f = classify(2.0, -1.0)
    assert (f.b1, f.b2, f.scale) == (1.0, -0.5, 2.0)


def test_zero_field():
    with pytest.raises(ZeroField):
        classify(0, 0)


def test_grid_needs_node_at_origin():
    with pytest.raises(ValidationError):
        Grid1D(-1.0, 2.0, 12)
    g = Grid1D.symmetric(3.0, 61)
    assert g.t[g.i0] == 0.0
    assert g.refined().n == 121


def test_fiber_matrix_symmetric_positive():
    f = classify(1, -0.5)
    A = assemble_fiber(f, 0.3, Grid1D.symmetric(6.0, 201))
    assert np.all(A.diag > 0)
    assert np.all(A.off < 0)


@pytest.mark.parametrize("xi", [-1.0, 0.0, 1.0])
def test_uniform_field_landau_level(xi):
    assert abs(mu(classify(1, 1), xi).mu - 1.0) < 1e-5


@settings(max_examples=12, deadline=None)
@given(b=st.floats(-0.95, -0.05), xi=st.floats(-1.5, 1.5))
def test_three_routes_agree(b, xi):
    f = classify(1.0, b)
    fd = mu(f, xi).mu
    closed = mu_weber(f, xi)
    shot, mismatch = weber_solve(f, xi, mu_guess=closed)
    assert abs(closed - shot) < 1e-8
    # second-order finite differences on the default grid
    assert abs(fd - closed) < 5e-5 * max(1.0, closed)


def test_fd_converges_at_second_order():
    f = classify(1.0, -0.5)
    ref = mu_weber(f, 0.6)
    g = Grid1D.default(f, 1001)
    e1 = abs(mu(f, 0.6, g).mu - ref)
    e2 = abs(mu(f, 0.6, g.refined()).mu - ref)
    assert 3.5 < e1 / e2 < 4.5


def test_band_curve_shape():
    f = classify(1.0, -0.5)
    pts = band_curve(f, np.linspace(-2, 3, 11))
    assert all(p.residual < 1e-8 for p in pts)
    with pytest.raises(ValidationError):
        band_curve(f, [np.nan])


def test_symmetric_step_gives_degennes():
    gs = minimize_band(classify(1.0, -1.0))
    assert abs(gs.beta_b - THETA0) < 1e-9
    # with potential (sigma t + xi)^2 the (1, -1) minimizer is +sqrt(Theta0)
    assert abs(gs.xi_b - np.sqrt(THETA0)) < 1e-7
    gm = minimize_band(classify(-1.0, 1.0))
    assert abs(gm.xi_b + np.sqrt(THETA0)) < 1e-7


def test_reflection_duality():
    a = minimize_band(classify(1.0, -0.5))
    b = minimize_band(classify(-0.5, 1.0))
    assert abs(a.beta_b - b.beta_b) < 1e-12
    assert abs(a.xi_b + b.xi_b) < 1e-9
    assert np.max(np.abs(a.phi - b.phi[::-1])) < 1e-9


@settings(max_examples=8, deadline=None)
@given(b=st.floats(-0.9, -0.1))
def test_bound_sandwich_property(b):
    beta = minimize_band(classify(1.0, b)).beta_b
    assert abs(b) * THETA0 < beta < abs(b)


@settings(max_examples=6, deadline=None)
@given(b=st.floats(-0.9, -0.1))
def test_minimizer_is_critical_and_minimal(b):
    f = classify(1.0, b)
    gs = minimize_band(f)
    e = 1e-4
    lo, hi = mu_weber(f, gs.xi_b - e), mu_weber(f, gs.xi_b + e)
    assert lo > gs.beta_b and hi > gs.beta_b
    assert abs(hi - lo) / (2 * e) < 1e-5


def test_ground_state_normalized_and_smooth_at_zero():
    gs = minimize_band(classify(1.0, -0.5))
    assert abs(split_simpson(gs.phi ** 2, gs.grid) - 1.0) < 1e-12
    assert gs.phi0 > 0
    phi, dphi = gs.evaluate(np.array([-1e-9, 1e-9]))
    assert abs(dphi[0] - dphi[1]) < 1e-6


def test_fd_method_matches_closed_form():
    f = classify(1.0, -0.5)
    a = minimize_band(f, method="fd")
    b = minimize_band(f)
    assert abs(a.beta_b - b.beta_b) < 1e-5
    assert abs(a.xi_b - b.xi_b) < 1e-4
    t = np.linspace(-3, 3, 13)
    assert np.max(np.abs(a.evaluate(t)[0] - b.evaluate(t)[0])) < 1e-4


def test_minimize_rejects_non_trapping():
    with pytest.raises(ValidationError):
        minimize_band(classify(1.0, 0.5))
    with pytest.raises(NoInteriorMinimum):
        minimize_band(classify(1.0, -0.5), xi_scan=(1.0, 3.0))


def test_decay_rate_positive_and_gaussian_like():
    gs = minimize_band(classify(1.0, -0.5))
    r = decay_rate(gs)
    assert r > 0
    # a weaker opposite field gives a slower tail
    gs2 = minimize_band(classify(1.0, -0.1))
    assert 0 < decay_rate(gs2) < r
