import numpy as np
import pytest
from scipy.integrate import quad

from magstep.errors import ValidationError
from magstep.fiber1d import classify, minimize_band
from magstep.moments import moment
from magstep.trialstate import (OUTSIDE, REGIONS, T1MINUS, T1PLUS, T2MINUS, T2PLUS, V1MINUS,
                                V1PLUS, V2MINUS, V2PLUS, QuadSpec, WedgeGeometry, _smoothstep,
                                branch, build_trial, bump, continuity_check, eval_trial,
                                interfaces, l2_breakdown, l2_reference, make_phase,
                                modulus_symmetry, rayleigh, rayleigh_with_error, region_energy,
                                region_nodes, region_of, sector_j)


@pytest.fixture(scope="module")
def gs():
    return minimize_band(classify(1.0, -0.5))


@pytest.fixture(scope="module")
def ts(gs):
    return build_trial(gs, 0.005)


def test_reflection_is_an_involution():
    g = WedgeGeometry.from_delta(0.1)
    assert np.allclose(g.S @ g.S, np.eye(2))
    assert abs(np.linalg.det(g.S) + 1) < 1e-15
    # S swaps the two barrier rays
    y = g.S @ np.array([1.0, 0.0])
    assert np.allclose(y, [-np.cos(0.1), -np.sin(0.1)])


def test_geometry_rejects_bad_angle():
    for d in (0.0, -0.1, 2.0):
        with pytest.raises(ValidationError):
            WedgeGeometry.from_delta(d)


def test_smoothstep_derivative():
    u = np.linspace(0.05, 0.95, 19)
    s, ds = _smoothstep(u)
    e = 1e-6
    num = (_smoothstep(u + e)[0] - _smoothstep(u - e)[0]) / (2 * e)
    assert np.max(np.abs(ds - num)) < 1e-6
    assert _smoothstep(np.array([-1.0, 0.0]))[0].tolist() == [0.0, 0.0]
    assert _smoothstep(np.array([1.0, 2.0]))[0].tolist() == [1.0, 1.0]


def test_bump_plateau_and_support():
    c, _ = bump(np.array([-0.5, 0.0, 0.4, 0.5]))
    assert np.all(c == 1.0)
    c, dc = bump(np.array([-1.0, 1.0, 1.5]))
    assert np.all(c == 0.0) and np.all(dc == 0.0)


def test_interpolation_weights_at_edges(gs):
    g = WedgeGeometry.from_delta(0.01)
    ph = make_phase(g, gs)
    d, gam = g.delta, g.gamma
    assert abs(ph.h(2, 0.5 * (np.pi + d - gam)) + 1) < 1e-12
    assert abs(ph.h(2, 0.5 * (np.pi + d + gam)) - 1) < 1e-12
    assert abs(ph.h(1, 0.5 * (3 * np.pi + d + gam)) + 1) < 1e-12
    assert abs(ph.h(1, 0.5 * (3 * np.pi + d - gam)) - 1) < 1e-12


def test_eta_norms_closed_form(ts):
    n2, d2 = ts.eta_norms()
    eps = ts.eta_plateau
    f = eps + quad(lambda s: ts.eta(s)[0] ** 2, eps, np.inf, limit=200)[0]
    g = quad(lambda s: ts.eta(s)[1] ** 2, ts.eta_plateau, np.inf, limit=200)[0]
    assert abs(f - n2) < 1e-8 * n2
    assert abs(g - d2) < 1e-10


def test_build_trial_validation(gs):
    with pytest.raises(ValidationError):
        build_trial(gs, 0.1, eta_plateau=0.1)


def test_region_partition_is_reflection_covariant(ts):
    rng = np.random.default_rng(1)
    ell = ts.geometry.ell
    x = np.column_stack([rng.uniform(-40, 40, 4000), rng.uniform(-1.2 * ell, 1.2 * ell, 4000)])
    tags = region_of(x, ts.geometry)
    y = np.column_stack(ts.geometry.reflect(x[:, 0], x[:, 1]))
    tags_y = region_of(y, ts.geometry)
    swap = {t: t.replace("plus", "X").replace("minus", "plus").replace("X", "minus") for t in REGIONS}
    swap[OUTSIDE] = OUTSIDE
    inner = np.abs(x[:, 1]) < 0.8 * ell
    assert all(swap[a] == b for a, b in zip(tags[inner], tags_y[inner]))
    assert set(tags[inner]) == set(REGIONS)


@pytest.mark.parametrize("tag", REGIONS)
def test_branch_gradients_match_finite_differences(ts, tag):
    x1, x2, _ = region_nodes(ts, tag, QuadSpec(order=4, panel=1.0, angular=4, laguerre=4))
    near = np.nonzero(np.hypot(x1, x2) < 30.0)[0]      # keep round-off in the differences small
    sel = near[np.linspace(0, near.size - 1, 12).astype(int)]
    x1, x2 = x1[sel], x2[sel]
    rho, S, (g1, g2), (a1, a2) = branch(ts, tag, x1, x2)
    sig = ts.gs.field.b1 if tag[1] == "1" else ts.gs.field.b2
    e = 1e-6
    f = lambda u, v: branch(ts, tag, u, v)
    r1 = (f(x1 + e, x2)[0] - f(x1 - e, x2)[0]) / (2 * e)
    r2 = (f(x1, x2 + e)[0] - f(x1, x2 - e)[0]) / (2 * e)
    s1 = (f(x1 + e, x2)[1] - f(x1 - e, x2)[1]) / (2 * e)
    s2 = (f(x1, x2 + e)[1] - f(x1, x2 - e)[1]) / (2 * e)
    assert np.max(np.abs(r1 - g1)) < 1e-6
    assert np.max(np.abs(r2 - g2)) < 1e-6
    # a = grad S - sigma A with A = (-x2, 0)
    assert np.max(np.abs(s1 + sig * x2 - a1)) < 1e-5
    assert np.max(np.abs(s2 - a2)) < 1e-5


def test_interfaces_cover_eight_rays(ts):
    assert len(interfaces(ts.geometry)) == 8


def test_physical_state_continuous(ts):
    jumps = continuity_check(ts, n=300, seed=3)
    assert max(jumps.values()) < 1e-12


def test_modulus_symmetric(ts):
    assert modulus_symmetry(ts, seed=2) < 1e-12


def test_strip_energies_mirror(ts):
    for p, m in ((T1PLUS, T1MINUS), (T2PLUS, T2MINUS)):
        a, b = region_energy(ts, p), region_energy(ts, m)
        assert abs(a - b) < 1e-10 * abs(a)


def test_plus_minus_norms_equal(ts):
    plus, minus, total = l2_breakdown(ts)
    assert abs(plus - minus) < 1e-10 * plus
    assert abs(total - l2_reference(ts)) < 10 * ts.geometry.delta ** 3


def test_sector_energies_leading_order(ts, gs):
    d = ts.geometry.delta
    for tag, side in ((V2PLUS, 2), (V2MINUS, 2), (V1PLUS, 1), (V1MINUS, 1)):
        ref = 0.5 * np.sqrt(d) * sector_j(gs, d, side)
        assert abs(region_energy(ts, tag) - ref) < 5 * d ** 1.5


def test_eval_trial_vanishes_outside(ts):
    ell = ts.geometry.ell
    assert eval_trial(ts, np.array([3.0, 1.01 * ell])) == 0


def test_quadrature_refinement_stable(ts):
    q, err = rayleigh_with_error(ts)
    assert err < 1e-12
    e, n, q2 = rayleigh(ts)
    assert abs(q - q2) < 1e-13


@pytest.mark.parametrize("delta", [0.005, 0.0025])
def test_rayleigh_bound_at_small_angle(gs, delta):
    """Below the cut-off transition the quotient drops under beta at order delta^2."""
    m3 = moment(gs, 3).value
    _, _, q = rayleigh(build_trial(gs, delta))
    gap = gs.beta_b - q
    assert gap > 0
    assert gap / delta ** 2 >= 0.5 * m3 ** 2 / 4


def test_wrong_orientation_has_no_gain():
    g = minimize_band(classify(-0.5, 1.0))
    _, _, q = rayleigh(build_trial(g, 0.005))
    assert q > g.beta_b
