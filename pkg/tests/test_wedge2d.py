import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import jn_zeros

from magstep.errors import DegenerateEigenvalue, MeshTooCoarse, NoBoundState, ValidationError
from magstep.trialstate import WedgeGeometry, zeta
from magstep.wedge2d import (DomainSpec, EigenResult, GaugeField, Mesh, agmon_fit,
                             angular_partition, assemble_domain, assemble_wedge, exterior_eig,
                             ims_residual, lambda1_sweep, lambda_delta, lowest_eig,
                             plaquette_flux, radial_partition, richardson, smooth_random_vector,
                             symmetry_check)

S_FLAT = np.diag([-1.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-8, 8), length=st.floats(0.01, 3), x2=st.floats(-8, 8),
       delta=st.sampled_from([0.0, 0.05, 0.3]))
def test_link_is_exact_line_integral(a, length, x2, delta):
    f = GaugeField(1.0, -0.5, delta)
    pts = [0.0] + ([x2 / np.tan(delta)] if delta > 0 and x2 < 0 else [])
    ref = quad(lambda s: f.potential(s, x2), a, a + length, points=[p for p in pts if a < p < a + length])[0]
    assert abs(f.link(a, a + length, x2) - ref) < 1e-10


def test_potential_continuous_across_barrier():
    f = GaugeField(1.0, -0.5, 0.2)
    x1 = np.linspace(-5, 5, 41)
    x2 = np.where(x1 < 0, x1 * np.tan(0.2), 0.0)
    e = 1e-9
    assert np.max(np.abs(f.potential(x1, x2 - e) - f.potential(x1, x2 + e))) < 1e-8


def test_regions():
    f = GaugeField(1.0, -0.5, 0.2)
    assert f.region(1.0, -0.1) == 1 and f.region(1.0, 0.1) == 2
    assert f.region(-1.0, -0.1) == 2 and f.region(-1.0, -0.3) == 1


@pytest.fixture(scope="module")
def small_op():
    return assemble_wedge(GaugeField(1.0, -0.5, 0.3), 14.7, 0.19)


def test_operator_structure(small_op):
    M = small_op.matrix
    assert small_op.hermiticity_defect() == 0.0
    assert np.all(M.diagonal().real > 0)
    assert np.max(np.diff(M.indptr)) <= 5


def test_plaquette_flux_recovers_field(small_op):
    f = small_op.field
    flux, c1, c2 = plaquette_flux(small_op)
    C1, C2 = np.meshgrid(c1, c2, indexing="ij")
    want = np.where(f.region(C1, C2) == 1, f.b1, f.b2)
    h = small_op.mesh.h
    barrier = np.where(C1 < 0, C1 * np.tan(f.delta), 0.0)
    away = np.abs(C2 - barrier) > h
    assert np.max(np.abs(flux - want)[away]) < 1e-9
    # cut plaquettes carry the area-weighted mean of the two values
    lo, hi = min(f.b1, f.b2), max(f.b1, f.b2)
    assert np.all((flux >= lo - 1e-9) & (flux <= hi + 1e-9))


def test_gauge_invariance_of_spectrum(small_op):
    f = small_op.field
    g = WedgeGeometry.from_delta(f.delta)
    a = lowest_eig(small_op, k=3).eigenvalues
    op2 = assemble_wedge(f, 14.7, 0.19, node_phase=lambda x1, x2: zeta(g, f.b1, f.b2, x1, x2))
    b = lowest_eig(op2, k=3).eigenvalues
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(a)


def test_flat_barrier_translation_invariance():
    op = assemble_wedge(GaugeField(1.0, -0.5, 0.0), 6.0, 0.15)
    n1 = op.mesh.n1
    idx = op.index
    j = n1 - 7
    for i in (n1 - 5, n1 + 2):
        r0, r1 = idx[i, j], idx[i + 1, j]
        a = op.matrix[r0].toarray().ravel()
        b = op.matrix[r1].toarray().ravel()
        assert np.allclose(np.roll(a, idx[i + 1, j] - idx[i, j]), b, atol=1e-12)


def test_mesh_precondition():
    with pytest.raises(MeshTooCoarse):
        assemble_wedge(GaugeField(1.0, -0.5, 0.1), None, 0.2)
    with pytest.raises(ValidationError):
        assemble_wedge(GaugeField(1.0, -0.5, 0.1), 10.0, 0.1)
    with pytest.raises(MeshTooCoarse):
        assemble_domain(DomainSpec(1.0, -0.5, 0.1, B=100.0), 0.05)


def test_uniform_field_landau_level():
    r = lowest_eig(assemble_wedge(GaugeField(1.0, 1.0, 0.0), 6.0, 0.1), k=1)
    assert abs(r.eigenvalues[0] - 1.0) < 5e-3
    assert r.residuals[0] < 1e-9


def test_eigenvector_normalization():
    op = assemble_wedge(GaugeField(1.0, 1.0, 0.0), 3.0, 0.1)
    r = lowest_eig(op, k=2)
    assert abs(op.norm2(r.ground) - 1.0) < 1e-12
    assert abs(op.form(r.ground) - r.eigenvalues[0]) < 1e-9


def test_symmetry_check_symmetric_box():
    r = lowest_eig(assemble_wedge(GaugeField(1.0, 1.0, 0.0), 3.0, 0.1), k=2)
    assert symmetry_check(r, S_FLAT) < 5 * 0.1 ** 2


def test_symmetry_check_negative_control():
    op = assemble_wedge(GaugeField(1.0, 1.0, 0.0), 3.0, 0.1)
    X1, X2 = op.points
    rng = np.random.default_rng(0)
    bumps = sum(rng.uniform(1, 5) * np.exp(-((X1 - p) ** 2 + (X2 - q) ** 2))
                for p, q in rng.uniform(-2, 2, (3, 2)))
    op.matrix = (op.matrix + sp.diags(bumps)).tocsr()
    r = lowest_eig(op, k=2)
    assert symmetry_check(r, S_FLAT) > 0.05


def test_symmetry_check_needs_a_gap():
    r = lowest_eig(assemble_wedge(GaugeField(1.0, 1.0, 0.0), 3.0, 0.1), k=1)
    with pytest.raises(ValidationError):
        symmetry_check(r, S_FLAT)
    fake = EigenResult(np.array([1.0, 1.0]), r.eigenvectors.repeat(2, 1), np.array([1e-12, 1e-12]),
                       r.mesh, r.mask)
    with pytest.raises(DegenerateEigenvalue):
        symmetry_check(fake, S_FLAT)


def test_agmon_fit_recovers_known_rate():
    mesh = Mesh.square(10.0, 0.1)
    X1, X2 = np.meshgrid(mesh.x1, mesh.x2, indexing="ij")
    mask = np.ones(X1.shape, bool)
    u = np.exp(-0.7 * np.hypot(X1, X2)) * (1 + 0.5 * np.cos(np.arctan2(X2, X1)) ** 2)
    res = EigenResult(np.array([0.2]), u[mask][:, None].astype(complex), np.zeros(1), mesh, mask)
    assert abs(agmon_fit(res, 1.0) - 0.7) < 1e-2


def test_agmon_fit_without_bound_state():
    r = lowest_eig(assemble_wedge(GaugeField(1.0, 1.0, 0.0), 6.0, 0.1), k=1)
    with pytest.raises(NoBoundState):
        agmon_fit(r, 0.99)


def test_richardson_exact_for_quadratic_error():
    f = lambda h: 2.0 + 3.0 * h * h
    ext, err = richardson(f(0.1), f(0.05))
    assert abs(ext - 2.0) < 1e-14
    assert abs(err - 3.0 * 0.05 ** 2) < 1e-14


def test_lambda_delta_validation():
    with pytest.raises(ValidationError):
        lambda_delta(GaugeField(1.0, -0.5, 0.1), [0.5], 0.39)


def test_zero_field_disc():
    ref = jn_zeros(0, 1)[0] ** 2
    errs = []
    for h in (0.02, 0.01):
        lam = lowest_eig(assemble_domain(DomainSpec(0.0, 0.0, 0.0, 0.0, (1.0, 1.0)), h)).eigenvalues[0]
        errs.append(abs(lam - ref))
    # staircase boundary: first-order convergence towards the Bessel value
    assert errs[1] < errs[0] and errs[1] / ref < 0.02


def test_domain_spec():
    spec = DomainSpec(1.0, -0.5, 0.1)
    assert spec.contains(0.0, 0.0)
    lm, lp = spec.barrier_lengths
    c, s = np.cos(0.1), np.sin(0.1)
    assert abs((lm * c / 4) ** 2 + (lm * s / 2) ** 2 - 1) < 1e-12
    assert lp == 4.0
    with pytest.raises(ValidationError):
        DomainSpec(1.0, -0.5, 0.1, axes=(0.0, 1.0))


def test_domain_operator_masked():
    op = assemble_domain(DomainSpec(1.0, -0.5, 0.1, B=4.0), 0.09)
    X1, X2 = op.points
    assert np.all((X1 / 4) ** 2 + (X2 / 2) ** 2 < 1)
    assert op.hermiticity_defect() == 0.0


def test_small_sweep_trends():
    tab = lambda1_sweep(DomainSpec(1.0, -0.5, 0.1), [4.0, 8.0], 0.39)
    assert len(tab.rows) == 2 and len(tab.differences) == 1
    assert tab.differences[0] > 0
    with pytest.raises(ValidationError):
        lambda1_sweep(DomainSpec(1.0, -0.5, 0.1), [8.0, 4.0], 0.39)


def test_ims_trivial_partition_exact(small_op):
    v = smooth_random_vector(small_op, np.random.default_rng(0))
    n = small_op.size
    assert ims_residual(small_op, [np.ones(n)], [(np.zeros(n), np.zeros(n))], v) == 0.0


@pytest.mark.parametrize("partition", [radial_partition, angular_partition])
def test_ims_residual_second_order(partition):
    out = []
    for h in (0.1, 0.05):
        op = assemble_wedge(GaugeField(1.0, -0.5, 0.3), 14.7, h)
        v = smooth_random_vector(op, np.random.default_rng(4))
        chis, grads = partition(op, 3.0, 3.0)
        assert np.max(np.abs(sum(c * c for c in chis) - 1.0)) < 1e-12
        out.append(ims_residual(op, chis, grads, v))
        assert out[-1] < 10 * h * h
    assert 3.0 < out[0] / out[1] < 5.0


def test_exterior_eigenvalue_dominates(small_op):
    lam = lowest_eig(small_op).eigenvalues[0]
    assert exterior_eig(small_op, 2.0) >= lam
    assert exterior_eig(small_op, 4.0) >= exterior_eig(small_op, 2.0) - 1e-12
