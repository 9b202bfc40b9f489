"""Two-dimensional magnetic Laplacians with a broken-line barrier.

The barrier is the ray x1 > 0 of the x1-axis joined at the origin to the
ray x2 = x1 tan(delta), x1 < 0.  The field is b1 below it and b2 above it,
generated by the potential (A1, 0) with

    A1 = -b1 x2 + (b1 - b2) tan(delta) clip(x1, x2 / tan(delta), 0)   (x2 < 0)
    A1 = -b2 x2                                                      (x2 >= 0)

Operators are discretized on a uniform Cartesian mesh with gauge links:
each horizontal edge carries the phase exp(-i int A1 dx1), vertical edges
carry none.  Nodes outside the domain are Dirichlet zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import eigsh, splu, LinearOperator

from .defaults import DEFAULTS
from .errors import (DegenerateEigenvalue, MeshTooCoarse, NoBoundState, NotConverged,
                     ValidationError)


@dataclass(frozen=True)
class GaugeField:
    b1: float
    b2: float
    delta: float
    B: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 0.5 * np.pi:
            raise ValidationError("delta must lie in [0, pi/2)")

    @property
    def bmax(self) -> float:
        return abs(self.B) * max(abs(self.b1), abs(self.b2))

    def scaled(self, B: float) -> "GaugeField":
        return replace(self, B=float(B))

    def region(self, x1, x2):
        """1 below the barrier, 2 on or above it."""
        x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
        below = x2 < np.where(x1 < 0, x1 * np.tan(self.delta), 0.0)
        return np.where(below, 1, 2)

    def _cut(self, x2):
        """Abscissa where the tilted barrier crosses height x2 <= 0."""
        t = np.tan(self.delta)
        if t == 0.0:
            return np.full(np.shape(x2), -np.inf)
        return np.asarray(x2, float) / t

    def potential(self, x1, x2):
        """First component of the vector potential (the second is zero)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        t = np.tan(self.delta)
        c = np.where(x2 < 0, self._cut(np.minimum(x2, 0.0)), 0.0)
        low = -self.b1 * x2 + (self.b1 - self.b2) * t * np.clip(x1, c, 0.0)
        return self.B * np.where(x2 < 0, low, -self.b2 * x2)

    def _primitive(self, x1, x2):
        """Antiderivative in x1 of A1, vanishing at x1 = 0."""
        t = np.tan(self.delta)
        c = self._cut(np.minimum(x2, 0.0))
        mid = 0.5 * np.minimum(x1, 0.0) ** 2
        with np.errstate(invalid="ignore"):
            far = np.where(np.isfinite(c), c * x1 - 0.5 * c * c, 0.0)
        clipped = np.where(x1 < c, far, mid)
        low = -self.b1 * x2 * x1 + (self.b1 - self.b2) * t * clipped
        return self.B * np.where(x2 < 0, low, -self.b2 * x2 * x1)

    def link(self, x1a, x1b, x2):
        """Exact line integral of A1 along the horizontal segment at height x2."""
        x1a, x1b, x2 = np.broadcast_arrays(*(np.asarray(v, float) for v in (x1a, x1b, x2)))
        return self._primitive(x1b, x2) - self._primitive(x1a, x2)


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on [-R1, R1] x [-R2, R2] with a node at the origin."""

    h: float
    n1: int              # nodes are (k - n1) h, k = 0 .. 2 n1
    n2: int

    @property
    def x1(self):
        return (np.arange(2 * self.n1 + 1) - self.n1) * self.h

    @property
    def x2(self):
        return (np.arange(2 * self.n2 + 1) - self.n2) * self.h

    @classmethod
    def square(cls, R: float, h: float) -> "Mesh":
        n = int(np.ceil(R / h - 1e-9))
        return cls(float(h), n, n)


@dataclass
class SparseOperator2D:
    mesh: Mesh
    mask: np.ndarray                 # (len x1, len x2) True on unknowns
    index: np.ndarray                # node -> unknown number, -1 if Dirichlet
    matrix: sp.csr_matrix
    field: GaugeField
    meta: dict = dc_field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def points(self):
        X1, X2 = np.meshgrid(self.mesh.x1, self.mesh.x2, indexing="ij")
        return X1[self.mask], X2[self.mask]

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def form(self, v) -> float:
        """Discrete quadratic form h^2 sum over edges |D v|^2 / h^2."""
        return float(np.real(np.vdot(v, self.matrix @ v))) * self.mesh.h ** 2

    def norm2(self, v) -> float:
        return float(np.real(np.vdot(v, v))) * self.mesh.h ** 2


def _assemble(fld: GaugeField, mesh: Mesh, mask: np.ndarray, node_phase=None) -> SparseOperator2D:
    h = mesh.h
    x1, x2 = mesh.x1, mesh.x2
    mask = mask.copy()
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
    index = -np.ones(mask.shape, dtype=np.int64)
    index[mask] = np.arange(mask.sum())
    n = int(mask.sum())
    zeta = None
    if node_phase is not None:
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        zeta = node_phase(X1, X2)

    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 4.0 / h ** 2, complex)]
    # horizontal edges (i, j) -> (i + 1, j)
    ia, ib = index[:-1, :], index[1:, :]
    ok = (ia >= 0) & (ib >= 0)
    I, J = np.nonzero(ok)
    theta = fld.link(x1[I], x1[I + 1], x2[J])
    if zeta is not None:
        theta = theta + zeta[I + 1, J] - zeta[I, J]
    # (D v)_e = exp(-i theta) v_b - v_a, so M_ab = -exp(-i theta) / h^2
    w = -np.exp(-1j * theta) / h ** 2
    rows += [ia[ok], ib[ok]]
    cols += [ib[ok], ia[ok]]
    vals += [w, np.conj(w)]
    # vertical edges
    ia, ib = index[:, :-1], index[:, 1:]
    ok = (ia >= 0) & (ib >= 0)
    w = np.full(ok.sum(), -1.0 / h ** 2, complex)
    if zeta is not None:
        I, J = np.nonzero(ok)
        w = w * np.exp(-1j * (zeta[I, J + 1] - zeta[I, J]))
    rows += [ia[ok], ib[ok]]
    cols += [ib[ok], ia[ok]]
    vals += [w, np.conj(w)]
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return SparseOperator2D(mesh, mask, index, M, fld)


def _check_mesh(fld: GaugeField, h: float):
    bmax = fld.bmax
    if bmax > 0 and not h < 0.2 / np.sqrt(bmax):
        raise MeshTooCoarse(f"h = {h} does not resolve the magnetic length (need h < {0.2 / np.sqrt(bmax):.4g})")


def default_r_trunc(delta: float) -> float:
    ell = 1.0 / np.sqrt(delta) if delta > 0 else 0.0
    return max(8.0 * ell, DEFAULTS["r_trunc_min"])


def assemble_wedge(fld: GaugeField, R_trunc: float | None = None, h: float | None = None,
                   node_phase=None) -> SparseOperator2D:
    """Gauge-link operator on the square of half-width R_trunc, Dirichlet outside.

    node_phase(x1, x2), if given, multiplies every node by exp(i node_phase),
    which is a discrete gauge change and leaves the spectrum invariant.
    """
    h = DEFAULTS["mesh_h"] if h is None else float(h)
    R = default_r_trunc(fld.delta) if R_trunc is None else float(R_trunc)
    _check_mesh(fld, h)
    if fld.delta > 0 and R < 8.0 / np.sqrt(fld.delta) - 1e-12:
        raise ValidationError("truncation box must be at least 8 delta^(-1/2)")
    mesh = Mesh.square(R, h)
    mask = np.ones((2 * mesh.n1 + 1, 2 * mesh.n2 + 1), bool)
    op = _assemble(fld, mesh, mask, node_phase)
    op.meta.update(kind="wedge", R_trunc=mesh.n1 * h, h=h)
    return op


def plaquette_flux(op: SparseOperator2D):
    """Field recovered per plaquette from the link phases, with plaquette centres."""
    m, fld = op.mesh, op.field
    x1, x2 = m.x1, m.x2
    bottom = fld.link(x1[:-1, None], x1[1:, None], x2[None, :-1])
    top = fld.link(x1[:-1, None], x1[1:, None], x2[None, 1:])
    # counter-clockwise circulation of A; vertical edges contribute nothing
    flux = bottom - top
    c1 = 0.5 * (x1[:-1] + x1[1:])
    c2 = 0.5 * (x2[:-1] + x2[1:])
    return flux / m.h ** 2, c1, c2


# ---------------------------------------------------------------------------
# eigenvalues

@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray        # columns, normalized so that h^2 sum |u|^2 = 1
    residuals: np.ndarray
    mesh: Mesh
    mask: np.ndarray
    extrapolated: float | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def ground(self):
        return self.eigenvectors[:, 0]

    def grid_values(self, k: int = 0) -> np.ndarray:
        u = np.zeros(self.mask.shape, complex)
        u[self.mask] = self.eigenvectors[:, k]
        return u


def lowest_eig(op: SparseOperator2D, k: int = 1, shift: float = 0.0, tol: float | None = None,
               rtol: float | None = None) -> EigenResult:
    """k smallest eigenvalues by shift-invert Lanczos with a shift below the spectrum."""
    if k < 1 or k >= op.size - 1:
        raise ValidationError("need 1 <= k < size - 1")
    if op.hermiticity_defect() > 0.0:
        raise ValidationError("operator is not Hermitian")
    rtol = DEFAULTS["eig_rtol"] if rtol is None else rtol
    M = op.matrix.tocsc()
    lu = splu((M - shift * sp.identity(op.size, format="csc")).tocsc())
    OPinv = LinearOperator(M.shape, matvec=lu.solve, dtype=complex)
    v0 = np.ones(op.size, complex)     # deterministic start vector
    try:
        vals, vecs = eigsh(M, k=k, sigma=shift, OPinv=OPinv, which="LM", v0=v0,
                           tol=0.0 if tol is None else tol)
    except Exception as exc:           # ARPACK convergence failures
        raise NotConverged(str(exc)) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    h = op.mesh.h
    res = np.array([np.linalg.norm(M @ vecs[:, i] - vals[i] * vecs[:, i]) / np.linalg.norm(vecs[:, i])
                    for i in range(k)])
    if np.any(res > rtol * np.maximum(1.0, np.abs(vals)) * 1e3):
        raise NotConverged(f"eigen-residuals {res} too large")
    vecs = vecs / (np.linalg.norm(vecs, axis=0) * h)
    # fix the global phase: largest entry real and positive
    imax = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * (np.abs(vecs[imax, range(k)]) / vecs[imax, range(k)])[None, :]
    return EigenResult(vals.real.astype(float), vecs, res, op.mesh, op.mask,
                       meta=dict(op.meta))


def richardson(coarse: float, fine: float, order: float = 2.0):
    """Extrapolated value and error estimate from meshes h and h/2."""
    f = 2.0 ** order
    ext = (f * fine - coarse) / (f - 1.0)
    return ext, abs(ext - fine)


@dataclass(frozen=True)
class DeltaRow:
    delta: float
    lam_coarse: float
    lam_fine: float
    lam: float
    error: float
    gap: float
    fine: EigenResult | None = dc_field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class DeltaTable:
    rows: tuple
    beta: float
    coefficient: float


def lambda_delta(fld: GaugeField, delta_values, beta: float, h: float | None = None,
                 R_trunc: float | None = None, keep: bool = False) -> DeltaTable:
    """Ground energy for each delta on meshes h and h/2 with Richardson extrapolation.

    The gap coefficient is the least-squares C in beta - lambda = C delta^2.
    With keep, each row also holds the two lowest eigenpairs on the fine mesh.
    """
    h = DEFAULTS["mesh_h"] if h is None else h
    rows = []
    for d in delta_values:
        if not 0.0 < d <= 0.3:
            raise ValidationError("delta must lie in (0, 0.3]")
        g = replace(fld, delta=float(d))
        lc = lowest_eig(assemble_wedge(g, R_trunc, h)).eigenvalues[0]
        fine = lowest_eig(assemble_wedge(g, R_trunc, h / 2), k=2 if keep else 1)
        lf = fine.eigenvalues[0]
        lam, err = richardson(lc, lf)
        rows.append(DeltaRow(float(d), float(lc), float(lf), float(lam), float(err),
                             float(beta - lam), fine if keep else None))
    d2 = np.array([r.delta for r in rows]) ** 2
    gaps = np.array([r.gap for r in rows])
    coef = float(np.dot(gaps, d2) / np.dot(d2, d2))
    return DeltaTable(tuple(rows), float(beta), coef)


# ---------------------------------------------------------------------------
# diagnostics

def _reflection(geom) -> np.ndarray:
    S = getattr(geom, "S", geom)
    S = np.asarray(S, float)
    if S.shape != (2, 2):
        raise ValidationError("expected a geometry with a 2x2 reflection")
    return S


def symmetry_check(res: EigenResult, geom, k: int = 0) -> float:
    """max | |u(x)| - |u(S x)| | over mesh nodes whose image lies in the mesh.

    geom is anything with a 2x2 reflection matrix S (or the matrix itself).
    The eigenvalue must be separated from its neighbours by more than
    gap_factor times the residual.
    """
    S = _reflection(geom)
    vals = res.eigenvalues
    if len(vals) < 2:
        raise ValidationError("need at least two eigenpairs to certify simplicity")
    gaps = np.abs(np.delete(vals, k) - vals[k])
    if gaps.min() <= DEFAULTS["gap_factor"] * res.residuals[k]:
        raise DegenerateEigenvalue(f"eigenvalue {vals[k]} is not separated from its neighbours")
    m = res.mesh
    u = np.abs(res.grid_values(k))
    interp = RegularGridInterpolator((m.x1, m.x2), u, bounds_error=False, fill_value=np.nan)
    X1, X2 = np.meshgrid(m.x1, m.x2, indexing="ij")
    Y1 = S[0, 0] * X1 + S[0, 1] * X2
    Y2 = S[1, 0] * X1 + S[1, 1] * X2
    img = interp(np.stack([Y1.ravel(), Y2.ravel()], 1)).reshape(u.shape)
    diff = np.abs(u - img)
    return float(np.nanmax(diff))


def agmon_fit(res: EigenResult, beta: float, k: int = 0, bins: int = 24) -> float:
    """Exponential decay rate of the eigenvector envelope.

    The envelope is max |u| over thin circular shells of the annulus
    0.3 R < |x| < 0.7 R; log of it is fitted linearly in |x|.
    """
    lam = res.eigenvalues[k]
    if lam >= beta:
        raise NoBoundState(f"lambda = {lam} is not below beta = {beta}")
    m = res.mesh
    R = min(m.n1, m.n2) * m.h
    X1, X2 = np.meshgrid(m.x1, m.x2, indexing="ij")
    r = np.hypot(X1, X2)
    u = np.abs(res.grid_values(k))
    edges = np.linspace(0.3 * R, 0.7 * R, bins + 1)
    rc, env = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (r >= a) & (r < b)
        if sel.any() and u[sel].max() > 0:
            rc.append(0.5 * (a + b))
            env.append(np.log(u[sel].max()))
    if len(rc) < 3:
        raise ValidationError("annulus too thin for a decay fit")
    slope = np.polyfit(rc, env, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# bounded domain

@dataclass(frozen=True)
class DomainSpec:
    b1: float
    b2: float
    delta: float
    B: float = 1.0
    axes: tuple = (4.0, 2.0)         # ellipse semi-axes

    def __post_init__(self):
        a, b = self.axes
        if a <= 0 or b <= 0:
            raise ValidationError("ellipse axes must be positive")

    def contains(self, x1, x2):
        a, b = self.axes
        return (x1 / a) ** 2 + (x2 / b) ** 2 < 1.0

    @property
    def barrier_lengths(self):
        """(L_minus, L_plus): lengths of the tilted and flat barrier pieces inside the ellipse."""
        a, b = self.axes
        c, s = np.cos(self.delta), np.sin(self.delta)
        return float(1.0 / np.hypot(c / a, s / b)), float(a)

    def field(self) -> GaugeField:
        return GaugeField(self.b1, self.b2, self.delta, self.B)


def assemble_domain(spec: DomainSpec, h: float) -> SparseOperator2D:
    fld = spec.field()
    if not h <= 0.2 / np.sqrt(max(abs(spec.B), 1e-300)) or (fld.bmax > 0 and not h < 0.2 / np.sqrt(fld.bmax) + 1e-15):
        raise MeshTooCoarse(f"h = {h} does not resolve the magnetic length at B = {spec.B}")
    a, b = spec.axes
    mesh = Mesh(float(h), int(np.ceil(a / h)) + 1, int(np.ceil(b / h)) + 1)
    X1, X2 = np.meshgrid(mesh.x1, mesh.x2, indexing="ij")
    op = _assemble(fld, mesh, spec.contains(X1, X2))
    op.meta.update(kind="domain", B=spec.B, h=h, axes=tuple(spec.axes))
    return op


@dataclass(frozen=True)
class SweepRow:
    B: float
    lam_coarse: float
    lam_fine: float
    lam1: float                     # extrapolated to zero mesh width
    ratio: float
    excess: float                   # lam1 - B lam_ref
    concentration: float


@dataclass(frozen=True)
class SweepTable:
    rows: tuple
    lam_ref: float
    hB: tuple
    differences: tuple
    from_above: bool
    error_decreasing: bool
    increasing_top_half: bool


def lambda1_sweep(template: DomainSpec, B_values, lam_ref: float, hB=(0.19, 0.13),
                  radius: float = 3.0) -> SweepTable:
    """Ground energy on the domain for each B, with trend diagnostics.

    Each B is solved on two meshes h = hB / sqrt(B) (a fixed number of nodes
    per magnetic length) and extrapolated to h = 0 assuming O(h^2) error.
    concentration is the fraction of |u|^2 within radius * B^(-1/4) of the
    corner, on the finer mesh.
    """
    Bs = [float(B) for B in B_values]
    if any(b2 <= b1 for b1, b2 in zip(Bs, Bs[1:])):
        raise ValidationError("B values must be ascending")
    hc, hf = hB
    if not hf < hc:
        raise ValidationError("hB must list the coarse mesh first")
    rows = []
    for B in Bs:
        spec = replace(template, B=B)
        lc = lowest_eig(assemble_domain(spec, hc / np.sqrt(B))).eigenvalues[0]
        op = assemble_domain(spec, hf / np.sqrt(B))
        res = lowest_eig(op)
        lf = res.eigenvalues[0]
        lam = (lf * hc ** 2 - lc * hf ** 2) / (hc ** 2 - hf ** 2)
        X1, X2 = op.points
        w = np.abs(res.ground) ** 2
        conc = float(w[np.hypot(X1, X2) < radius * B ** -0.25].sum() / w.sum())
        rows.append(SweepRow(B, float(lc), float(lf), float(lam), float(lam / B),
                             float(lam - B * lam_ref), conc))
    diffs = tuple(float(b.lam1 - a.lam1) for a, b in zip(rows, rows[1:]))
    err = [abs(r.ratio - lam_ref) for r in rows]
    top = diffs[len(diffs) // 2:]
    return SweepTable(tuple(rows), float(lam_ref), (float(hc), float(hf)), diffs,
                      all(r.ratio > lam_ref for r in rows),
                      all(b < a for a, b in zip(err, err[1:])),
                      all(d > 0 for d in top))


# ---------------------------------------------------------------------------
# threshold at delta = 0

@dataclass(frozen=True)
class ThresholdStudy:
    beta: float
    R: float
    hs: tuple
    lams: tuple                     # lowest eigenvalue per mesh width, box R
    order: float                    # fitted p in lam = L + a h^p
    limit_h: float                  # L, box R
    lam_2R: float                   # coarsest-but-one mesh, box 2R
    limit: float                    # extrapolated in h and in R
    error: float                    # size of the box correction

    @property
    def from_above(self) -> bool:
        return all(l > self.beta for l in self.lams)


def threshold_study(fld: GaugeField, beta: float, R: float = 20.0,
                    hs=(0.16, 0.1, 0.1 / np.sqrt(2.0), 0.05)) -> ThresholdStudy:
    """Flat-barrier ground energy under mesh refinement and box enlargement.

    At delta = 0 the truncated box only adds the longitudinal kinetic energy
    of a standing wave, c / R^2.  The mesh limit L(R) comes from a three
    parameter fit L + a h^p; the box 2R is solved on the second mesh and
    shifted by the same mesh error, then the pair L(R), L(2R) is extrapolated
    in 1/R^2.
    """
    from scipy.optimize import curve_fit

    if fld.delta != 0.0:
        raise ValidationError("threshold study needs a flat barrier")
    hs = tuple(float(h) for h in hs)
    lams = tuple(float(lowest_eig(assemble_wedge(fld, R, h)).eigenvalues[0]) for h in hs)
    y, hh = np.array(lams), np.array(hs)
    (L, a, p), _ = curve_fit(lambda x, L, a, p: L + a * x ** p, hh, y,
                             p0=(y[-1], (y[0] - y[-1]) / hh[0] ** 2, 2.0), maxfev=20000)
    h2 = hs[1]
    lam2 = float(lowest_eig(assemble_wedge(fld, 2 * R, h2)).eigenvalues[0])
    L2 = lam2 - (lams[1] - L)
    limit = L2 - (L - L2) / 3.0
    return ThresholdStudy(float(beta), float(R), hs, lams, float(p), float(L), lam2,
                          float(limit), float(abs(limit - L2)))


# ---------------------------------------------------------------------------
# localization identity

def ims_residual(op: SparseOperator2D, chis, grads, v) -> float:
    """Relative residual of Q(v) = sum Q(chi_j v) - sum ||grad chi_j v||^2.

    chis and grads hold, per partition function, its values and gradient
    components at the unknowns; the partition must satisfy sum chi_j^2 = 1.
    """
    q = op.form(v)
    rhs = 0.0
    for chi, (g1, g2) in zip(chis, grads):
        rhs += op.form(chi * v) - op.norm2(np.hypot(g1, g2) * v)
    return abs(q - rhs) / abs(q)


def smooth_random_vector(op: SparseOperator2D, rng, n: int = 6, width: float = 2.0,
                         spread: float = 4.0):
    """Sum of n Gaussian wave packets with random centres, momenta and weights."""
    X1, X2 = op.points
    v = np.zeros(X1.shape, complex)
    for _ in range(n):
        p = rng.uniform(-spread, spread, 2)
        k = rng.normal(0.0, 1.0, 2)
        c = rng.normal() + 1j * rng.normal()
        r2 = (X1 - p[0]) ** 2 + (X2 - p[1]) ** 2
        v += c * np.exp(-r2 / (2 * width ** 2) + 1j * (k[0] * X1 + k[1] * X2))
    return v


def _smoothstep(u):
    from .trialstate import _smoothstep as f
    return f(u)


def radial_partition(op: SparseOperator2D, r0: float, width: float):
    """Inner and outer functions of |x| with chi_in^2 + chi_out^2 = 1.

    The switch happens on r0 < |x| < r0 + width.  Returns values and
    gradients at the unknowns.
    """
    X1, X2 = op.points
    r = np.hypot(X1, X2)
    a, da = _smoothstep((r - r0) / width)
    da = da / width
    q = 0.5 * np.pi
    ci, co = np.cos(q * a), np.sin(q * a)
    rr = np.where(r > 0, r, 1.0)
    e1, e2 = X1 / rr, X2 / rr
    gi, go = -q * co * da, q * ci * da
    return [ci, co], [(gi * e1, gi * e2), (go * e1, go * e2)]


def angular_partition(op: SparseOperator2D, r0: float, width: float):
    """Inner radial function plus two angular pieces of the outer one.

    The first angular factor equals 1 for |theta| <= pi/2 and vanishes for
    |theta| >= 2 pi/3 (theta in (-pi, pi]), the second completes the sum of
    squares.
    """
    (ci, co), (gi, go) = radial_partition(op, r0, width)
    X1, X2 = op.points
    th = np.arctan2(X2, X1)
    w = np.pi / 6
    a, da = _smoothstep((np.abs(th) - 0.5 * np.pi) / w)
    da = da * np.sign(th) / w
    q = 0.5 * np.pi
    c1, c2 = np.cos(q * a), np.sin(q * a)
    d1, d2 = -q * c2 * da, q * c1 * da
    r2 = np.where(X1 ** 2 + X2 ** 2 > 0, X1 ** 2 + X2 ** 2, 1.0)
    t1, t2 = -X2 / r2, X1 / r2              # gradient of theta
    # the angular factors are only used where chi_out > 0, i.e. away from 0
    chis = [ci, co * c1, co * c2]
    grads = [gi,
             (go[0] * c1 + co * d1 * t1, go[1] * c1 + co * d1 * t2),
             (go[0] * c2 + co * d2 * t1, go[1] * c2 + co * d2 * t2)]
    return chis, grads


def exterior_quotient(op: SparseOperator2D, v, R: float, width: float | None = None) -> float:
    """Q(chi v) / ||chi v||^2 for the outer radial cut-off chi switching on R < |x| < 2R."""
    width = R if width is None else width
    (_, co), _ = radial_partition(op, R, width)
    w = co * v
    return op.form(w) / op.norm2(w)


def exterior_eig(op: SparseOperator2D, R: float) -> float:
    """Lowest eigenvalue with an extra Dirichlet condition on the disc |x| <= R.

    This is the infimum of Q(w) / ||w||^2 over discrete w vanishing near the
    corner, the quantity bounded below by beta - C / R^2.
    """
    X1, X2 = op.points
    keep = np.nonzero(np.hypot(X1, X2) > R)[0]
    sub = op.matrix[keep][:, keep]
    mask = np.zeros_like(op.mask)
    mask[op.mask] = np.hypot(X1, X2) > R
    restricted = SparseOperator2D(op.mesh, mask, -np.ones_like(op.index), sub.tocsr(), op.field)
    return float(lowest_eig(restricted).eigenvalues[0])
