"""One-dimensional fiber operators of a magnetic step.

For a step field b = (b1, b2) and a momentum xi the fiber operator is

    h[xi] = -d^2/dt^2 + (sigma(t) t + xi)^2,   sigma = b1 on t < 0, b2 on t > 0,

acting on the real line.  Three independent routes to its lowest eigenvalue
are provided:

* a second-order finite-difference matrix (``mu``),
* the closed form in parabolic cylinder functions D_nu (``mu_weber``),
* shooting with an adaptive ODE integrator (``weber_solve``).

``degennes_oracle`` computes the half-line Neumann constant Theta_0 with a
Chebyshev collocation scheme that shares no code with the three routes.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar
from scipy.special import pbdv

from .defaults import DEFAULTS
from .errors import (NoInteriorMinimum, NoRoot, NotConverged, ValidationError,
                     ZeroField)

MAGNETIC_WALL = "MagneticWall"
TRAPPING = "Trapping"
SYMMETRIC_TRAPPING = "SymmetricTrapping"
NON_TRAPPING = "NonTrapping"
UNIFORM = "Uniform"
OTHER = "Other"


@dataclass(frozen=True)
class StepField:
    """Field values below (b1) and above (b2) the barrier, after rescaling."""

    b1: float
    b2: float
    case: str
    scale: float = 1.0

    def sigma(self, t):
        return np.where(np.asarray(t) < 0, self.b1, self.b2)

    def reflected(self) -> "StepField":
        return classify(self.b2, self.b1)

    @property
    def bmin(self) -> float:
        return min(1.0, abs(self.b1), abs(self.b2))


def _case(b1: float, b2: float) -> str:
    pair = {b1, b2}
    if pair == {0.0, 1.0}:
        return MAGNETIC_WALL
    if b1 == b2:
        return UNIFORM
    if pair == {-1.0, 1.0}:
        return SYMMETRIC_TRAPPING
    other = b2 if b1 == 1.0 else (b1 if b2 == 1.0 else None)
    if other is None:
        return OTHER
    if -1.0 < other < 0.0:
        return TRAPPING
    if 0.0 < other < 1.0:
        return NON_TRAPPING
    return OTHER


def classify(b1: float, b2: float) -> StepField:
    """Rescale so that max(|b1|, |b2|) = 1 and tag the trapping case."""
    b1, b2 = float(b1), float(b2)
    if b1 == 0.0 and b2 == 0.0:
        raise ZeroField("b1 = b2 = 0 has no magnetic field")
    scale = max(abs(b1), abs(b2))
    c1, c2 = b1 / scale, b2 / scale
    return StepField(c1, c2, _case(c1, c2), scale)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [t_min, t_max] with a node exactly at t = 0."""

    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if not (self.t_min < 0.0 < self.t_max) or self.n < 9:
            raise ValidationError(f"invalid grid {self}")
        k = -self.t_min / self.h
        if abs(k - round(k)) > 1e-9:
            raise ValidationError("grid has no node at t = 0")

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / (self.n - 1)

    @property
    def i0(self) -> int:
        return int(round(-self.t_min / self.h))

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.n) - self.i0) * self.h

    def refined(self) -> "Grid1D":
        return Grid1D(self.t_min, self.t_max, 2 * self.n - 1)

    @classmethod
    def symmetric(cls, L: float, n: int) -> "Grid1D":
        if n % 2 == 0:
            raise ValidationError("symmetric grid needs an odd node count")
        return cls(-L, L, n)

    @classmethod
    def default(cls, fld: StepField, n: int | None = None) -> "Grid1D":
        L = DEFAULTS["fiber_L_scale"] / np.sqrt(fld.bmin)
        return cls.symmetric(L, n or DEFAULTS["fiber_n"])


@dataclass(frozen=True)
class BandPoint:
    xi: float
    mu: float
    residual: float


@dataclass(frozen=True)
class FiberMatrix:
    """Symmetric tridiagonal matrix on the interior nodes (Dirichlet ends)."""

    diag: np.ndarray
    off: np.ndarray
    t: np.ndarray


@dataclass(frozen=True)
class GroundState1D:
    field: StepField
    xi_b: float
    beta_b: float
    grid: Grid1D
    phi: np.ndarray
    phi0: float
    dphi0: float
    dphi: np.ndarray = dc_field(repr=False)
    method: str = "weber"

    def evaluate(self, t):
        """phi and phi' at arbitrary points.

        The closed-form state is evaluated exactly; a finite-difference state
        is interpolated by cubic Hermite splines on each side of t = 0 and is
        zero beyond the grid.
        """
        t = np.asarray(t, dtype=float)
        if self.method == "weber":
            u, du = weber_profile(self.field, self.xi_b, self.beta_b, t)
            return self.phi0 * u, self.phi0 * du
        g, i0 = self.grid, self.grid.i0
        tt = g.t
        phi = np.zeros_like(t)
        dphi = np.zeros_like(t)
        for sl, m in ((slice(None, i0 + 1), (t < 0) & (t >= tt[0])),
                      (slice(i0, None), (t >= 0) & (t <= tt[-1]))):
            d2 = (potential(self.field, self.xi_b, tt[sl]) - self.beta_b) * self.phi[sl]
            phi[m] = CubicHermiteSpline(tt[sl], self.phi[sl], self.dphi[sl])(t[m])
            dphi[m] = CubicHermiteSpline(tt[sl], self.dphi[sl], d2)(t[m])
        return phi, dphi


def potential(fld: StepField, xi: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.where(t < 0, fld.b1 * t + xi, fld.b2 * t + xi) ** 2


def assemble_fiber(fld: StepField, xi: float, grid: Grid1D) -> FiberMatrix:
    t = grid.t[1:-1]
    h2 = grid.h ** 2
    diag = 2.0 / h2 + potential(fld, xi, t)
    off = np.full(t.size - 1, -1.0 / h2)
    return FiberMatrix(diag, off, t)


def _fd_ground(fld, xi, grid):
    A = assemble_fiber(fld, xi, grid)
    w, v = eigh_tridiagonal(A.diag, A.off, select="i", select_range=(0, 0),
                            lapack_driver="stebz")
    vec = v[:, 0]
    r = A.diag * vec
    r[:-1] += A.off * vec[1:]
    r[1:] += A.off * vec[:-1]
    res = float(np.linalg.norm(r - w[0] * vec))
    return float(w[0]), vec, res, A


def mu(fld: StepField, xi: float, grid: Grid1D | None = None,
       tol: float | None = None) -> BandPoint:
    """Lowest eigenvalue of the finite-difference fiber matrix."""
    grid = grid or Grid1D.default(fld)
    tol = DEFAULTS["eig_tol"] if tol is None else tol
    val, _, res, A = _fd_ground(fld, xi, grid)
    scale = float(np.max(np.abs(A.diag)) + 2 * abs(A.off[0]))
    if res > tol * scale:
        raise NotConverged(f"fiber eigen-residual {res:.3e}")
    return BandPoint(float(xi), val, res)


def band_curve(fld: StepField, xi_values, grid: Grid1D | None = None):
    xi_values = np.asarray(xi_values, dtype=float)
    if not np.all(np.isfinite(xi_values)):
        raise ValidationError("xi values must be finite")
    grid = grid or Grid1D.default(fld)
    return [mu(fld, x, grid) for x in xi_values]


# ---------------------------------------------------------------------------
# closed form in parabolic cylinder functions

def weber_branch(b: float, xi: float, m: float, t, right: bool):
    """Decaying solution on one side, as (u, u') with u = D_nu(y(t)).

    On a side with field b the equation -u'' + (b t + xi)^2 u = m u becomes
    Weber's equation in y = s sqrt(2/|b|) (b t + xi), nu = m/(2|b|) - 1/2,
    with the sign s chosen so that y -> +infinity away from the barrier.
    """
    s = np.sign(b) if right else -np.sign(b)
    k = s * np.sqrt(2.0 / abs(b))
    nu = m / (2.0 * abs(b)) - 0.5
    d, dp = pbdv(nu, k * (b * np.asarray(t, dtype=float) + xi))
    return d, dp * k * b


def weber_wronskian(fld: StepField, xi: float, m: float) -> float:
    """Normalized Wronskian of the two decaying branches at t = 0."""
    uR, dR = weber_branch(fld.b2, xi, m, 0.0, True)
    uL, dL = weber_branch(fld.b1, xi, m, 0.0, False)
    return (dR * uL - dL * uR) / np.hypot(uR, dR) / np.hypot(uL, dL)


def mu_weber(fld: StepField, xi: float, guess: float | None = None,
             width: float = 0.05) -> float:
    """Lowest eigenvalue from the closed form, to near machine precision."""
    if guess is None:
        grid = np.linspace(1e-3, xi * xi + 4.0, 800)
    else:
        grid = np.linspace(max(guess - width, 1e-6), guess + width, 9)
    f = np.array([weber_wronskian(fld, xi, m) for m in grid])
    idx = np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]
    if idx.size == 0:
        if guess is not None:
            return mu_weber(fld, xi)
        raise NoRoot(f"no eigenvalue bracket at xi={xi}")
    i = idx[0]
    return brentq(lambda m: weber_wronskian(fld, xi, m), grid[i], grid[i + 1],
                  xtol=1e-15, rtol=1e-15)


def weber_profile(fld: StepField, xi: float, m: float, t):
    """Unnormalized eigenfunction and derivative on nodes t, equal to 1 at 0."""
    t = np.asarray(t, dtype=float)
    u = np.empty_like(t)
    du = np.empty_like(t)
    left = t < 0
    uL0, _ = weber_branch(fld.b1, xi, m, 0.0, False)
    uR0, _ = weber_branch(fld.b2, xi, m, 0.0, True)
    a, da = weber_branch(fld.b1, xi, m, t[left], False)
    u[left], du[left] = a / uL0, da / uL0
    a, da = weber_branch(fld.b2, xi, m, t[~left], True)
    u[~left], du[~left] = a / uR0, da / uR0
    return u, du


def split_simpson(f: np.ndarray, grid: Grid1D) -> float:
    """Composite Simpson on each side of t = 0 (integrand may jump there)."""
    i0 = grid.i0
    return float(simpson(f[: i0 + 1], dx=grid.h) + simpson(f[i0:], dx=grid.h))


def _hf_slope(fld, xi, m, grid):
    """d mu / d xi from the Hellmann-Feynman formula with the exact profile."""
    t = grid.t
    u, _ = weber_profile(fld, xi, m, t)
    w = u * u
    return split_simpson(2.0 * (fld.sigma(t) * t + xi) * w, grid) / split_simpson(w, grid)


# ---------------------------------------------------------------------------
# band minimization

def _stencil_slopes(phi, i0, h):
    right = (-25 * phi[i0] + 48 * phi[i0 + 1] - 36 * phi[i0 + 2]
             + 16 * phi[i0 + 3] - 3 * phi[i0 + 4]) / (12 * h)
    left = (25 * phi[i0] - 48 * phi[i0 - 1] + 36 * phi[i0 - 2]
            - 16 * phi[i0 - 3] + 3 * phi[i0 - 4]) / (12 * h)
    return left, right


def minimize_band(fld: StepField, grid: Grid1D | None = None,
                  method: str = "weber", xi_scan=None) -> GroundState1D:
    """Minimize the band function and return the normalized ground state.

    A coarse finite-difference scan locates the bracket, Brent's method
    refines it, and the minimizer is pinned by a root of the exact discrete
    derivative sum 2 (sigma t + xi) phi^2 h.  With ``method="weber"`` the
    minimizer, the minimum and the profile are then recomputed from the
    closed form, which removes the O(h^2) discretization error.
    """
    if fld.case not in (TRAPPING, SYMMETRIC_TRAPPING):
        raise ValidationError(f"no band minimum for case {fld.case}")
    if method not in ("weber", "fd"):
        raise ValidationError(f"unknown method {method!r}")
    grid = grid or Grid1D.default(fld)
    lo, hi = xi_scan or DEFAULTS["xi_scan"]
    xs = np.linspace(lo, hi, DEFAULTS["xi_scan_n"])
    coarse = np.array([_fd_ground(fld, x, grid)[0] for x in xs])
    k = int(np.argmin(coarse))
    if k == 0 or k == xs.size - 1:
        raise NoInteriorMinimum(f"band minimum at scan endpoint xi={xs[k]}")
    opt = minimize_scalar(lambda x: _fd_ground(fld, x, grid)[0],
                          bounds=(xs[k - 1], xs[k + 1]), method="bounded",
                          options={"xatol": 1e-10})
    t, h, i0 = grid.t, grid.h, grid.i0
    sig = fld.sigma(t[1:-1])

    def slope(x):
        _, v, _, A = _fd_ground(fld, x, grid)
        return float(np.sum(2.0 * (sig * A.t + x) * v * v))

    a, b = opt.x - 2e-3, opt.x + 2e-3
    if slope(a) * slope(b) > 0:
        a, b = xs[k - 1], xs[k + 1]
    xi = brentq(slope, a, b, xtol=1e-14)
    beta, vec, _, _ = _fd_ground(fld, xi, grid)

    if method == "fd":
        phi = np.zeros(grid.n)
        phi[1:-1] = vec
        dphi = np.gradient(phi, h, edge_order=2)
    else:
        def wslope(x):
            return _hf_slope(fld, x, mu_weber(fld, x, guess=beta), grid)

        a, b = xi - 1e-2, xi + 1e-2
        if wslope(a) * wslope(b) > 0:
            raise NotConverged("closed-form slope has no sign change")
        xi = brentq(wslope, a, b, xtol=1e-14)
        beta = mu_weber(fld, xi, guess=beta)
        phi, dphi = weber_profile(fld, xi, beta, t)

    norm = np.sqrt(split_simpson(phi * phi, grid))
    sgn = 1.0 if phi[i0] > 0 else -1.0
    phi = phi * sgn / norm
    dphi = dphi * sgn / norm
    left, right = _stencil_slopes(phi, i0, h)
    if abs(left - right) > DEFAULTS["dphi0_mismatch"] * np.max(np.abs(phi)):
        raise NotConverged(f"derivative jump at 0: {left - right:.3e}")
    return GroundState1D(fld, float(xi), float(beta), grid, phi,
                         float(phi[i0]), float(0.5 * (left + right)), dphi,
                         method)


def decay_rate(gs: GroundState1D) -> float:
    """Exponential rate c fitted to log|phi| on the outer quarter of the tail.

    The tail is taken on each side up to where |phi| falls below 1e-12 of
    its maximum, so that round-off does not enter the fit.  The profile is
    Gaussian, hence the fitted slope under-estimates the local rate.
    """
    t = gs.grid.t
    big = np.abs(gs.phi) > 1e-12 * np.max(np.abs(gs.phi))
    rates = []
    for side in (t < 0, t > 0):
        keep = side & big
        L = np.max(np.abs(t[keep]))
        mask = keep & (np.abs(t) >= 0.75 * L)
        slope = np.polyfit(np.abs(t[mask]), np.log(np.abs(gs.phi[mask])), 1)[0]
        rates.append(-slope)
    return float(min(rates))


# ---------------------------------------------------------------------------
# shooting

def _shoot(fld, xi, m, TL, TR):
    def rhs_factory():
        def rhs(t, y):
            return [y[1], (potential(fld, xi, t) - m) * y[0]]
        return rhs

    rhs = rhs_factory()
    kw = dict(method="DOP853", rtol=1e-13, atol=1e-300)
    # start on the decaying branch with the WKB log-derivative; any admixture
    # of the other branch is damped while integrating towards the barrier
    qL = np.sqrt(max(potential(fld, xi, -TL) - m, 0.0))
    qR = np.sqrt(max(potential(fld, xi, TR) - m, 0.0))
    sl = solve_ivp(rhs, (-TL, 0.0), [1.0, qL], **kw)
    sr = solve_ivp(rhs, (TR, 0.0), [1.0, -qR], **kw)
    if not (sl.success and sr.success):
        raise NotConverged("shooting integration failed")
    return sl.y[:, -1], sr.y[:, -1]


def weber_solve(fld: StepField, xi: float, mu_guess: float | None = None,
                width: float = 0.05, T: float | None = None):
    """Lowest eigenvalue by shooting; returns (mu, log-derivative mismatch)."""
    T = T or DEFAULTS["weber_T"]
    TL = T / np.sqrt(abs(fld.b1))
    TR = T / np.sqrt(abs(fld.b2))
    if mu_guess is None:
        mu_guess = mu(fld, xi).mu

    def match(m):
        (uL, dL), (uR, dR) = _shoot(fld, xi, m, TL, TR)
        return (dR * uL - dL * uR) / np.hypot(uL, dL) / np.hypot(uR, dR)

    a, b = max(mu_guess - width, 1e-8), mu_guess + width
    fa, fb = match(a), match(b)
    if fa * fb > 0:
        raise NoRoot(f"no sign change of the matching function on [{a}, {b}]")
    m = brentq(match, a, b, xtol=1e-14, rtol=1e-15)
    (uL, dL), (uR, dR) = _shoot(fld, xi, m, TL, TR)
    return float(m), float(abs(dR / uR - dL / uL))


# ---------------------------------------------------------------------------
# half-line oracle

def _cheb(N):
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


def neumann_section(xi: float, N: int = 80, L: float = 12.0) -> float:
    """Lowest eigenvalue of -u'' + (t + xi)^2 u on (0, L), u'(0) = 0, u(L) = 0."""
    D, x = _cheb(N)
    t = 0.5 * L * (x + 1.0)
    D = D * (2.0 / L)
    A = -D @ D + np.diag((t + xi) ** 2)
    # node 0 is t = L (Dirichlet, dropped); node N is t = 0 where the
    # Neumann row is solved for u_N in terms of the interior values
    inner = slice(1, N)
    c = -D[N, inner] / D[N, N]
    red = A[inner, inner] + np.outer(A[inner, N], c)
    ev = np.linalg.eigvals(red)
    ev = ev[np.abs(ev.imag) < 1e-8].real
    return float(ev.min())


def degennes_oracle(N: int = 80, L: float = 12.0, with_xi: bool = False):
    """Theta_0 = min over xi of the half-line Neumann ground energy."""
    res = minimize_scalar(lambda x: neumann_section(x, N, L), bounds=(-2.0, 0.0),
                          method="bounded", options={"xatol": 1e-11})
    theta = float(res.fun)
    return (theta, float(res.x)) if with_xi else theta
