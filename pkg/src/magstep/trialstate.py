"""Explicit trial state for the broken-line magnetic barrier.

The plane is split by the symmetry axis of the barrier (the line fixed by
the reflection S) into a plus half containing the ray x1 > 0 and its mirror
image.  Each half carries two strips T_j (j = 1 below the barrier, j = 2
above) where the state is the fiber ground state times a plane wave, and two
thin sectors V_j of opening gamma/2 next to the axis where an interpolating
phase glues the plus and minus plane waves together.

All energies are evaluated in the gauge sigma(x) (-x2, 0), sigma = b_j on
the j-th side of the barrier.  The physical potential differs from it by
the gradient of zeta, which jumps across the tilted half of the barrier, so
the physical state is exp(i zeta) times the gauge-frame state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.polynomial.laguerre import laggauss

from .defaults import DEFAULTS
from .errors import QuadratureUnresolved, ValidationError
from .fiber1d import GroundState1D
from .moments import moment

T1PLUS, T2PLUS, T1MINUS, T2MINUS = "T1plus", "T2plus", "T1minus", "T2minus"
V1PLUS, V2PLUS, V1MINUS, V2MINUS = "V1plus", "V2plus", "V1minus", "V2minus"
OUTSIDE = "Outside"
REGIONS = (T1PLUS, T2PLUS, V1PLUS, V2PLUS, T1MINUS, T2MINUS, V1MINUS, V2MINUS)
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WedgeGeometry:
    delta: float
    gamma: float
    ell: float
    S: np.ndarray

    @classmethod
    def from_delta(cls, delta: float) -> "WedgeGeometry":
        if not 0.0 < delta < np.pi / 2:
            raise ValidationError("delta must lie in (0, pi/2)")
        c, s = np.cos(delta), np.sin(delta)
        S = np.array([[-c, -s], [-s, c]])
        return cls(float(delta), float(np.sqrt(delta)), float(1.0 / np.sqrt(delta)), S)

    def reflect(self, x1, x2):
        S = self.S
        return S[0, 0] * x1 + S[0, 1] * x2, S[1, 0] * x1 + S[1, 1] * x2

    # sector boundaries, as polar angles in [0, 2 pi)
    @property
    def axis_up(self):
        return 0.5 * (np.pi + self.delta)

    @property
    def axis_down(self):
        return 0.5 * (3 * np.pi + self.delta)


@dataclass(frozen=True)
class PhaseSpec:
    c1: float
    d1: float
    c2: float
    d2: float
    gamma: float
    axis_up: float
    axis_down: float

    def h(self, j: int, theta):
        """Affine interpolation weight, -1 at the T-plus edge, +1 at the T-minus edge."""
        if j == 2:
            return (2.0 / self.gamma) * (theta - self.axis_up)
        return -(2.0 / self.gamma) * (theta - self.axis_down)

    def dh(self, j: int) -> float:
        return 2.0 / self.gamma if j == 2 else -2.0 / self.gamma

    def cd(self, j: int):
        return (self.c1, self.d1) if j == 1 else (self.c2, self.d2)


def make_phase(geom: WedgeGeometry, gs: GroundState1D) -> PhaseSpec:
    d, g, xi = geom.delta, geom.gamma, gs.xi_b
    k = 0.25 * np.sin(d) * np.cos(g)
    return PhaseSpec(xi * np.sin(0.5 * (g + d)), gs.field.b1 * k,
                     xi * np.sin(0.5 * (g - d)), gs.field.b2 * k,
                     g, geom.axis_up, geom.axis_down)


def _smoothstep(u):
    """C-infinity step from 0 (u <= 0) to 1 (u >= 1) and its derivative."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        g = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        df = np.where(u > 0, f / np.where(u > 0, u, 1.0) ** 2, 0.0)
        dg = np.where(u < 1, -g / np.where(u < 1, 1.0 - u, 1.0) ** 2, 0.0)
        s = f / (f + g)
        ds = (df * g - f * dg) / (f + g) ** 2
    return s, np.where((u > 0) & (u < 1), ds, 0.0)


def bump(t):
    """Cut-off equal to 1 on [-1/2, 1/2] and supported in [-1, 1]."""
    t = np.asarray(t, dtype=float)
    s, ds = _smoothstep(2.0 * np.abs(t) - 1.0)
    return 1.0 - s, -2.0 * np.sign(t) * ds


@dataclass(frozen=True)
class TrialState:
    geometry: WedgeGeometry
    gs: GroundState1D
    phase: PhaseSpec
    eta_plateau: float
    m3: float

    @property
    def kappa(self) -> float:
        """Decay rate of the longitudinal profile, |M3| delta / 2."""
        return 0.5 * abs(self.m3) * self.geometry.delta

    def eta(self, s):
        """eta_+ and its derivative; equal to 1 for s <= plateau."""
        s = np.asarray(s, dtype=float)
        e = np.exp(-self.kappa * np.maximum(s - self.eta_plateau, 0.0))
        return e, np.where(s > self.eta_plateau, -self.kappa * e, 0.0)

    def eta_norms(self):
        """Closed forms of ||eta_+||^2 and ||eta_+'||^2 on the half-line."""
        return self.eta_plateau + 1.0 / (2 * self.kappa), 0.5 * self.kappa

    def profile(self, t):
        """Cut-off fiber state chi(t/ell) phi(t) and its derivative."""
        ell = self.geometry.ell
        phi, dphi = self.gs.evaluate(t)
        c, dc = bump(np.asarray(t) / ell)
        return c * phi, c * dphi + dc * phi / ell


def build_trial(gs: GroundState1D, delta: float, eta_plateau: float | None = None) -> TrialState:
    geom = WedgeGeometry.from_delta(delta)
    eps = DEFAULTS["eta_plateau"] if eta_plateau is None else eta_plateau
    m3 = moment(gs, 3).value
    if m3 == 0.0:
        raise ValidationError("vanishing third moment gives no decay rate")
    if eps < geom.ell * np.tan(0.5 * (geom.gamma + geom.delta)):
        raise ValidationError("eta plateau must cover the gluing sectors")
    return TrialState(geom, gs, make_phase(geom, gs), float(eps), float(m3))


# ---------------------------------------------------------------------------
# partition

def _angle(x1, x2):
    return np.mod(np.arctan2(x2, x1), TWO_PI)


def _plus_tag(geom, x1, x2):
    """Tag of points already known to lie in the plus half."""
    th = _angle(x1, x2)
    d, g, ell = geom.delta, geom.gamma, geom.ell
    tags = np.full(x1.shape, OUTSIDE, dtype=object)
    upper = th <= geom.axis_up
    t2 = upper & (th <= 0.5 * (np.pi + d - g))
    v2 = upper & ~t2
    v1 = ~upper & (th <= 0.5 * (3 * np.pi + d + g))
    t1 = ~upper & ~v1
    inside = np.abs(x2) < ell
    tags[t2 & inside] = T2PLUS
    tags[v2 & inside] = V2PLUS
    tags[v1 & inside] = V1PLUS
    tags[t1 & inside] = T1PLUS
    return tags


_TO_MINUS = {T1PLUS: T1MINUS, T2PLUS: T2MINUS, V1PLUS: V1MINUS, V2PLUS: V2MINUS,
             OUTSIDE: OUTSIDE}


def region_of(x, geom: WedgeGeometry):
    """Region tag of a point (or of each row of an (n, 2) array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    th = _angle(x1, x2)
    plus = (th <= geom.axis_up) | (th > geom.axis_down)
    tags = np.empty(x1.shape, dtype=object)
    if plus.any():
        tags[plus] = _plus_tag(geom, x1[plus], x2[plus])
    if (~plus).any():
        y1, y2 = geom.reflect(x1[~plus], x2[~plus])
        tags[~plus] = [_TO_MINUS[t] for t in _plus_tag(geom, y1, y2)]
    return tags[0] if single else tags


# ---------------------------------------------------------------------------
# branch evaluation

def _side(tag: str) -> int:
    return 1 if tag[1] == "1" else 2


def _sigma(ts: TrialState, tag: str) -> float:
    return ts.gs.field.b1 if _side(tag) == 1 else ts.gs.field.b2


def _cutoff_phi(geom, x1, x2):
    """-(sin delta / 2) x^T S x."""
    y1, y2 = geom.reflect(x1, x2)
    return -0.5 * np.sin(geom.delta) * (x1 * y1 + x2 * y2)


def branch(ts: TrialState, tag: str, x1, x2):
    """Amplitude, phase and their gradients of the gauge-frame state.

    Returns rho, S, (rho_1, rho_2), (S_1 - sigma A_1, S_2) where A = (-x2, 0)
    and sigma is the field of the region's side.
    """
    geom, ph = ts.geometry, ts.phase
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    sig = _sigma(ts, tag)
    xi = ts.gs.xi_b
    minus = tag.endswith("minus")
    if minus:
        y1, y2 = geom.reflect(x1, x2)
    else:
        y1, y2 = x1, x2
    p, dp = ts.profile(y2)
    e, de = ts.eta(y1)
    rho = e * p
    g1, g2 = de * p, e * dp
    if minus:
        g1, g2 = geom.reflect(g1, g2)
    if tag[0] == "T":
        if minus:
            S0 = -xi * y1 - sig * _cutoff_phi(geom, x1, x2)
            s = np.sin(geom.delta)
            a1 = -xi * geom.S[0, 0] + sig * s * y1
            a2 = -xi * geom.S[1, 0] + sig * s * y2
        else:
            S0 = xi * x1
            a1, a2 = xi + 0.0 * x1, 0.0 * x1
    else:
        j = _side(tag)
        c, d = ph.cd(j)
        r = np.hypot(x1, x2)
        th = _angle(x1, x2)
        h = ph.h(j, th)
        S0 = d * r * r - h * (c * r - d * r * r)
        ar = 2 * d * r - h * (c - 2 * d * r)
        at = -ph.dh(j) * (c - d * r)
        ct, st = np.cos(th), np.sin(th)
        a1 = ar * ct - at * st
        a2 = ar * st + at * ct
    a1 = a1 + sig * x2
    return rho, S0, (g1, g2), (a1, a2)


def eval_branch(ts: TrialState, tag: str, x1, x2):
    rho, S0, _, _ = branch(ts, tag, x1, x2)
    return rho * np.exp(1j * S0)


def eval_trial(ts: TrialState, x):
    """Trial state in the sigma (-x2, 0) gauge at points x (shape (2,) or (n, 2))."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    tags = region_of(x, ts.geometry)
    out = np.zeros(len(x), dtype=complex)
    for tag in REGIONS:
        m = tags == tag
        if m.any():
            out[m] = eval_branch(ts, tag, x[m, 0], x[m, 1])
    return out[0] if single else out


def zeta(geom: WedgeGeometry, b1: float, b2: float, x1, x2, below=None):
    """Gauge function linking the sigma gauge to the barrier potential."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if below is None:
        below = x2 < np.where(x1 <= 0, x1 * np.tan(geom.delta), 0.0)
    return np.where(below & (x1 < 0), 0.5 * (b1 - b2) * x1 ** 2 * np.tan(geom.delta), 0.0)


def eval_physical(ts: TrialState, x):
    """exp(i zeta) times the trial state: the H^1 function in the barrier gauge."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    f = ts.gs.field
    z = zeta(ts.geometry, f.b1, f.b2, x[:, 0], x[:, 1])
    return np.exp(1j * z) * eval_trial(ts, x)


# ---------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadSpec:
    order: int = 20           # Gauss-Legendre nodes per panel
    panel: float = 0.5        # panel width in the transverse variable
    angular: int = 24         # Gauss-Legendre nodes across a sector
    laguerre: int = 12        # Gauss-Laguerre nodes for the exponential tail

    def refined(self) -> "QuadSpec":
        return QuadSpec(self.order, 0.5 * self.panel, self.angular + 8, self.laguerre)


def _panels(a, b, width, order):
    n = max(1, int(np.ceil(abs(b - a) / width)))
    z, w = leggauss(order)
    edges = np.linspace(a, b, n + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * z[None, :] + 0.5 * (hi + lo)
    return x.ravel(), (0.5 * (hi - lo) * w[None, :]).ravel()


def _plus_nodes(ts: TrialState, tag: str, q: QuadSpec):
    """Nodes and weights covering a plus region, as flat arrays."""
    geom = ts.geometry
    d, g, ell = geom.delta, geom.gamma, geom.ell
    if tag in (T1PLUS, T2PLUS):
        if tag == T1PLUS:
            x2, w2 = _panels(-ell, 0.0, q.panel, q.order)
            xmin = -x2 * np.tan(0.5 * (g + d))
        else:
            x2, w2 = _panels(0.0, ell, q.panel, q.order)
            xmin = x2 * np.tan(0.5 * (g - d))
        eps = ts.eta_plateau
        z, wz = leggauss(q.order)
        a1 = xmin[:, None] + 0.5 * (eps - xmin[:, None]) * (z[None, :] + 1.0)
        b1 = 0.5 * (eps - xmin[:, None]) * wz[None, :] * w2[:, None]
        # eta^2 = exp(-s) on the tail with s = 2 kappa (x1 - eps)
        s, ws = laggauss(q.laguerre)
        k2 = 2.0 * ts.kappa
        a2 = eps + s[None, :] / k2 + 0.0 * x2[:, None]
        b2 = (ws * np.exp(s))[None, :] / k2 * w2[:, None]
        X2 = np.concatenate([np.repeat(x2[:, None], q.order, 1), np.repeat(x2[:, None], q.laguerre, 1)], 1)
        return (np.concatenate([a1, a2], 1).ravel(), X2.ravel(),
                np.concatenate([b1, b2], 1).ravel())
    if tag == V2PLUS:
        th_lo, th_hi, sgn = 0.5 * (np.pi + d - g), geom.axis_up, 1.0
    else:
        th_lo, th_hi, sgn = geom.axis_down, 0.5 * (3 * np.pi + d + g), -1.0
    th, wt = _panels(th_lo, th_hi, th_hi - th_lo, q.angular)
    s, wsn = _panels(0.0, ell, q.panel, q.order)          # s = |x2|
    TH, SS = np.meshgrid(th, s, indexing="ij")
    rmax = 1.0 / np.abs(np.sin(TH))
    r = SS * rmax
    w = (wt[:, None] * wsn[None, :]) * r * rmax
    x1, x2 = r * np.cos(TH), r * np.sin(TH)
    del sgn
    return x1.ravel(), x2.ravel(), w.ravel()


_PLUS_OF = {T1MINUS: T1PLUS, T2MINUS: T2PLUS, V1MINUS: V1PLUS, V2MINUS: V2PLUS}


def region_nodes(ts: TrialState, tag: str, q: QuadSpec | None = None):
    q = q or QuadSpec()
    if tag.endswith("plus"):
        return _plus_nodes(ts, tag, q)
    y1, y2, w = _plus_nodes(ts, _PLUS_OF[tag], q)
    x1, x2 = ts.geometry.reflect(y1, y2)
    return x1, x2, w


def _integrals(ts: TrialState, tag: str, q: QuadSpec):
    x1, x2, w = region_nodes(ts, tag, q)
    rho, _, (g1, g2), (a1, a2) = branch(ts, tag, x1, x2)
    dens = g1 * g1 + g2 * g2 + rho * rho * (a1 * a1 + a2 * a2)
    return float(np.sum(w * dens)), float(np.sum(w * rho * rho))


def _checked(ts, tags, q, which):
    q = q or QuadSpec()
    coarse = sum(_integrals(ts, t, q)[which] for t in tags)
    fine = sum(_integrals(ts, t, q.refined())[which] for t in tags)
    if abs(fine - coarse) > 1e-2 * abs(fine):
        raise QuadratureUnresolved(f"h vs h/2 differ: {coarse} vs {fine}")
    return fine


def region_energy(ts: TrialState, tag: str, quad: QuadSpec | None = None) -> float:
    return _checked(ts, [tag], quad, 0)


def region_norm(ts: TrialState, tag: str, quad: QuadSpec | None = None) -> float:
    return _checked(ts, [tag], quad, 1)


def l2_breakdown(ts: TrialState, quad: QuadSpec | None = None):
    plus = _checked(ts, [T1PLUS, T2PLUS, V1PLUS, V2PLUS], quad, 1)
    minus = _checked(ts, [T1MINUS, T2MINUS, V1MINUS, V2MINUS], quad, 1)
    return plus, minus, plus + minus


def rayleigh(ts: TrialState, quad: QuadSpec | None = None):
    """Energy, squared norm and their quotient."""
    energy = _checked(ts, REGIONS, quad, 0)
    norm2 = _checked(ts, REGIONS, quad, 1)
    return energy, norm2, energy / norm2


# ---------------------------------------------------------------------------
# leading-order references

def sector_j(gs: GroundState1D, delta: float, side: int) -> float:
    """Half-line first-order energy coefficient of the gluing sector on a side.

    Side 2 uses t > 0, side 1 uses t < 0 with the sign of t reversed, so both
    are positive weights.  The sector energy is (1/2) delta^(1/2) times it.
    """
    from .moments import integrate

    xi, rd = gs.xi_b, np.sqrt(delta)
    keep = (lambda t: t >= 0) if side == 2 else (lambda t: t <= 0)
    sgn = 1.0 if side == 2 else -1.0
    kin = integrate(lambda t, s, p, dp: np.where(keep(t), (dp * dp + (s * t + xi) ** 2 * p * p) * t, 0.0), gs)[0]
    cross = integrate(lambda t, s, p, dp: np.where(keep(t), (s * t + xi) * (s * t + 2 * xi) * p * p * t, 0.0), gs)[0]
    return sgn * kin - rd * cross


def l2_reference(ts: TrialState) -> float:
    """2 ||eta_+||^2 + delta int t phi^2, the norm up to O(delta^3)."""
    from .moments import integrate

    return 2 * ts.eta_norms()[0] + ts.geometry.delta * integrate(lambda t, s, p, dp: p * p * t, ts.gs)[0]


def interfaces(geom: WedgeGeometry):
    """(polar angle, region on one side, region on the other) for every interface ray."""
    d, g = geom.delta, geom.gamma
    return [(0.5 * (np.pi + d - g), T2PLUS, V2PLUS),
            (geom.axis_up, V2PLUS, V2MINUS),
            (0.5 * (np.pi + d + g), V2MINUS, T2MINUS),
            (np.pi + d, T2MINUS, T1MINUS),
            (0.5 * (3 * np.pi + d - g), T1MINUS, V1MINUS),
            (geom.axis_down, V1MINUS, V1PLUS),
            (0.5 * (3 * np.pi + d + g), V1PLUS, T1PLUS),
            (0.0, T1PLUS, T2PLUS)]


def continuity_check(ts: TrialState, n: int = 200, seed: int = 0) -> dict:
    """Largest jump of exp(i zeta) Psi across each interface, at random radii.

    Each branch is evaluated with the gauge function of its own side, so the
    comparison is between one-sided limits of the physical state.
    """
    geom, f = ts.geometry, ts.gs.field
    rng = np.random.default_rng(seed)
    out = {}
    for th, a, b in interfaces(geom):
        r = rng.uniform(0.0, 0.9 * geom.ell, n)
        x1, x2 = r * np.cos(th), r * np.sin(th)
        va, vb = (np.exp(1j * zeta(geom, f.b1, f.b2, x1, x2, below=np.full(n, t[1] == "1")))
                  * eval_branch(ts, t, x1, x2) for t in (a, b))
        out[f"{a}|{b}"] = float(np.max(np.abs(va - vb)))
    return out


def modulus_symmetry(ts: TrialState, n: int = 500, seed: int = 0) -> float:
    """max | |Psi(x)| - |Psi(S x)| | at random points of the support."""
    rng = np.random.default_rng(seed)
    ell = ts.geometry.ell
    x = np.column_stack([rng.uniform(-3 * ell, 3 * ell, n), rng.uniform(-ell, ell, n)])
    y = np.column_stack(ts.geometry.reflect(x[:, 0], x[:, 1]))
    return float(np.max(np.abs(np.abs(eval_trial(ts, x)) - np.abs(eval_trial(ts, y)))))


def rayleigh_with_error(ts: TrialState, quad: QuadSpec | None = None):
    """Quotient on the refined rule and its difference to the base rule."""
    q = quad or QuadSpec()
    out = []
    for spec in (q, q.refined()):
        e = sum(_integrals(ts, t, spec)[0] for t in REGIONS)
        n = sum(_integrals(ts, t, spec)[1] for t in REGIONS)
        out.append(e / n)
    return out[1], abs(out[1] - out[0])
