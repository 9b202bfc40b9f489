"""Moment functionals of a fiber ground state.

    M_n = int (xi + sigma(t) t)^n |phi(t)|^2 / sigma(t) dt

and the three-term split J = J1 + J2 + J3 of the first-order energy
correction of a bent barrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import ValidationError, WrongOrientation
from .fiber1d import GroundState1D


@dataclass(frozen=True)
class MomentReport:
    n: int
    value: float
    quadrature_error_estimate: float


@dataclass(frozen=True)
class JBreakdown:
    j1: float
    j2: float
    j3: float
    j_total: float


def _simpson(f: np.ndarray, h: float, step: int) -> float:
    return float(simpson(f[::step], dx=h * step))


def integrate(fn, gs: GroundState1D):
    """Integral of fn(t, sigma, phi, dphi) over the real line.

    Each half-line is integrated by composite Simpson with the one-sided
    value of sigma at t = 0, since the integrand may jump there.  Returns the
    value and the difference to the same rule on every second node.
    """
    g, i0 = gs.grid, gs.grid.i0
    t = g.t
    parts = []
    for sl, b in ((slice(None, i0 + 1), gs.field.b1), (slice(i0, None), gs.field.b2)):
        f = fn(t[sl], b, gs.phi[sl], gs.dphi[sl])
        if sl.start is None:
            f = f[::-1]         # start the coarse rule at t = 0 on both sides
        parts.append(f)
    fine = sum(_simpson(f, g.h, 1) for f in parts)
    coarse = sum(_simpson(f, g.h, 2) for f in parts)
    return fine, abs(fine - coarse)


def moment(gs: GroundState1D, n: int) -> MomentReport:
    if n < 0:
        raise ValidationError("moment order must be non-negative")
    xi = gs.xi_b
    val, err = integrate(lambda t, s, p, dp: (xi + s * t) ** n * p * p / s, gs)
    return MomentReport(n, val, err)


def m3_closed_form(gs: GroundState1D) -> float:
    """(1/3)(1/b - 1) xi phi(0) phi'(0), valid for the orientation (b, 1)."""
    b1, b2 = gs.field.b1, gs.field.b2
    if b2 != 1.0 or not (-1.0 <= b1 < 0.0):
        raise WrongOrientation(f"closed form needs field (b, 1) with b in [-1, 0), got ({b1}, {b2})")
    return (1.0 / b1 - 1.0) * gs.xi_b * gs.phi0 * gs.dphi0 / 3.0


def sign_flip_check(gs_ab: GroundState1D, gs_ba: GroundState1D, n: int) -> float:
    """|M_n(b1, b2) - (-1)^n M_n(b2, b1)|."""
    if (gs_ab.field.b1, gs_ab.field.b2) != (gs_ba.field.b2, gs_ba.field.b1):
        raise ValidationError("states must belong to mirrored fields")
    return abs(moment(gs_ab, n).value - (-1) ** n * moment(gs_ba, n).value)


def j_breakdown(gs: GroundState1D) -> JBreakdown:
    xi, beta = gs.xi_b, gs.beta_b
    j1 = -beta * integrate(lambda t, s, p, dp: p * p * t, gs)[0]
    j2 = integrate(lambda t, s, p, dp: (dp * dp + (s * t + xi) ** 2 * p * p) * t, gs)[0]
    j3 = -integrate(lambda t, s, p, dp: (s * t + xi) * (s * t + 2 * xi) * p * p * t, gs)[0]
    return JBreakdown(j1, j2, j3, j1 + j2 + j3)
