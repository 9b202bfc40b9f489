"""Acceptance checks, shared by the test-suite and the `verify` command.

Each check returns a CheckResult whose `passed` flag combines the numerical
condition with the runtime budget.  Reference values come from in-repo
oracles (Chebyshev half-line solver, closed forms, refinement studies).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import MagstepError
from .fiber1d import classify, degennes_oracle, minimize_band, mu
from .moments import j_breakdown, m3_closed_form, moment, sign_flip_check
from .trialstate import (REGIONS, T1MINUS, T1PLUS, T2MINUS, T2PLUS, V1MINUS, V1PLUS, V2MINUS,
                         V2PLUS, WedgeGeometry, build_trial, l2_breakdown, l2_reference,
                         rayleigh_with_error, region_energy, sector_j)
from .wedge2d import (DomainSpec, GaugeField, agmon_fit, angular_partition, assemble_wedge,
                      exterior_eig, ims_residual, lambda1_sweep, lambda_delta, radial_partition,
                      smooth_random_vector, symmetry_check, threshold_study)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    runtime: float
    limit: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.runtime:.1f} s / {self.limit:.0f} s)"


def _timed(number, name, limit, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except MagstepError as exc:
        ok, detail = False, {"error": type(exc).__name__, "message": str(exc)}
    dt = time.perf_counter() - t0
    detail["within_runtime"] = dt < limit
    return CheckResult(number, name, bool(ok) and dt < limit, dt, limit, detail)


def _lsq_coefficient(deltas, gaps):
    d2 = np.asarray(deltas) ** 2
    return float(np.dot(gaps, d2) / np.dot(d2, d2))


# ---------------------------------------------------------------------------

def degennes_anchor():
    def run():
        gs = minimize_band(classify(1.0, -1.0))
        theta = degennes_oracle()
        db = abs(gs.beta_b - theta)
        dx = abs(gs.xi_b - (-np.sqrt(gs.beta_b)))
        return db < 1e-6 and dx < 1e-5, dict(beta=gs.beta_b, theta0=theta, beta_error=db,
                                              xi=gs.xi_b, xi_target=-np.sqrt(gs.beta_b), xi_error=dx)
    return _timed(1, "de Gennes anchor", 10.0, run)


def uniform_field():
    def run():
        fld = classify(1.0, 1.0)
        errs = {f"xi={x:g}": abs(mu(fld, x).mu - 1.0) for x in (-1.0, 0.0, 1.0)}
        return max(errs.values()) < 1e-5, errs
    return _timed(2, "uniform-field band", 5.0, run)


def bound_sandwich():
    def run():
        theta = degennes_oracle()
        rows, ok = {}, True
        for b in (-0.75, -0.5, -0.25):
            beta = minimize_band(classify(1.0, b)).beta_b
            rows[f"b={b:g}"] = dict(lower=abs(b) * theta, beta=beta, upper=abs(b))
            ok &= abs(b) * theta < beta < abs(b)
        return ok, rows
    return _timed(3, "bound sandwich", 30.0, run)


def moment_identities():
    def run():
        rows, ok = {}, True
        for b in (-1.0, -0.75, -0.5, -0.25, -0.1):
            g_ab = minimize_band(classify(1.0, b))
            g_ba = minimize_band(classify(b, 1.0))
            r = {}
            for tag, g in (("(1,b)", g_ab), ("(b,1)", g_ba)):
                m1, m3 = moment(g, 1).value, moment(g, 3).value
                j = j_breakdown(g)
                r[tag] = dict(M1=m1, J1_plus_J2=j.j1 + j.j2,
                              J_identity=j.j_total - (-m3 + g.xi_b ** 2 * m1))
                ok &= abs(m1) < 1e-7 and abs(j.j1 + j.j2) < 1e-5
                ok &= abs(j.j_total - (-m3 + g.xi_b ** 2 * m1)) < 1e-5
            r["M3_closed_form"] = moment(g_ba, 3).value - m3_closed_form(g_ba)
            r["sign_flip"] = max(sign_flip_check(g_ab, g_ba, n) for n in range(4))
            ok &= abs(r["M3_closed_form"]) < 1e-5 and r["sign_flip"] < 1e-6
            rows[f"b={b:g}"] = r
        return ok, rows
    return _timed(4, "moment identities", 120.0, run)


def trial_bound(deltas=(0.04, 0.02, 0.01)):
    def run():
        gs = minimize_band(classify(1.0, -0.5))
        m3 = moment(gs, 3).value
        gaps, rows = [], {}
        for d in deltas:
            q, err = rayleigh_with_error(build_trial(gs, d))
            gaps.append(gs.beta_b - q)
            rows[f"delta={d:g}"] = dict(quotient=q, gap=gs.beta_b - q, quad_error=err)
        coef = _lsq_coefficient(deltas, gaps)
        target = 0.5 * m3 ** 2 / 4
        gw = minimize_band(classify(-0.5, 1.0))
        wgaps, noise = [], 0.0
        for d in deltas:
            q, err = rayleigh_with_error(build_trial(gw, d))
            wgaps.append(gw.beta_b - q)
            noise = max(noise, err / d ** 2)
        wcoef = _lsq_coefficient(deltas, wgaps)
        ok = all(g > 0 for g in gaps) and coef >= target and wcoef <= noise
        return ok, dict(rows=rows, coefficient=coef, required=target, M3=m3,
                        wrong_orientation_coefficient=wcoef, fit_noise=noise)
    return _timed(5, "trial-state bound", 600.0, run)


def region_energies(delta=0.005):
    def run():
        gs = minimize_band(classify(1.0, -0.5))
        ts = build_trial(gs, delta)
        margin = 5 * delta ** 1.5
        sectors = {}
        ok = True
        for tag, side in ((V2PLUS, 2), (V2MINUS, 2), (V1PLUS, 1), (V1MINUS, 1)):
            ref = 0.5 * np.sqrt(delta) * sector_j(gs, delta, side)
            e = region_energy(ts, tag)
            sectors[tag] = dict(energy=e, reference=ref, difference=e - ref)
            ok &= abs(e - ref) < margin
        strips = {}
        for p, m in ((T1PLUS, T1MINUS), (T2PLUS, T2MINUS)):
            ep, em = region_energy(ts, p), region_energy(ts, m)
            rel = abs(ep - em) / abs(ep)
            strips[f"{p}/{m}"] = rel
            ok &= rel < 1e-6
        plus, minus, total = l2_breakdown(ts)
        ref = l2_reference(ts)
        l2_margin = 10 * delta ** 3
        ok &= abs(total - ref) < l2_margin
        return ok, dict(margin=margin, sectors=sectors, strip_relative=strips,
                        l2=dict(total=total, reference=ref, difference=total - ref, margin=l2_margin))
    return _timed(6, "per-region energies", 600.0, run)


def wedge_bound_state(delta=0.1, h=0.1):
    def run():
        gs = minimize_band(classify(1.0, -0.5))
        beta = gs.beta_b
        fld = GaugeField(1.0, -0.5, delta)
        table = lambda_delta(fld, [delta], beta, h=h, keep=True)
        row = table.rows[0]
        detail = dict(beta=beta, lam_coarse=row.lam_coarse, lam_fine=row.lam_fine,
                      lam=row.lam, error=row.error, gap=row.gap)
        ok = row.gap > 3 * row.error
        res = row.fine
        try:
            sym = symmetry_check(res, WedgeGeometry.from_delta(delta))
            detail.update(symmetry=sym, symmetry_bound=5 * (h / 2) ** 2)
            ok &= sym < 5 * (h / 2) ** 2
        except MagstepError as exc:
            detail["symmetry_error"] = str(exc)
            ok = False
        try:
            rate = agmon_fit(res, beta)
            detail.update(agmon_rate=rate)
            ok &= rate >= 0.5 * np.sqrt(row.gap)
        except MagstepError as exc:
            detail["agmon_error"] = f"{type(exc).__name__}: {exc}"
            ok = False
        return ok, detail
    return _timed(7, "2-D bound state", 1200.0, run)


def threshold(R=20.0):
    def run():
        beta = minimize_band(classify(1.0, -0.5)).beta_b
        st = threshold_study(GaugeField(1.0, -0.5, 0.0), beta, R)
        ok = st.from_above and 1.8 <= st.order <= 2.2 and abs(st.limit - beta) < st.error
        return ok, dict(beta=beta, hs=st.hs, lams=st.lams, order=st.order, limit_h=st.limit_h,
                        lam_2R=st.lam_2R, limit=st.limit, limit_error=st.limit - beta,
                        error_estimate=st.error)
    return _timed(8, "essential-spectrum threshold", 600.0, run)


def domain_sweep(B_values=(50.0, 100.0, 200.0, 400.0), delta=0.1):
    def run():
        beta = minimize_band(classify(1.0, -0.5)).beta_b
        tab = lambda1_sweep(DomainSpec(1.0, -0.5, delta), B_values, beta)
        ok = tab.error_decreasing and tab.increasing_top_half
        return ok, dict(reference=beta, ratios=[r.ratio for r in tab.rows],
                        lam1=[r.lam1 for r in tab.rows], differences=tab.differences,
                        from_above=tab.from_above, error_decreasing=tab.error_decreasing,
                        increasing_top_half=tab.increasing_top_half,
                        concentration=[r.concentration for r in tab.rows])
    return _timed(9, "bounded-domain sweep", 1800.0, run)


def ims_identity(seed=0, h=0.1, radii=(2.0, 4.0, 8.0)):
    def run():
        beta = minimize_band(classify(1.0, -0.5)).beta_b
        op = assemble_wedge(GaugeField(1.0, -0.5, 0.1), None, h)
        rng = np.random.default_rng(seed)
        res = {}
        for k in range(3):
            v = smooth_random_vector(op, rng)
            res[f"radial_{k}"] = ims_residual(op, *radial_partition(op, 3.0, 3.0), v)
            res[f"angular_{k}"] = ims_residual(op, *angular_partition(op, 3.0, 3.0), v)
        trivial = ims_residual(op, [np.ones(op.size)], [(np.zeros(op.size),) * 2],
                               smooth_random_vector(op, rng))
        ok = max(res.values()) < 10 * h * h and trivial == 0.0
        ext = [exterior_eig(op, R) for R in radii]
        deficits = [max(0.0, beta - e) * R * R for e, R in zip(ext, radii)]
        trend = all(b <= a + 1e-12 for a, b in zip(deficits, deficits[1:]))
        ok &= trend
        return ok, dict(residuals=res, bound=10 * h * h, trivial=trivial,
                        exterior=dict(zip(map(str, radii), ext)), scaled_deficits=deficits)
    return _timed(10, "IMS identity and exterior bound", 120.0, run)


CHECKS = (degennes_anchor, uniform_field, bound_sandwich, moment_identities, trial_bound,
          region_energies, wedge_bound_state, threshold, domain_sweep, ims_identity)


def run_all(seed: int = 0, log=print):
    out = []
    for check in CHECKS:
        r = check(seed=seed) if check is ims_identity else check()
        if log:
            log(r.line())
        out.append(r)
    return out
