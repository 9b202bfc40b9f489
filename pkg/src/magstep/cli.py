"""Command-line front end.

    magstep minimize --b1 1 --b2 -0.5
    magstep trial --b1 1 --b2 -0.5 --delta 0.01 --delta 0.005 --format csv --out trial.csv
    magstep verify

Settings are resolved in the order built-in defaults < config file
(`key = value` lines) < command-line flags, and the resolved set is written
at the top of every output so a run can be repeated from its own file.
Exit status: 0 on success, 1 on invalid input (or, for verify, a failed
check), 2 when a solver does not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .defaults import DEFAULTS
from .errors import MagstepError, NoBoundState, ValidationError

COMMANDS = ("band", "minimize", "moments", "trial", "wedge", "domain", "verify")

_DEFAULT_DELTAS = {"trial": (0.04, 0.02, 0.01), "wedge": (0.1,), "domain": (0.1,)}


@dataclass(frozen=True)
class RunConfig:
    command: str
    b1: float = 1.0
    b2: float = -0.5
    delta: tuple = ()
    B: tuple = (50.0, 100.0, 200.0, 400.0)
    grid_n: int = DEFAULTS["fiber_n"]
    mesh_h: float = DEFAULTS["mesh_h"]
    r_trunc: float | None = None
    xi_min: float = -3.0
    xi_max: float = 3.0
    xi_n: int = 61
    workers: int = 1
    out: str | None = None
    format: str = "json"
    seed: int = DEFAULTS["seed"]

    def header(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["version"] = __version__
        return d


_LISTS = {"delta", "B"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    if key in _LISTS:
        return tuple(float(v) for v in value.replace(",", " ").split())
    kind = _TYPES[key]
    if value.lower() in ("none", ""):
        return None
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def load_config(path: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES or key == "command":
                raise ValidationError(f"{path}:{n}: unknown key {key!r}")
            try:
                out[key] = _coerce(key, value)
            except ValueError as exc:
                raise ValidationError(f"{path}:{n}: bad value for {key}: {value}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magstep", description="Magnetic step and broken-barrier computations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--b1", type=float)
    p.add_argument("--b2", type=float)
    p.add_argument("--delta", type=float, action="append", help="corner angle (repeatable)")
    p.add_argument("--B", type=float, action="append", help="field strength (repeatable)")
    p.add_argument("--grid-n", type=int, help="fiber grid nodes")
    p.add_argument("--mesh-h", type=float, help="2-D mesh width")
    p.add_argument("--r-trunc", type=float, help="half-width of the 2-D box")
    p.add_argument("--xi-min", type=float)
    p.add_argument("--xi-max", type=float)
    p.add_argument("--xi-n", type=int)
    p.add_argument("--workers", type=int, help="threads for independent sweep points")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="file of key = value settings")
    return p


def resolve(args: argparse.Namespace) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = tuple(v) if key in _LISTS else v
    values["command"] = args.command
    if "delta" not in values:
        values["delta"] = _DEFAULT_DELTAS.get(args.command, ())
    cfg = RunConfig(**values)
    if cfg.format not in ("csv", "json"):
        raise ValidationError(f"unknown format {cfg.format!r}")
    if cfg.grid_n < 9 or cfg.grid_n % 2 == 0:
        raise ValidationError("grid-n must be odd and at least 9")
    if cfg.workers < 1:
        raise ValidationError("workers must be positive")
    return cfg


# ---------------------------------------------------------------------------
# commands: each returns (results, checks, columns, rows)

def _fiber_state(cfg: RunConfig):
    from .fiber1d import Grid1D, classify, minimize_band

    fld = classify(cfg.b1, cfg.b2)
    return fld, minimize_band(fld, Grid1D.default(fld, cfg.grid_n))


def _band(cfg):
    from .fiber1d import Grid1D, band_curve, classify

    fld = classify(cfg.b1, cfg.b2)
    xs = np.linspace(cfg.xi_min, cfg.xi_max, cfg.xi_n)
    pts = band_curve(fld, xs, Grid1D.default(fld, cfg.grid_n))
    rows = [(p.xi, p.mu, p.residual) for p in pts]
    return dict(case=fld.case, scale=fld.scale), {}, ("xi", "mu", "residual"), rows


def _minimize(cfg):
    fld, gs = _fiber_state(cfg)
    step = max(1, (len(gs.phi) - 1) // 400)
    t = gs.grid.t
    rows = list(zip(t[::step], gs.phi[::step], gs.dphi[::step]))
    res = dict(case=fld.case, scale=fld.scale, xi_b=gs.xi_b, beta_b=gs.beta_b,
               phi0=gs.phi0, dphi0=gs.dphi0)
    return res, {}, ("t", "phi", "dphi"), rows


def _moments(cfg):
    from .errors import WrongOrientation
    from .moments import j_breakdown, m3_closed_form, moment

    _, gs = _fiber_state(cfg)
    reps = [moment(gs, n) for n in range(4)]
    j = j_breakdown(gs)
    m1, m3 = reps[1].value, reps[3].value
    res = dict(xi_b=gs.xi_b, beta_b=gs.beta_b,
               moments={f"M{r.n}": r.value for r in reps},
               quadrature_error={f"M{r.n}": r.quadrature_error_estimate for r in reps},
               J=dict(j1=j.j1, j2=j.j2, j3=j.j3, total=j.j_total))
    checks = {"M1 = 0": _check(abs(m1), 1e-7),
              "J1 + J2 = 0": _check(abs(j.j1 + j.j2), 1e-5),
              "J = -M3 + xi^2 M1": _check(abs(j.j_total + m3 - gs.xi_b ** 2 * m1), 1e-5)}
    try:
        cf = m3_closed_form(gs)
        res["M3_closed_form"] = cf
        checks["M3 closed form"] = _check(abs(m3 - cf), 1e-5)
    except WrongOrientation:
        res["M3_closed_form"] = None
    rows = [(r.n, r.value, r.quadrature_error_estimate) for r in reps]
    return res, checks, ("n", "value", "quadrature_error"), rows


def _check(residual: float, tol: float) -> dict:
    return dict(residual=residual, tolerance=tol, status="PASS" if residual < tol else "FAIL")


def _map(cfg, fn, items):
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))          # keeps input order


def _trial(cfg):
    from .moments import moment
    from .trialstate import build_trial, rayleigh, rayleigh_with_error

    _, gs = _fiber_state(cfg)

    def one(d):
        ts = build_trial(gs, d)
        e, n, _ = rayleigh(ts)
        q, err = rayleigh_with_error(ts)
        return (d, e, n, q, gs.beta_b - q, err)

    rows = _map(cfg, one, cfg.delta)
    d2 = np.array([r[0] for r in rows]) ** 2
    gaps = np.array([r[4] for r in rows])
    coef = float(np.dot(gaps, d2) / np.dot(d2, d2)) if len(rows) else math.nan
    m3 = moment(gs, 3).value
    res = dict(beta_b=gs.beta_b, M3=m3, gap_coefficient=coef, leading_coefficient=m3 ** 2 / 4)
    checks = {f"quotient < beta at delta={r[0]:g}": dict(gap=r[4], status="PASS" if r[4] > 0 else "FAIL")
              for r in rows}
    return res, checks, ("delta", "energy", "norm2", "quotient", "gap", "quadrature_error"), rows


def _wedge(cfg):
    from .trialstate import WedgeGeometry
    from .wedge2d import GaugeField, agmon_fit, lambda_delta, symmetry_check

    fld, gs = _fiber_state(cfg)
    beta = gs.beta_b
    table = lambda_delta(GaugeField(fld.b1, fld.b2, cfg.delta[0] if cfg.delta else 0.1), cfg.delta,
                         beta, h=cfg.mesh_h, R_trunc=cfg.r_trunc, keep=True)
    rows, checks = [], {}
    for r in table.rows:
        try:
            sym = symmetry_check(r.fine, WedgeGeometry.from_delta(r.delta))
        except MagstepError:
            sym = math.nan
        try:
            rate = agmon_fit(r.fine, beta)
        except NoBoundState:
            rate = math.nan
        rows.append((r.delta, r.lam_coarse, r.lam_fine, r.lam, r.error, r.gap, sym, rate))
        checks[f"bound state at delta={r.delta:g}"] = dict(
            gap=r.gap, error=r.error, status="PASS" if r.gap > 3 * r.error else "FAIL")
    res = dict(beta_b=beta, gap_coefficient=table.coefficient, scale=fld.scale)
    cols = ("delta", "lam_coarse", "lam_fine", "lam", "error", "gap", "symmetry", "agmon_rate")
    return res, checks, cols, rows


def _domain(cfg):
    from .wedge2d import DomainSpec, lambda1_sweep

    fld, gs = _fiber_state(cfg)
    delta = cfg.delta[0] if cfg.delta else 0.1
    tab = lambda1_sweep(DomainSpec(fld.b1, fld.b2, delta), cfg.B, gs.beta_b)
    rows = [(r.B, r.lam_coarse, r.lam_fine, r.lam1, r.ratio, r.excess, r.concentration)
            for r in tab.rows]
    res = dict(reference=gs.beta_b, delta=delta, hB=tab.hB, differences=tab.differences)
    checks = {"ratio approaches reference": dict(status="PASS" if tab.error_decreasing else "FAIL"),
              "ratio above reference": dict(status="PASS" if tab.from_above else "FAIL"),
              "increasing on top half": dict(status="PASS" if tab.increasing_top_half else "FAIL")}
    return res, checks, ("B", "lam_coarse", "lam_fine", "lam1", "ratio", "excess", "concentration"), rows


def _verify(cfg):
    from .acceptance import run_all

    results = run_all(seed=cfg.seed, log=lambda s: print(s, file=sys.stderr))
    checks, rows = {}, []
    for r in results:
        detail = {k: v for k, v in r.detail.items() if k != "within_runtime"}
        checks[f"criterion {r.number}"] = dict(name=r.name, status="PASS" if r.passed else "FAIL",
                                               detail=detail)
        rows.append((r.number, r.name, "PASS" if r.passed else "FAIL"))
    npass = sum(r.passed for r in results)
    return dict(passed=npass, failed=len(results) - npass), checks, ("criterion", "name", "status"), rows


_RUNNERS = dict(band=_band, minimize=_minimize, moments=_moments, trial=_trial,
                wedge=_wedge, domain=_domain, verify=_verify)


# ---------------------------------------------------------------------------
# output

def _plain(x):
    """Convert numpy scalars and non-finite floats for JSON."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def render(cfg: RunConfig, results, checks, columns, rows) -> str:
    if cfg.format == "json":
        doc = dict(config=cfg.header(), results=dict(results, table=dict(columns=list(columns), rows=rows)),
                   checks=checks)
        return json.dumps(_plain(doc), indent=2) + "\n"
    buf = io.StringIO()
    for k, v in cfg.header().items():
        buf.write(f"# {k} = {_plain(v)}\n")
    for k, v in _plain(results).items():
        buf.write(f"# result {k} = {json.dumps(v)}\n")
    for k, v in checks.items():
        buf.write(f"# check {k} = {v['status']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(cfg_out: str | None, text: str):
    if cfg_out:
        with open(cfg_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    results, checks, columns, rows = _RUNNERS[cfg.command](cfg)
    _emit(cfg.out, render(cfg, results, checks, columns, rows))
    failed = any(c.get("status") == "FAIL" for c in checks.values())
    return 1 if failed and cfg.command == "verify" else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = resolve(args)
        return run(cfg)
    except (MagstepError, ValueError) as exc:
        code = 1 if isinstance(exc, ValueError) else 2
        record = dict(error=dict(type=type(exc).__name__, message=str(exc), exit_code=code),
                      config=cfg.header() if cfg else None)
        print(f"magstep: {exc}", file=sys.stderr)
        print(json.dumps(_plain(record)), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
