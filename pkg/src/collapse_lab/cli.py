"""Command-line front end: ``collapse-lab <command> [flags]``.

Every command writes either a JSON report (default) or a CSV table.  Reports
echo the inputs so that :func:`spec_from_report` can rebuild the run.
Invalid parameters exit with status 2, numerical failures with status 3; in
both cases a JSON error document goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import classical as cl
from . import observables as ob
from . import pde_lab as pl
from . import selfsim as ss
from ._io import atomic_write_text, format_csv
from .errors import CollapseLabError, InvalidParameterError, NumericalError

REPORT_SCHEMA = "collapse-lab/report/1"
ERROR_SCHEMA = "collapse-lab/error/1"
COMMANDS = ("profile", "classical", "norm", "means", "energy", "residual", "evolve", "figures")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class RunSpec:
    command: str
    params: Dict[str, Any]
    out: Optional[str] = None
    format: str = "json"


@dataclass
class Table:
    columns: List[str]
    rows: Any
    schema: str


@dataclass
class Result:
    outputs: Dict[str, Any] = field(default_factory=dict)
    table: Optional[Table] = None


# ---------------------------------------------------------------------------
# JSON encoding
# ---------------------------------------------------------------------------

def _encode(v):
    """Strict-JSON form: complex as {"re", "im"}, non-finite floats as strings."""
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": _encode(v.real), "im": _encode(v.imag)}
    if isinstance(v, np.ndarray):
        return [_encode(x) for x in v.tolist()]
    if is_dataclass(v):
        return _encode(asdict(v))
    if isinstance(v, dict):
        return {str(k): _encode(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _decode(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    if isinstance(v, dict):
        if set(v) == {"re", "im"}:
            return complex(_decode(v["re"]), _decode(v["im"]))
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return v


def emit_report(command: Optional[str], inputs: Dict[str, Any], outputs: Optional[Dict[str, Any]] = None) -> str:
    doc = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "command": command,
        "status": "ok",
        "inputs": _encode(inputs or {}),
        "outputs": _encode(outputs or {}),
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def spec_from_report(text: str):
    """(RunSpec, outputs) from a report produced by :func:`emit_report`."""
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise InvalidParameterError(f"not a collapse-lab report: {doc.get('schema')!r}")
    inputs = _decode(doc["inputs"])
    params = dict(inputs)
    out = params.pop("out", None)
    fmt = params.pop("format", "json")
    return RunSpec(doc["command"], params, out, fmt), _decode(doc["outputs"])


def argv_from_spec(spec: RunSpec) -> List[str]:
    """Flags that reproduce ``spec`` when passed to :func:`main`."""
    argv = [spec.command]
    for k, v in spec.params.items():
        if v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            argv.append(flag)
        elif isinstance(v, list):
            argv += [flag, ",".join(repr(float(x)) for x in v)]
        elif isinstance(v, float):
            argv += [flag, repr(v)]
        else:
            argv += [flag, str(v)]
    if spec.out:
        argv += ["--out", spec.out]
    argv += ["--format", spec.format]
    return argv


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(sp, xi=(1e-3, 10.0), points=500):
    sp.add_argument("--xi-min", type=float, default=xi[0])
    sp.add_argument("--xi-max", type=float, default=xi[1])
    sp.add_argument("--points", type=int, default=points)
    sp.add_argument("--tol", type=float, default=1e-11)
    sp.add_argument("--out", default=None, help="output file (default: stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default="json")


def _similarity(sp):
    sp.add_argument("--hbar", type=float, default=1.0)
    sp.add_argument("--mass", type=float, default=1.0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--beta", type=float, default=None)
    g.add_argument("--alpha", type=float, default=None, help="default 30 when --beta is not given")
    sp.add_argument("--ell", type=int, default=0)
    sp.add_argument("--mu-re", "--mu", dest="mu_re", type=float, default=0.0)
    sp.add_argument("--mu-im", type=float, default=0.0)
    sp.add_argument("--branch", choices=("inner", "outer"), default=None,
                    help="normalizable branch (default: the one that converges for mu')")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameterError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="collapse-lab", description="Quantum fall to the centre: exact self-similar solutions.")
    ap.add_argument("--version", action="version", version=f"collapse-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="R(xi) and R'(xi) on a log grid")
    _similarity(sp)
    _common(sp)

    sp = sub.add_parser("classical", help="classical orbit data and samples")
    sp.add_argument("--m", "--mass", dest="m", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--M", dest="M", type=float, default=0.0)
    sp.add_argument("--E", dest="E", type=float, default=0.0)
    sp.add_argument("--orbit-branch", choices=("collapse", "escape"), default="collapse")
    sp.add_argument("--points", type=int, default=0, help="orbit samples (0: summary only)")
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("norm", help="N_xi and the norm exponent")
    _similarity(sp)
    _common(sp, points=41)
    sp.add_argument("--t-min", type=float, default=-10.0)
    sp.add_argument("--t-max", type=float, default=-0.1)

    sp = sub.add_parser("means", help="<r>, <p_r> and spreads in both conventions")
    _similarity(sp)
    _common(sp, points=21)
    sp.add_argument("--t-min", type=float, default=-10.0)
    sp.add_argument("--t-max", type=float, default=-0.1)
    sp.add_argument("--hermitized", action="store_true")

    sp = sub.add_parser("energy", help="the mean-energy integral and its identities")
    _similarity(sp)
    _common(sp)

    sp = sub.add_parser("residual", help="ODE and PDE residuals")
    _similarity(sp)
    _common(sp)
    sp.add_argument("--r-min", type=float, default=0.01)
    sp.add_argument("--r-max", type=float, default=5.0)
    sp.add_argument("--t-min", type=float, default=-4.0)
    sp.add_argument("--t-max", type=float, default=-0.25)
    sp.add_argument("--t-points", type=int, default=40)

    sp = sub.add_parser("evolve", help="direct time evolution")
    _similarity(sp)
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--r-min", type=float, default=1e-3)
    sp.add_argument("--r-max", type=float, default=12.0)
    sp.add_argument("--n-r", type=int, default=4000)
    sp.add_argument("--dt", type=float, default=5e-4)
    sp.add_argument("--t-start", type=float, default=-2.0)
    sp.add_argument("--t-end", type=float, default=-1.0)
    sp.add_argument("--inner-bc", choices=(pl.DIRICHLET, pl.ABSORBING), default=pl.DIRICHLET)
    sp.add_argument("--initial", choices=("selfsim", "ring"), default="selfsim",
                    help="ring: zero-energy ring with its own time window (t-start/t-end/dt ignored)")
    sp.add_argument("--r0", type=float, default=4.0)
    sp.add_argument("--width", type=float, default=3.0)

    sp = sub.add_parser("figures", help="data behind the two profile figures")
    _similarity(sp)
    sp.add_argument("--fig", type=int, choices=(1, 2), default=1)
    sp.add_argument("--alphas", type=_float_list, default=None, help="comma-separated alphas for --fig 2")
    _common(sp, xi=(1e-6, 30.0), points=400)
    return ap


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _workers() -> int:
    raw = os.environ.get("COLLAPSE_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _params(a, alpha=None):
    if alpha is None and a.beta is None:
        alpha = a.alpha if a.alpha is not None else 30.0
    return ss.make_params(hbar=a.hbar, m=a.mass, beta=None if alpha is not None else a.beta,
                          ell=a.ell, mu=complex(a.mu_re, a.mu_im), alpha=alpha)


def _branch(a, p) -> str:
    if a.branch is not None:
        return a.branch
    return "inner" if p.mu_re < -0.75 else "outer"


def _solution(a, alpha=None):
    p = _params(a, alpha)
    return p, ss.branch_coefficients(p, _branch(a, p))


def _xi_grid(a):
    if not (0 < a.xi_min < a.xi_max):
        raise InvalidParameterError("need 0 < xi-min < xi-max")
    if a.points < 2:
        raise InvalidParameterError("need at least 2 points")
    return np.geomspace(a.xi_min, a.xi_max, a.points)


def _t_grid(a):
    if not (a.t_min < a.t_max < 0):
        raise InvalidParameterError("need t-min < t-max < 0")
    if a.points < 3:
        raise InvalidParameterError("need at least 3 points")
    return -np.geomspace(-a.t_min, -a.t_max, a.points)


def _sim_summary(p, sol):
    return {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "chi": p.chi,
            "branch": sol.branch, "C1": sol.C1, "C2": sol.C2}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_profile(a) -> Result:
    p, sol = _solution(a)
    xi = _xi_grid(a)
    R, dR = ss.radial_eval(p, sol, xi)
    rows = np.stack([xi, R.real, R.imag, np.abs(R), dR.real, dR.imag], axis=1)
    out = _sim_summary(p, sol)
    out.update(xi=xi, R=R, dR=dR)
    return Result(out, Table(["xi", "re_R", "im_R", "abs_R", "re_dR", "im_dR"], rows, "collapse-lab/profile/1"))


def cmd_classical(a) -> Result:
    p = cl.ClassicalParams(a.m, a.beta, a.M, a.E)
    o = cl.make_orbit(p, a.orbit_branch)
    out = {"regime": o.regime, "K": p.K, "chi": o.chi, "t0": o.t0, "rmax": o.r_max,
           "domain": list(o.domain())}
    table = None
    if a.points:
        if a.points < 2:
            raise InvalidParameterError("need at least 2 orbit samples")
        lo, hi = o.domain()
        span = o.t0 if o.t0 is not None else 1.0
        lo = lo if math.isfinite(lo) else hi - 2 * span
        hi = hi if math.isfinite(hi) else lo + 2 * span
        t = np.linspace(lo, hi, a.points)
        r, pr = cl.evaluate_orbit(o, p, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = cl.energy(p, r, pr)
        table = Table(["t", "r", "p_r", "energy"], np.stack([t, r, pr, e], axis=1), "collapse-lab/orbit/1")
        out["samples"] = {"t": t, "r": r, "p_r": pr}
    return Result(out, table)


def cmd_norm(a) -> Result:
    p, sol = _solution(a)
    q = ob.norm_xi(p, sol, a.tol)
    t = _t_grid(a)
    n = ob.norm_t(p, sol, t, q.value.real)
    fit = ob.fit_power_law(-t, n)
    out = _sim_summary(p, sol)
    out.update(N_xi=q.value.real, abs_err=q.abs_err, tail_est=q.tail_est,
               N_xi_identity=ob.norm_flux_identity(p, sol),
               exponent=ob.norm_exponent(p), fit=fit)
    return Result(out, Table(["t", "norm"], np.stack([t, n], axis=1), "collapse-lab/norm/1"))


def cmd_means(a) -> Result:
    p, sol = _solution(a)
    t = _t_grid(a)
    mom = ob.xi_moments(p, sol, a.hermitized)
    rows, reports = [], {"i": [], "ii": []}
    for conv in ("i", "ii"):
        for tk in t:
            m = ob.mean_r_pr(p, sol, float(tk), conv, a.hermitized, mom)
            reports[conv].append(m)
            rows.append([0.0 if conv == "i" else 1.0, tk, m.mean_r, m.mean_pr.real, m.mean_pr.imag,
                         m.delta_r, m.delta_pr, m.scale_product])
    out = _sim_summary(p, sol)
    for conv in ("i", "ii"):
        sp = np.array([m.scale_product for m in reports[conv]])
        out[f"scale_product_fit_{conv}"] = ob.fit_power_law(-t, sp)
        out[f"reports_{conv}"] = reports[conv]
    out["expected_exponent_i"] = 3.0 + 4.0 * p.mu_re
    cols = ["convention_ii", "t", "mean_r", "re_mean_pr", "im_mean_pr", "delta_r", "delta_pr", "scale_product"]
    return Result(out, Table(cols, np.array(rows), "collapse-lab/means/1"))


def cmd_energy(a) -> Result:
    p, sol = _solution(a)
    e = ob.energy_integral(p, sol)
    out = _sim_summary(p, sol)
    out.update(re_I=e.I.real, im_I=e.I.imag, abs_err=e.abs_err, abs_integral=e.abs_integral,
               im_ratio=e.im_ratio, norm=e.norm, identity_deviation=e.identity_deviation,
               tail_est=e.tail_est)
    row = [[e.I.real, e.I.imag, e.abs_err, e.abs_integral, e.im_ratio, e.norm, e.identity_deviation]]
    cols = ["re_I", "im_I", "abs_err", "abs_integral", "im_ratio", "norm", "identity_deviation"]
    return Result(out, Table(cols, np.array(row), "collapse-lab/energy/1"))


def cmd_residual(a) -> Result:
    p, sol = _solution(a)
    xi = _xi_grid(a)
    ode = ss.ode_residual(p, sol, xi)
    if not (0 < a.r_min < a.r_max) or not (a.t_min < a.t_max < 0) or a.t_points < 2:
        raise InvalidParameterError("bad (r, t) grid")
    r = np.geomspace(a.r_min, a.r_max, a.points)
    t = np.linspace(a.t_min, a.t_max, a.t_points)
    rr, tt = np.meshgrid(r, t)
    pde = ss.pde_residual(p, sol, rr.ravel(), tt.ravel())
    out = _sim_summary(p, sol)
    out.update(ode_max=float(np.max(ode)), pde_max=float(np.max(pde)))
    return Result(out, Table(["xi", "ode_residual"], np.stack([xi, ode], axis=1), "collapse-lab/residual/1"))


def cmd_evolve(a) -> Result:
    cfg = pl.EvolveConfig(a.r_min, a.r_max, a.n_r, a.dt, a.t_start, a.t_end, inner_bc=a.inner_bc, ell=a.ell)
    out: Dict[str, Any] = {}
    if a.initial == "ring":
        pp = pl.PotentialParams(a.hbar, a.mass, a.beta if a.beta is not None else ss.beta_for_alpha(
            a.alpha if a.alpha is not None else 30.0, a.hbar, a.mass, a.ell), a.ell)
        run = pl.ring_experiment(pp, a.r0, a.width, a.n_r)
        out.update(nu_fit=run.fit, reliable=run.reliable, contraction=run.contraction,
                   reflection=run.reflection, notes=run.notes)
        rows = np.stack([run.times, run.radii], axis=1)
        return Result(out, Table(["t", "median_radius"], rows, "collapse-lab/attractor/1"))
    p, sol = _solution(a)
    prof = pl.selfsim_profile(cfg, p, sol, cfg.t_start)
    bnd = pl.selfsim_boundary(p, sol, cfg.r_min, cfg.r_max, left_zero=cfg.inner_bc == pl.ABSORBING)
    final = pl.evolve(cfg, prof, p, boundary=bnd)[-1]
    exact = pl.selfsim_profile(cfg, p, sol, cfg.t_end)
    out.update(_sim_summary(p, sol))
    out["relative_l2"] = pl.relative_l2(final, exact.u)
    out["norm_start"] = prof.norm()
    out["norm_end"] = final.norm()
    rows = np.stack([final.r, final.u.real, final.u.imag, exact.u.real, exact.u.imag], axis=1)
    return Result(out, Table(["r", "re_u", "im_u", "re_u_exact", "im_u_exact"], rows, "collapse-lab/evolve/1"))


def _fig2_curve(a, alpha, xi):
    p, sol = _solution(a, alpha)
    R, _ = ss.radial_eval(p, sol, xi)
    return np.log10(np.abs(R) ** 2)


def cmd_figures(a) -> Result:
    if a.fig == 1:
        p, sol = _solution(a)
        n = a.points
        rows, out = [], _sim_summary(p, sol)
        for w, (lo, hi) in enumerate(((1.0, 10.0), (1e-16, 1e-15))):
            xi = np.linspace(lo, hi, n)
            R, _ = ss.radial_eval(p, sol, xi)
            lock = ob.phase_lock(p, sol, lo, hi)
            out[f"window_{w}"] = {"xi": [lo, hi], "interlaced": lock.interlaced, "monotone": lock.monotone,
                                  "zeros": lock.n_zeros, "extrema": lock.n_extrema}
            rows.append(np.stack([np.full(n, float(w)), xi, np.abs(R), R.real, R.imag], axis=1))
        return Result(out, Table(["window", "xi", "abs_R", "re_R", "im_R"], np.vstack(rows), "collapse-lab/fig1/1"))
    alphas = a.alphas or [math.sqrt(7.0), 10.0, 20.0, 30.0]
    xi = _xi_grid(a)
    with ThreadPoolExecutor(max_workers=min(_workers(), len(alphas))) as ex:
        curves = list(ex.map(lambda al: _fig2_curve(a, al, xi), alphas))
    rows = [np.stack([np.full(xi.size, al), np.log10(xi), c], axis=1) for al, c in zip(alphas, curves)]
    out = {"alphas": alphas, "slopes_small": [], "slopes_large": []}
    lx = np.log10(xi)
    for c in curves:
        s = (lx >= -6) & (lx <= -3)
        l = (xi >= 10) & (xi <= 30)
        out["slopes_small"].append(float(np.polyfit(lx[s], c[s], 1)[0]) if s.sum() >= 3 else math.nan)
        out["slopes_large"].append(float(np.polyfit(lx[l], c[l], 1)[0]) if l.sum() >= 3 else math.nan)
    return Result(out, Table(["alpha", "log10_xi", "log10_abs_R2"], np.vstack(rows), "collapse-lab/fig2/1"))


HANDLERS = {
    "profile": cmd_profile, "classical": cmd_classical, "norm": cmd_norm, "means": cmd_means,
    "energy": cmd_energy, "residual": cmd_residual, "evolve": cmd_evolve, "figures": cmd_figures,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _error_doc(exc: BaseException, code: int, command: Optional[str]) -> str:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("margin", "exponent", "end", "error_estimate"):
        if getattr(exc, attr, None) is not None:
            err[attr] = _encode(getattr(exc, attr))
    doc = {"schema": ERROR_SCHEMA, "version": __version__, "command": command, "status": "error", "error": err}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run(args) -> str:
    """Execute a parsed command and return the text to emit."""
    res = HANDLERS[args.command](args)
    inputs = {k: v for k, v in vars(args).items() if k != "command"}
    if args.format == "csv":
        if res.table is None:
            raise InvalidParameterError(f"{args.command} has no tabular output with these flags")
        return format_csv(res.table.columns, res.table.rows, res.table.schema)
    return emit_report(args.command, inputs, res.outputs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except InvalidParameterError as e:
        sys.stderr.write(_error_doc(e, EXIT_INVALID, None))
        return EXIT_INVALID
    try:
        text = run(args)
    except InvalidParameterError as e:
        sys.stderr.write(_error_doc(e, EXIT_INVALID, args.command))
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as e:
        sys.stderr.write(_error_doc(e, EXIT_NUMERICAL, args.command))
        return EXIT_NUMERICAL
    except CollapseLabError as e:
        sys.stderr.write(_error_doc(e, EXIT_NUMERICAL, args.command))
        return EXIT_NUMERICAL
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
