"""Command-line front end: ``stochext <command> --scenario FILE --out PATH``.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import expr as ex
from .bump import bump_eval
from .errors import DomainError, NumericalError, StochextError
from .extremum import (
    CharacteristicFunction, default_k_grid, estimate, no_extrema_test, trace_curve,
)
from .oracle import grid_extrema
from .oscint import oscillatory_integral, phase_env
from .phase import asymptotic_sum, cm_constant, find_stationary_points, theorem2_asymptotic
from .prob import Box, Deterministic, Discrete
from .scenario import jsonable, load_scenario

log = logging.getLogger("stochext")

COMMANDS = ("integral", "phases", "asym", "trace", "estimate", "oracle", "report")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _atoms(sc):
    """(point, weight) pairs for the per-w one-dimensional analyses."""
    if isinstance(sc.model, Deterministic):
        return [((), 1.0)]
    if isinstance(sc.model, Discrete):
        return list(sc.model.atoms)
    return [(sc.omega_point, 1.0)]


def run_integral(sc, k=None):
    k = sc.k if k is None else k
    res = oscillatory_integral(sc.process.expr, sc.omega_point, sc.bump, k, sc.plan,
                               full_output=True)
    return {"k": k, "omega": list(sc.omega_point), "value": res.value, "abs": abs(res.value),
            "error": res.error, "panels": res.panels}


def run_phases(sc, k=None):
    f = sc.process.expr
    pts = find_stationary_points(f, sc.omega_point, sc.bump.support)
    rows = []
    for p in pts:
        d = p.to_dict()
        d["phi"] = float(bump_eval(sc.bump, p.t_star))
        d["C_m"] = cm_constant(p.order) if p.order else None
        rows.append(d)
    out = {"omega": list(sc.omega_point), "window": list(sc.bump.support), "points": rows}
    if isinstance(sc.model, Box):
        try:
            _, rep = theorem2_asymptotic(sc.process, sc.model, sc.bump, sc.k if k is None else k)
            out["joint"] = rep.to_dict()
        except NumericalError as exc:
            out["joint"] = {"error": str(exc)}
    return out


def _one_dim_asym(sc, ks):
    bump = sc.bump.with_normalized(False)
    rows = []
    per_atom = []
    for omega, _ in _atoms(sc):
        pts = find_stationary_points(sc.process.expr, omega, bump.support)
        phis = [float(bump_eval(bump, p.t_star)) for p in pts]
        per_atom.append((omega, pts, phis))
    orders = [p.order for _, pts, _ in per_atom for p in pts]
    m = max((o for o in orders if o), default=None)
    for k in ks:
        quad, asym, err = 0j, 0j, 0.0
        for (omega, pts, phis), (_, weight) in zip(per_atom, _atoms(sc)):
            res = oscillatory_integral(sc.process.expr, omega, bump, k, sc.plan, full_output=True)
            quad += weight * res.value
            err += weight * res.error
            if pts:
                asym += weight * asymptotic_sum(pts, phis, k)
        row = {"k": k, "quadrature": quad, "quad_error": err}
        if m is None:
            row.update(asymptotic=None, relative_error=None, scaled_remainder=None)
        else:
            row.update(asymptotic=asym, relative_error=abs(quad - asym) / abs(asym),
                       scaled_remainder=abs(quad - asym) * k ** (2.0 / m))
        rows.append(row)
    return {"route": "single-variable", "max_order": m, "rows": rows}


def _joint_asym(sc, ks, threads):
    bump = sc.bump.with_normalized(False)
    cf = CharacteristicFunction(sc.process, sc.model, bump, sc.plan, max(ks))
    quad = cf(np.asarray(ks, dtype=float), threads)
    rows, report = [], None
    for k, q in zip(ks, quad):
        val, report = theorem2_asymptotic(sc.process, sc.model, bump, k)
        rows.append({"k": k, "quadrature": complex(q), "quad_error": cf.max_error,
                     "asymptotic": val, "relative_error": abs(q - val) / abs(val)})
    return {"route": "joint", "critical_point": report.to_dict(), "rows": rows}


def run_asym(sc, k=None, threads=1):
    """Quadrature against the leading stationary-phase term, with the cutoff unnormalized."""
    ks = tuple(sc.asym_k) if k is None else (k,)
    if isinstance(sc.model, Box):
        return _joint_asym(sc, ks, threads)
    if isinstance(sc.model, (Deterministic, Discrete)):
        return _one_dim_asym(sc, ks)
    from .errors import UnsupportedModelError
    raise UnsupportedModelError(f"asym has no route for a {type(sc.model).__name__} model")


def run_trace(sc, k_max=None, threads=1, lambda_refine=1):
    """Characteristic curve of the scenario; the cutoff is always normalized here."""
    k_max = sc.k_max if k_max is None else k_max
    return trace_curve(sc.process, sc.model, sc.bump.with_normalized(), k_max, sc.plan,
                       default_k_grid(k_max, sc.grid_size), lambda_refine, threads)


def run_estimate(sc, k_max=None, threads=1, trace=None):
    trace = trace or run_trace(sc, k_max, threads)
    est = estimate(trace)
    verdict, report = no_extrema_test(est, sc.tolerance)
    out = est.to_dict()
    out.update(no_extrema=verdict, tolerance=sc.tolerance, k_max=trace.k_max,
               trace_points=len(trace.lam), refinements=trace.refinements,
               min_abs_J=trace.min_abs_J, theta_k_max=float(trace.theta[-1]))
    return out, est, trace


def run_oracle(sc, resolution=129):
    return grid_extrema(sc.process, sc.model, resolution)


def _document(sc, command, result):
    return {"command": command, "scenario": sc.name, "scenario_sha256": sc.sha256,
            "tool": "stochext", "version": __version__, "result": jsonable(result)}


def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _trace_csv(trace):
    buf = io.StringIO()
    trace.write_csv(buf)
    return buf.getvalue()


def _png(out):
    return Path(out).with_suffix(".png")


def _plot(command, sc, result, path, extra=None):
    from . import plotting as pl
    title = sc.name
    if command == "trace":
        return pl.plot_trace(result, path, title)
    if command == "estimate":
        return pl.plot_estimate(extra, path, title)
    if command == "asym":
        return pl.plot_asym(jsonable(result["rows"]), path, title)
    if command == "phases":
        t = np.linspace(*sc.bump.support, 801)
        fv = np.broadcast_to(ex.evaluate(sc.process.expr, phase_env(sc.omega_point, t)), t.shape)
        return pl.plot_phases(fv, t, result["points"], path, title)
    if command == "integral":
        t = np.linspace(*sc.bump.support, 4001)
        f = np.broadcast_to(ex.evaluate(sc.process.expr, phase_env(sc.omega_point, t)), t.shape)
        vals = bump_eval(sc.bump, t) * np.exp(1j * result["k"] * f)
        return pl.plot_integrand(t, vals, path, title)
    if command == "oracle":
        lower, upper, t = _oracle_profile(sc)
        return pl.plot_oracle(t, lower, upper, result, path, title)
    raise ValueError(command)


def _oracle_profile(sc, n=201):
    t = np.linspace(sc.process.a, sc.process.b, n)
    pts = sc.model.support_points(65)
    vals = np.array([np.broadcast_to(ex.evaluate(sc.process.expr, phase_env(w, t)), t.shape)
                     for w in pts])
    return vals.min(axis=0), vals.max(axis=0), t


def run_report(sc, out_dir, threads=1, plot=True):
    """Everything for one scenario in ``out_dir``: JSON summary, trace CSV, figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    ext = run_oracle(sc)
    summary["oracle"] = ext.to_dict()
    try:
        summary["asym"] = run_asym(sc, threads=threads)
    except StochextError as exc:
        summary["asym"] = {"error": str(exc)}
    try:
        est_d, est, trace = run_estimate(sc, threads=threads)
    except NumericalError as exc:
        summary["estimate"] = {"error": str(exc)}
        est = trace = None
    else:
        summary["estimate"] = est_d
        summary["bracketed"] = bool(ext.min - 0.05 <= est.smin and est.smax <= ext.max + 0.05)
        _write(out_dir / "trace.csv", _trace_csv(trace))
    files = ["summary.json"] + (["trace.csv"] if trace is not None else [])
    if plot:
        from . import plotting as pl
        if not pl.available():
            log.warning("matplotlib not installed; skipping figures")
        else:
            lower, upper, t = _oracle_profile(sc)
            pl.plot_oracle(t, lower, upper, ext, out_dir / "oracle.png", sc.name)
            files.append("oracle.png")
            if "rows" in summary["asym"]:
                pl.plot_asym(jsonable(summary["asym"]["rows"]), out_dir / "asym.png", sc.name)
                files.append("asym.png")
            if trace is not None:
                pl.plot_trace(trace, out_dir / "trace.png", sc.name)
                pl.plot_estimate(est, out_dir / "estimate.png", sc.name, ext)
                files += ["trace.png", "estimate.png"]
    summary["files"] = sorted(files)
    _write(out_dir / "summary.json", dumps(_document(sc, "report", summary)))
    return summary


def build_parser():
    p = argparse.ArgumentParser(prog="stochext", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stochext {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "integral": "single oscillatory integral I(k, w) as JSON",
        "phases": "stationary points of the phase as JSON",
        "asym": "quadrature against leading asymptotic terms over a k grid",
        "trace": "characteristic curve samples as CSV",
        "estimate": "Smax/Smin estimate and no-extrema verdict as JSON",
        "oracle": "brute-force grid extrema as JSON",
        "report": "all of the above into a directory, with figures",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--scenario", required=True,
                       help="scenario JSON file, or the name of a bundled scenario")
        s.add_argument("--out", required=True,
                       help="output directory" if name == "report" else "output file")
        s.add_argument("--k", type=float, default=None,
                       help="frequency (k_max for trace/estimate/report)")
        s.add_argument("--threads", type=int, default=1)
        if name == "report":
            s.add_argument("--no-plot", dest="plot", action="store_false",
                           help="skip the PNG figures")
        else:
            s.add_argument("--plot", action="store_true",
                           help="also write a PNG figure next to --out")
        if name == "oracle":
            s.add_argument("--resolution", type=int, default=129)
    return p


def _execute(args):
    sc = load_scenario(args.scenario)
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    if args.k is not None and not (math.isfinite(args.k) and args.k > 0):
        raise ValueError("--k must be a positive number")
    cmd = args.command
    if cmd == "report":
        run_report(sc, args.out, args.threads, args.plot)
        return
    extra = None
    if cmd == "integral":
        result = run_integral(sc, args.k)
    elif cmd == "phases":
        result = run_phases(sc, args.k)
    elif cmd == "asym":
        result = run_asym(sc, args.k, args.threads)
    elif cmd == "trace":
        result = run_trace(sc, args.k, args.threads)
        _write(args.out, _trace_csv(result))
    elif cmd == "estimate":
        result, extra, _ = run_estimate(sc, args.k, args.threads)
    else:
        result = run_oracle(sc, args.resolution)
    if cmd != "trace":
        payload = result.to_dict() if hasattr(result, "to_dict") else result
        _write(args.out, dumps(_document(sc, cmd, payload)))
    if args.plot:
        _plot(cmd, sc, result, _png(args.out), extra)


def main(argv=None):
    logging.basicConfig(format="stochext: %(levelname)s: %(message)s", level=logging.INFO)
    args = build_parser().parse_args(argv)
    try:
        _execute(args)
    except (NumericalError, DomainError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except (StochextError, ValueError, TypeError, RuntimeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
