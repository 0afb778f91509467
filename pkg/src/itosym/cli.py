"""Batch front end.

Subcommands: classify | symmetry | verify | integrate | convergence.
Global flags: --seed <u64> (default 0, never wall-clock entropy),
--out <dir>, --deterministic (omit the timestamp from reports).

Reports are JSON (sorted keys, stable float repr), trajectories are CSV
(t,w,x_exact,x_scheme at 17 significant digits), and the integrate /
convergence report paths also render PNG figures next to the delimited
output.

Exit codes: 0 ok, 1 config error, 2 evaluation error, 3 unclassified,
4 all paths truncated.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import classifier, determining, integrate, model, plots, transforms
from .exprlang import ExprError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_EVAL = 2
EXIT_UNCLASSIFIED = 3
EXIT_ALL_TRUNCATED = 4


class ConfigError(Exception):
    pass


class EvalError(Exception):
    pass


def _load_problem(path: str) -> model.SdeProblem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        problem = model.problem_from_json(raw)
    except (OSError, json.JSONDecodeError, model.ModelError, ExprError,
            KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot load config {path!r}: {exc}") from exc
    violations = model.validate(problem)
    if violations:
        raise ConfigError(f"invalid problem in {path!r}: " + "; ".join(violations))
    return problem


def _params_json(params: model.CaseParams | None) -> dict | None:
    if params is None:
        return None
    out: dict = {}
    for name in ("c", "c0", "c1", "beta"):
        value = getattr(params, name)
        if value is not None:
            out[name] = float(value)
    for name in ("h", "H", "a", "A", "b", "B"):
        value = getattr(params, name)
        if value is None:
            continue
        try:
            out[name] = model._timefn_to_json(value)
        except model.ModelError:
            out[name] = "(numeric)"
    return out


def _emit(args, name: str, report: dict) -> None:
    if not args.deterministic:
        report = dict(report)
        report["generatedAt"] = datetime.now(timezone.utc).isoformat()
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / name).write_text(text, encoding="utf-8")


def _outdir(args) -> Path:
    outdir = Path(args.out) if args.out else Path("itosym_out")
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _float17(v: float) -> str:
    return f"{v:.17g}"


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    problem = _load_problem(args.config)
    try:
        result = classifier.classify(problem)
    except classifier.ClassifierError as exc:
        raise EvalError(str(exc)) from exc
    report = {
        "case": result.case if result.classified else "unclassified",
        "params": _params_json(result.params),
        "residual": result.residual if math.isfinite(result.residual) else None,
        "symmetry": result.symmetry.label if result.symmetry else None,
    }
    _emit(args, "classify.json", report)
    return EXIT_OK if result.classified else EXIT_UNCLASSIFIED


def cmd_symmetry(args) -> int:
    problem = _load_problem(args.config)
    try:
        result = classifier.classify(problem)
    except classifier.ClassifierError as exc:
        raise EvalError(str(exc)) from exc
    if not result.classified:
        _emit(args, "symmetry.json", {"case": "unclassified", "phi": None})
        return EXIT_UNCLASSIFIED
    try:
        sym = classifier.build_symmetry(result, problem.noise, P=args.p)
    except (classifier.ClassifierError, ExprError) as exc:
        raise ConfigError(str(exc)) from exc
    w_report = None
    w_note = None
    if args.w_r is not None:
        try:
            omega = classifier.build_w_symmetry(result.case, result.params,
                                                args.w_r, problem.noise,
                                                gamma=args.w_gamma)
            w_report = {"omega": omega.label, "r": omega.r, "gamma": args.w_gamma}
        except classifier.ClassifierError as exc:
            w_note = str(exc)
    report = {
        "case": result.case,
        "params": _params_json(result.params),
        "phi": sym.label,
        "r": sym.r,
        "wSymmetry": w_report,
        "wSymmetryNote": w_note,
    }
    _emit(args, "symmetry.json", report)
    return EXIT_OK


def cmd_verify(args) -> int:
    problem = _load_problem(args.config)
    points = determining.probe_points(args.points, seed=args.seed)
    if args.phi is not None:
        try:
            sym = classifier.expression_symmetry(args.phi, r=args.r)
        except ExprError as exc:
            raise ConfigError(f"bad --phi expression: {exc}") from exc
        if max(abs(sym.phi(*pt)) for pt in points) < 1e-12:
            raise ConfigError("rejected: trivial symmetry (phi = 0)")
    else:
        try:
            result = classifier.classify(problem)
        except classifier.ClassifierError as exc:
            raise EvalError(str(exc)) from exc
        if not result.classified:
            _emit(args, "verify.json", {"case": "unclassified"})
            return EXIT_UNCLASSIFIED
        sym = result.symmetry
    r1s, r2s, fos = [], [], []
    import warnings as _warnings
    for pt in points:
        r1, r2 = determining.residuals(problem, sym, pt)
        r1s.append(abs(r1))
        r2s.append(abs(r2))
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            fos.append(abs(determining.first_order_residual(problem, sym, pt)))
    remark16 = None
    if sym.r == 0.0:
        vals = []
        for pt in points[:20]:
            if abs(sym.phi(*pt)) > 1e-6:
                vals.append(abs(determining.remark16_criterion(problem, sym, pt)))
        remark16 = max(vals) if vals else None
    obstruction = None
    obstruction_unit = None
    if problem.noise.kind == "simple":
        obstruction = determining.w_obstruction(problem.noise, sym.r, 1.0)
        obstruction_unit = determining.w_obstruction(problem.noise, 1.0, 1.0)
    report = {
        "phi": sym.label,
        "r": sym.r,
        "points": len(points),
        "maxAbsR1": max(r1s),
        "meanAbsR1": sum(r1s) / len(r1s),
        "maxAbsR2": max(r2s),
        "meanAbsR2": sum(r2s) / len(r2s),
        "maxAbsFirstOrder": max(fos),
        "remark16MaxAbs": remark16,
        "wObstruction": obstruction,
        "wObstructionUnitR": obstruction_unit,
    }
    _emit(args, "verify.json", report)
    return EXIT_OK


def cmd_integrate(args) -> int:
    problem = _load_problem(args.config)
    span = args.t1 - args.t0
    if args.dt <= 0 or args.dt > span:
        raise ConfigError(f"--dt must be positive and at most T = {span:g}")
    n = max(1, round(span / args.dt))
    try:
        result = classifier.classify(problem)
    except classifier.ClassifierError as exc:
        raise EvalError(str(exc)) from exc
    if not result.classified:
        _emit(args, "integrate.json", {"case": "unclassified"})
        return EXIT_UNCLASSIFIED
    solver = integrate.exact_solver(problem, result)
    scheme = integrate.milstein if args.scheme == "milstein" else integrate.euler_maruyama
    outdir = _outdir(args)
    pairs = []
    exact_truncated = 0
    scheme_truncated = 0
    for i in range(args.paths):
        path = integrate.wiener_path(args.seed, i, args.t0, args.t1, n)
        exact_sol = solver(problem, args.x0, path)
        scheme_sol = scheme(problem, args.x0, path)
        exact_truncated += 0 if exact_sol.ok else 1
        scheme_truncated += 0 if scheme_sol.ok else 1
        csv_path = outdir / f"path_{i:04d}.csv"
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("t,w,x_exact,x_scheme\n")
            for t, w, xe, xs in zip(path.times, path.values,
                                    exact_sol.states, scheme_sol.states):
                fh.write(",".join(_float17(v) for v in (t, w, xe, xs)) + "\n")
        if exact_sol.ok and scheme_sol.ok:
            pairs.append((exact_sol, scheme_sol))
    report = {
        "case": result.case,
        "scheme": scheme.__name__,
        "nPaths": args.paths,
        "dt": span / n,
        "truncated": {"exact": exact_truncated, "scheme": scheme_truncated},
        "blowUpFraction": exact_truncated / args.paths,
        "csvDir": str(outdir),
    }
    if pairs:
        err = integrate.error_report(pairs, span / n)
        report["endpoint"] = {"meanAbsError": err.endpoint_abs_error,
                              "maxAbsError": err.max_abs_error,
                              "paths": err.n_paths}
        figure = outdir / "paths.png"
        plots.save_paths_figure(figure, pairs[:8],
                                title=f"case {result.case}: exact vs {scheme.__name__}")
        report["figure"] = str(figure)
    _emit(args, "integrate.json", report)
    if not pairs:
        print("all paths truncated", file=sys.stderr)
        return EXIT_ALL_TRUNCATED
    return EXIT_OK


def cmd_convergence(args) -> int:
    problem = _load_problem(args.config)
    if args.levels < 4:
        raise ConfigError("--levels must be at least 4")
    try:
        result = classifier.classify(problem)
    except classifier.ClassifierError as exc:
        raise EvalError(str(exc)) from exc
    if not result.classified:
        _emit(args, "convergence.json", {"case": "unclassified"})
        return EXIT_UNCLASSIFIED
    solver = integrate.exact_solver(problem, result)
    scheme = integrate.milstein if args.scheme == "milstein" else integrate.euler_maruyama
    study = integrate.convergence_study(
        problem, solver, scheme, levels=args.levels, n_paths=args.paths,
        seed=args.seed, x0=args.x0, t0=args.t0, t1=args.t1, n_base=args.n_base)
    rows = [{"dt": r.dt, "meanEndpointError": r.mean_endpoint_error,
             "paths": r.n_paths} for r in study.rows]
    report = {
        "case": result.case,
        "scheme": scheme.__name__,
        "rows": rows,
        "slope": None if math.isnan(study.slope) else study.slope,
        "degenerate": study.degenerate,
    }
    outdir = _outdir(args)
    usable = [(r.dt, r.mean_endpoint_error) for r in study.rows
              if r.n_paths > 0 and math.isfinite(r.mean_endpoint_error)
              and r.mean_endpoint_error > 0]
    if usable and not study.degenerate:
        dts, errors = zip(*usable)
        figure = outdir / "convergence.png"
        plots.save_convergence_figure(figure, dts, errors, study.slope,
                                      title=f"case {result.case} / {scheme.__name__}")
        report["figure"] = str(figure)
    _emit(args, "convergence.json", report)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itosym",
        description="Classify, verify and exactly integrate symmetric scalar "
                    "Ito SDEs with constant or power-law noise.")
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed for all randomness (default 0)")
    parser.add_argument("--out", default=None, help="output directory for "
                        "reports, CSV trajectories and figures")
    parser.add_argument("--deterministic", action="store_true",
                        help="omit timestamps so reports are byte-reproducible")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="detect the symmetric family")
    p.add_argument("config")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("symmetry", help="print the admitted symmetry")
    p.add_argument("config")
    p.add_argument("--p", default=None,
                   help="case-A arbitrary function P as an expression in u")
    p.add_argument("--w-r", type=float, default=None,
                   help="also build the strict proper W-symmetry with this r")
    p.add_argument("--w-gamma", type=float, default=0.0,
                   help="integration constant of the case-B W-symmetry")
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("verify", help="determining-equation residual summary")
    p.add_argument("config")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--phi", default=None,
                   help="explicit symmetry expression in x, t, w (otherwise "
                        "the classified symmetry is verified)")
    p.add_argument("--r", type=float, default=0.0,
                   help="W-coefficient of the explicit symmetry")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("integrate", help="exact and numerical paths to CSV")
    p.add_argument("config")
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--scheme", choices=("em", "milstein"), default="em")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("convergence", help="strong-convergence study")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--paths", type=int, default=100)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--n-base", type=int, default=16)
    p.add_argument("--scheme", choices=("em", "milstein"), default="em")
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EvalError, ExprError, transforms.TransformError,
            determining.DeterminingError, integrate.IntegrateError,
            classifier.ClassifierError, model.ModelError) as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
