"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input error,
3 unsupported case or violated hypotheses, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corpus, problemfile
from .core import Grid, GridFunction, graded_grid
from .errors import (
    ConvergenceError,
    CorpusIntegrityError,
    DomainError,
    FracError,
    HypothesisError,
    ParseError,
    ProblemFileError,
    UnsupportedCaseError,
)
from .existence import certify
from .problem import ProblemSpec, check_hypotheses, classify, reformulate, residual
from .smoothness import DEFAULT_WINDOW, singular_exponent, cm_from_exponent, smoothness_report
from .solver import SolverConfig, solve_ivp

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3
EXIT_NONCONVERGENCE = 4

DEFAULT_N = 1024
DEFAULT_R = 2.0
VERIFY_TOL = 5e-3

log = logging.getLogger("fracivp")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, default=_jsonable) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _finite(x):
    # JSON has no inf/nan
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


# ----------------------------------------------------------------- settings

@dataclass
class Settings:
    spec: ProblemSpec
    name: str
    n: int
    r: float
    cfg: SolverConfig
    force: bool
    fractional_reconstruction: bool
    existence: dict = field(default_factory=dict)


def _settings(pf: problemfile.ProblemFile, args) -> Settings:
    s = pf.solver
    try:
        cfg = SolverConfig(
            tolerance=args.tol if args.tol is not None else s.get("tolerance", 1e-8),
            max_iterations=args.max_iter if args.max_iter is not None else s.get("max_iterations", 200),
            damping=s.get("damping", 0.5),
            mode=s.get("mode", "picard"),
        )
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc
    return Settings(
        spec=pf.spec,
        name=pf.name,
        n=args.grid_n if args.grid_n is not None else pf.grid.get("n", DEFAULT_N),
        r=args.grid_r if args.grid_r is not None else pf.grid.get("grading", DEFAULT_R),
        cfg=cfg,
        force=args.force or pf.flags.get("force", False),
        fractional_reconstruction=(args.fractional_reconstruction
                                   or pf.flags.get("fractional_reconstruction", False)),
        existence=pf.existence,
    )


def _load(args) -> Settings:
    return _settings(problemfile.load(args.file), args)


def _hypotheses_dict(report):
    if report is None:
        return None
    return {
        "satisfied": report.satisfied,
        "tolerance": report.tolerance,
        "items": [
            {"name": h.name, "satisfied": h.satisfied,
             "measured": _finite(h.measured), "note": h.note}
            for h in report.items
        ],
    }


def _volterra_dict(vp):
    return {
        "case": str(vp.case),
        "reconstruction_order": vp.reconstruction_order,
        "outer_order": vp.outer_order,
        "inner_orders": list(vp.inner_orders),
        "forcing_poly": list(vp.forcing_poly),
        "lower_initials": list(vp.lower_initials),
        "horizon": vp.horizon,
        "rhs": vp.rhs.source,
        "forced": vp.forced,
        "fractional": vp.fractional,
        "watermark": vp.watermark,
        "notes": list(vp.notes),
    }


def _log_dict(clog):
    return {
        "mode": clog.mode,
        "converged": clog.converged,
        "iterations": clog.iterations,
        "final_update": _finite(clog.updates[-1]) if clog.updates else None,
        "residual": _finite(clog.residual),
        "max_ball_radius": max(clog.ball_radii) if clog.ball_radii else None,
        "message": clog.message,
    }


def _smoothness_dict(rep):
    d = rep.as_dict()
    d["singular_exponent"] = _finite(d["singular_exponent"])
    return d


# ----------------------------------------------------------------- commands

def cmd_classify(args) -> int:
    st = _load(args)
    tag = classify(st.spec)
    out = {"case": tag.case.value, "reason": tag.reason, "supported": tag.supported}
    if tag.supported:
        out["hypotheses"] = _hypotheses_dict(check_hypotheses(st.spec, tag))
    _emit(out)
    return EXIT_OK if tag.supported else EXIT_UNSUPPORTED


def cmd_check(args) -> int:
    st = _load(args)
    tag = classify(st.spec)
    if not tag.supported:
        _emit({"case": tag.case.value, "reason": tag.reason, "hypotheses": None})
        return EXIT_UNSUPPORTED
    report = check_hypotheses(st.spec, tag)
    _emit({"case": tag.case.value, "hypotheses": _hypotheses_dict(report)})
    return EXIT_OK if report.satisfied else EXIT_UNSUPPORTED


def cmd_reformulate(args) -> int:
    st = _load(args)
    vp = reformulate(st.spec, classify(st.spec), force=st.force,
                     fractional_reconstruction=st.fractional_reconstruction)
    _emit(_volterra_dict(vp))
    return EXIT_OK


def cmd_existence(args) -> int:
    st = _load(args)
    ex = st.existence
    k = args.k if args.k is not None else ex.get("k", 1.0)
    if not k > 0:
        raise ProblemFileError(f"existence radius k must be positive, got {k}")
    cert = certify(
        st.spec, k, ex.get("samples", 101),
        bound=args.bound if args.bound is not None else ex.get("bound"),
        force=st.force, fractional_reconstruction=st.fractional_reconstruction,
        on_domain_error=ex.get("on_domain_error", "raise"),
    )
    _emit(cert.as_dict())
    return EXIT_OK


def write_csv(path_or_file, t, v, u, res, epsilon):
    """Columns ``t, v, u, residual``; the residual is blank below ``epsilon``."""
    own = not hasattr(path_or_file, "write")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v", "u", "residual"])
        lookup = {}
        if res is not None:
            start = t.size - res.values.size
            lookup = {start + i: x for i, x in enumerate(res.values)}
        for i in range(t.size):
            r = lookup.get(i)
            w.writerow([_fmt(t[i]), _fmt(v[i]), _fmt(u[i]), "" if r is None else _fmt(r)])
    finally:
        if own:
            fh.close()


def run_solve(st: Settings, out=None, report_path=None, epsilon=None, source="") -> tuple:
    """Solve one problem; returns ``(exit code, report dict)``."""
    grid = graded_grid(st.spec.horizon, st.n, st.r)
    report = {
        "input": {
            "file": source,
            "name": st.name,
            "orders": list(st.spec.orders),
            "initial_values": list(st.spec.initial_values),
            "horizon": st.spec.horizon,
            "rhs": st.spec.rhs.source,
            "grid": {"n": st.n, "grading": st.r},
            "solver": {"mode": st.cfg.mode, "tolerance": st.cfg.tolerance,
                       "max_iterations": st.cfg.max_iterations, "damping": st.cfg.damping},
            "flags": {"force": st.force,
                      "fractional_reconstruction": st.fractional_reconstruction},
        },
        "notes": [],
    }
    sol = solve_ivp(st.spec, grid, st.cfg, force=st.force,
                    fractional_reconstruction=st.fractional_reconstruction)
    report["case"] = str(sol.case)
    report["hypotheses"] = _hypotheses_dict(sol.hypotheses)
    report["reformulation"] = _volterra_dict(sol.problem)
    report["watermark"] = sol.problem.watermark
    report["convergence"] = _log_dict(sol.log)

    eps = float(grid.nodes[1]) if epsilon is None else float(epsilon)
    try:
        res = residual(sol.u, st.spec, eps)
        report["max_residual"] = float(np.max(np.abs(res.values))) if res.values.size else None
    except DomainError as exc:
        res = None
        report["max_residual"] = None
        report["notes"].append(f"residual not evaluated: {exc}")
    report["epsilon"] = eps

    try:
        report["smoothness"] = _smoothness_dict(smoothness_report(sol.u, st.spec))
    except (ValueError, DomainError) as exc:
        report["smoothness"] = None
        report["notes"].append(f"smoothness not evaluated: {exc}")

    ex = st.existence
    try:
        cert = certify(st.spec, ex.get("k", 1.0), ex.get("samples", 101), bound=ex.get("bound"),
                       force=st.force, fractional_reconstruction=st.fractional_reconstruction,
                       on_domain_error=ex.get("on_domain_error", "skip"))
        report["certificate"] = cert.as_dict()
    except DomainError as exc:
        report["certificate"] = None
        report["notes"].append(f"certificate not computed: {exc}")

    if out is not None:
        write_csv(out, grid.nodes, sol.v.values, sol.u.values, res, eps)
        report["outputs"] = {"csv": str(out) if isinstance(out, (str, Path)) else None}
    else:
        report["outputs"] = {"csv": None}
    if report_path is not None:
        report["outputs"]["report"] = str(report_path)

    code = EXIT_OK if sol.log.converged else EXIT_NONCONVERGENCE
    return code, report


def _solve_one(job):
    path, outdir, overrides = job
    args = argparse.Namespace(**overrides)
    stem = Path(path).stem
    csv_path = Path(outdir) / f"{stem}.csv"
    rep_path = Path(outdir) / f"{stem}.report.json"
    try:
        st = _settings(problemfile.load(path), args)
        code, report = run_solve(st, csv_path, rep_path, args.epsilon, str(path))
    except Exception as exc:        # mapped to an exit code per file
        code = exit_code_for(exc)
        report = {"input": {"file": str(path)}, "error": str(exc)}
    report["exit_code"] = code
    _emit(report, rep_path)
    return str(path), code


def cmd_solve(args) -> int:
    if args.batch:
        files = sorted(Path(args.batch).glob("*.json"))
        if not files:
            raise ProblemFileError(f"no *.json problem files in {args.batch}")
        outdir = Path(args.out or args.batch)
        outdir.mkdir(parents=True, exist_ok=True)
        overrides = {k: getattr(args, k) for k in
                     ("tol", "max_iter", "grid_n", "grid_r", "force",
                      "fractional_reconstruction", "epsilon")}
        jobs = [(str(f), str(outdir), overrides) for f in files]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_solve_one, jobs))
        else:
            results = [_solve_one(j) for j in jobs]
        summary = {"files": [{"file": f, "exit_code": c} for f, c in results]}
        _emit(summary)
        return max(c for _, c in results)

    if args.file is None:
        raise ProblemFileError("solve needs a problem file or --batch DIR")
    st = _load(args)
    out = args.out if args.out else sys.stdout
    code, report = run_solve(st, out, args.report, args.epsilon, args.file)
    if not args.out:
        report["outputs"]["csv"] = "<stdout>"
    report["exit_code"] = code
    text = json.dumps(report, indent=2, default=_jsonable) + "\n"
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return code


def _read_solution_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or "t" not in rows[0] or "u" not in rows[0]:
        raise ProblemFileError(f"{path}: header must contain columns t and u", 1, 1)
    it, iu = rows[0].index("t"), rows[0].index("u")
    try:
        t = np.array([float(r[it]) for r in rows[1:]])
        u = np.array([float(r[iu]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ProblemFileError(f"{path}: malformed row: {exc}") from exc
    try:
        return GridFunction(Grid(t), u)
    except ValueError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc


def cmd_smoothness(args) -> int:
    window = tuple(args.window) if args.window else DEFAULT_WINDOW
    if args.file.endswith(".csv"):
        u = _read_solution_csv(args.file)
        if args.problem:
            spec = problemfile.load(args.problem).spec
            rep = smoothness_report(u, spec, window, args.margin)
            _emit(_smoothness_dict(rep))
            return EXIT_OK
        if args.order is None:
            raise ProblemFileError("a solution CSV needs --problem FILE or --order M")
        rho, se = singular_exponent(u, args.order, window)
        _emit({"order": args.order, "singular_exponent": _finite(rho), "exponent_stderr": se,
               "cm_verdict": cm_from_exponent(rho, args.margin), "window": list(window),
               "margin": args.margin})
        return EXIT_OK
    st = _load(args)
    grid = graded_grid(st.spec.horizon, st.n, st.r)
    sol = solve_ivp(st.spec, grid, st.cfg, force=st.force,
                    fractional_reconstruction=st.fractional_reconstruction)
    if not sol.log.converged:
        raise ConvergenceError(sol.log.message)
    rep = smoothness_report(sol.u, st.spec, window, args.margin)
    _emit(_smoothness_dict(rep))
    return EXIT_OK


def verify_counterexample(problem, n: int, r: float, cfg: SolverConfig = SolverConfig()) -> dict:
    """Solve a reference problem and compare against its closed forms."""
    algebra = corpus.verify_algebra(problem)
    grid = graded_grid(problem.spec.horizon, n, r)
    sol = solve_ivp(problem.spec, grid, cfg, force=problem.forced,
                    fractional_reconstruction=problem.fractional_reconstruction)
    t = grid.nodes
    v_err = float(np.max(np.abs(sol.v.values - problem.v(t))))
    u_err = float(np.max(np.abs(sol.u.values - problem.u(t))))
    m, expected = problem.expected_smoothness
    try:
        rho, se = singular_exponent(sol.u, m, DEFAULT_WINDOW)
        verdict = cm_from_exponent(rho)
        smooth_ok = verdict == expected
    except ValueError as exc:
        rho, se, verdict, smooth_ok = None, None, None, False
        log.info("%s: smoothness not evaluated: %s", problem.name, exc)
    passed = sol.log.converged and v_err <= VERIFY_TOL and u_err <= VERIFY_TOL and smooth_ok
    return {
        "name": problem.name,
        "grid": {"n": n, "grading": r},
        "algebra_discrepancy": algebra,
        "converged": sol.log.converged,
        "v_error": v_err,
        "u_error": u_err,
        "tolerance": VERIFY_TOL,
        "order": m,
        "singular_exponent": _finite(rho),
        "exponent_stderr": se,
        "cm_verdict": verdict,
        "expected_cm_verdict": expected,
        "watermark": sol.problem.watermark,
        "passed": bool(passed),
    }


def cmd_verify_counterexamples(args) -> int:
    n = args.grid_n if args.grid_n is not None else 2048
    r = args.grid_r if args.grid_r is not None else DEFAULT_R
    cfg = SolverConfig(
        tolerance=args.tol if args.tol is not None else 1e-8,
        max_iterations=args.max_iter if args.max_iter is not None else 200,
    )
    results = []
    for name in corpus.BUILTIN_NAMES:
        try:
            results.append(verify_counterexample(corpus.builtin(name), n, r, cfg))
        except CorpusIntegrityError as exc:
            results.append({"name": name, "passed": False, "error": str(exc)})
    ok = all(x["passed"] for x in results)
    _emit({"passed": ok, "results": results})
    for x in results:
        status = "PASS" if x["passed"] else "FAIL"
        detail = x.get("error") or f"v err {x['v_error']:.3e}, u err {x['u_error']:.3e}"
        sys.stderr.write(f"{status} {x['name']}: {detail}\n")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_corpus(args) -> int:
    if args.action == "list":
        for name, p in corpus.catalogue().items():
            sys.stdout.write(f"{name}\t{p.description}\n")
        return EXIT_OK
    if args.name is None:
        raise ProblemFileError("corpus export needs a problem NAME")
    try:
        problem = corpus.get(args.name)
    except KeyError as exc:
        raise ProblemFileError(str(exc.args[0])) from exc
    text = problemfile.dumps(problemfile.from_reference(problem))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--grid-n", type=int, default=None, help="grid intervals N")
    p.add_argument("--grid-r", type=float, default=None, help="grading exponent r")
    p.add_argument("--tol", type=float, default=None, help="solver tolerance")
    p.add_argument("--max-iter", type=int, default=None, help="solver iteration cap")
    p.add_argument("--force", action="store_true",
                   help="run unsupported cases without an equivalence guarantee")
    p.add_argument("--fractional-reconstruction", action="store_true",
                   help="allow fractional-order reconstruction of u in forced runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracivp", description="Multi-term fractional IVPs via Volterra reformulation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("classify", cmd_classify, "case tag and hypothesis report"),
        ("check", cmd_check, "hypothesis check (exit 3 on violation)"),
        ("reformulate", cmd_reformulate, "show the Volterra reformulation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        _common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("existence", help="local existence certificate")
    p.add_argument("file")
    p.add_argument("--k", type=float, default=None, help="ball radius")
    p.add_argument("--bound", type=float, default=None, help="use this M instead of sampling")
    _common(p)
    p.set_defaults(func=cmd_existence)

    p = sub.add_parser("solve", help="solve and write t,v,u,residual CSV")
    p.add_argument("file", nargs="?")
    p.add_argument("--out", help="CSV path (output directory with --batch)")
    p.add_argument("--report", help="run report path (default: standard error)")
    p.add_argument("--batch", metavar="DIR", help="solve every *.json in DIR")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for --batch")
    p.add_argument("--epsilon", type=float, default=None,
                   help="residual cutoff (default: first positive node)")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("smoothness", help="regularity diagnostics near t = 0")
    p.add_argument("file", help="problem JSON or solution CSV")
    p.add_argument("--problem", help="problem file for a solution CSV")
    p.add_argument("--order", type=int, help="derivative order for a bare CSV")
    p.add_argument("--window", type=int, nargs=2, metavar=("FIRST", "LAST"))
    p.add_argument("--margin", type=float, default=0.1)
    _common(p)
    p.set_defaults(func=cmd_smoothness)

    p = sub.add_parser("verify-counterexamples", help="replicate the two reference counterexamples")
    _common(p)
    p.set_defaults(func=cmd_verify_counterexamples)

    p = sub.add_parser("corpus", help="list or export reference problems")
    p.add_argument("action", choices=["list", "export"])
    p.add_argument("name", nargs="?")
    p.add_argument("--out")
    p.set_defaults(func=cmd_corpus)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (UnsupportedCaseError, HypothesisError)):
        return EXIT_UNSUPPORTED
    if isinstance(exc, ConvergenceError):
        return EXIT_NONCONVERGENCE
    if isinstance(exc, CorpusIntegrityError):
        return EXIT_VERIFY
    if isinstance(exc, (ProblemFileError, ParseError, DomainError, ValueError, FracError)):
        return EXIT_INPUT
    raise exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        sys.stderr.write(f"fracivp: error: {exc}\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
