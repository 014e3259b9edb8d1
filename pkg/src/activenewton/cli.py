"""Command-line entry point: ``activenewton {solve,verify,rates}``.

Exit codes: 0 converged / all checks pass, 1 configuration or IO error,
2 iteration limit or identification stall, 3 transversality failure,
4 a verification property failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import problems, solver, verify
from .errors import ActiveNewtonError

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_TRANSVERSALITY, EXIT_VERIFY = 0, 1, 2, 3, 4

_STATUS_EXIT = {
    solver.Status.CONVERGED: EXIT_OK,
    solver.Status.MAX_ITER: EXIT_NOT_CONVERGED,
    solver.Status.IDENTIFICATION_STALL: EXIT_NOT_CONVERGED,
    solver.Status.DIVERGED: EXIT_NOT_CONVERGED,
    solver.Status.TRANSVERSALITY_FAIL: EXIT_TRANSVERSALITY,
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: problems.ProblemSpec
    opts: solver.NewtonOptions
    a: float = 1.0
    output_path: Optional[str] = None
    format: str = "csv"


def _num(x) -> str:
    return format(float(x), ".17g")


def _opt_float(x):
    return None if x is None else float(x)


def load_problem(ref: str, seed=None) -> problems.ProblemSpec:
    """Resolve ``--problem``: a built-in name or a path to a JSON spec."""
    if ref in problems.KINDS:
        spec = problems.builtin(ref)
    else:
        path = Path(ref)
        if not path.exists():
            raise ConfigError(f"no built-in problem or file named {ref!r}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed problem JSON: {exc}") from exc
        try:
            spec = problems.spec_from_dict(data)
        except ActiveNewtonError as exc:
            raise ConfigError(str(exc)) from exc
    if seed is not None:
        spec = problems.ProblemSpec(spec.kind, spec.params, spec.name, seed, spec.start)
    return spec


# ------------------------------------------------------------------ output


def trace_rows(report: solver.SolverReport, dim: int):
    header = ["k", "phase"] + [f"u_{i + 1}" for i in range(dim)] + [
        "lambda",
        "residual",
        "active_set",
        "dist_to_solution",
    ]
    rows = [header]
    for r in report.history:
        rows.append(
            [str(r.k), r.phase.value]
            + [_num(x) for x in r.u]
            + [
                ";".join(_num(x) for x in r.lambda_),
                _num(r.residual),
                ";".join(str(i) for i in sorted(r.active_set)),
                "" if r.dist_to_solution is None else _num(r.dist_to_solution),
            ]
        )
    return rows


def trace_csv(report, dim) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(trace_rows(report, dim))
    return buf.getvalue()


def summary(report: solver.SolverReport, name: str) -> dict:
    last = report.history[-1] if report.history else None
    return {
        "problem": name,
        "status": report.status.value,
        "iterations": report.iterations if report.history else 0,
        "switch_iteration": report.switch_iteration,
        "fitted_order": _opt_float(report.fitted_order),
        "final_u": [float(x) for x in last.u] if last else None,
        "final_residual": float(last.residual) if last else None,
        "final_dist_to_solution": _opt_float(last.dist_to_solution) if last else None,
        "message": report.message,
    }


def trace_records(report) -> list:
    return [
        {
            "k": r.k,
            "phase": r.phase.value,
            "u": [float(x) for x in r.u],
            "lambda": [float(x) for x in r.lambda_],
            "residual": float(r.residual),
            "active_set": sorted(int(i) for i in r.active_set),
            "dist_to_solution": _opt_float(r.dist_to_solution),
        }
        for r in report.history
    ]


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_outputs(report, config: RunConfig, dim: int):
    name = config.problem.name or config.problem.kind
    summ = summary(report, name)
    if config.output_path:
        path = Path(config.output_path)
        if config.format == "csv":
            path.write_text(trace_csv(report, dim))
            spath = path.with_suffix(".json") if path.suffix == ".csv" else Path(str(path) + ".json")
            spath.write_text(_dumps(summ))
        else:
            path.write_text(_dumps({"summary": summ, "trace": trace_records(report)}))
    return summ


# ------------------------------------------------------------------ commands


def cmd_solve(config: RunConfig) -> int:
    problem = problems.build(config.problem)
    u0 = problems.default_start(config.problem)
    report = solver.solve_two_phase(
        problem, u0, config.opts, solver.IdentifyOptions(a=config.a)
    )
    summ = write_outputs(report, config, problem.dim)
    sys.stdout.write(_dumps(summ))
    return _STATUS_EXIT[report.status]


def cmd_verify(suite="all", seed=7, fault=None) -> int:
    checks = verify.run(suite, seed, fault)
    width = max(len(c.name) for c in checks)
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.suite:<9} {c.name:<{width}}  {c.detail}")
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"{len(failed)} of {len(checks)} properties failed: " + ", ".join(c.name for c in failed))
        return EXIT_VERIFY
    print(f"all {len(checks)} properties passed")
    return EXIT_OK


def rate_table(spec: problems.ProblemSpec, distances, seed=0, opts=None):
    """Newton runs from perturbed starts on the solution's active manifold.

    Returns one dict per distance with the iteration count to reach an
    error of 1e-12, the fitted order and the largest ``e[k+1]/e[k]^2``.
    """
    problem = problems.build(spec)
    if problem.known_solution is None:
        raise ConfigError("rates need a problem with a known solution")
    M = solver.problem_manifold(problem)
    rng = np.random.default_rng(seed)
    rows = []
    for dist in distances:
        u, lam = solver.perturbed_start(problem, M, dist, rng)
        rep = solver.run_newton_phase(problem, M, u, lam, opts)
        errs = [r.dist_to_solution for r in rep.history]
        hit = next((k for k, e in enumerate(errs) if e <= 1e-12), None)
        run = solver.usable_errors(errs, upper=max(1e-2, 1.5 * errs[0]))
        order = solver.log_log_slope(run) if run else None
        ratios = [b / a**2 for a, b in zip(errs, errs[1:]) if a > 0 and b > 1e-14]
        rows.append(
            {
                "distance": float(dist),
                "start_error": float(errs[0]),
                "iterations_to_1e-12": hit,
                "fitted_order": order,
                "max_ratio": max(ratios) if ratios else None,
                "status": rep.status.value,
            }
        )
    return rows


def cmd_rates(config: RunConfig, distances, seed=0) -> int:
    rows = rate_table(config.problem, distances, seed, config.opts)
    cols = ["distance", "start_error", "iterations_to_1e-12", "fitted_order", "max_ratio", "status"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else (_num(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    text = buf.getvalue()
    if config.output_path:
        Path(config.output_path).write_text(text)
    sys.stdout.write(text)
    ok = all(r["iterations_to_1e-12"] is not None for r in rows)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


# ------------------------------------------------------------------ parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activenewton", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--problem", required=True, help="built-in name or path to a problem JSON file")
        sp.add_argument("--tol", type=float, default=1e-12, help="residual tolerance")
        sp.add_argument("--max-iter", type=int, default=50)
        sp.add_argument("--a", type=float, default=1.0, help="projection-phase parameter (step 1/a)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--output", default=None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    run_flags(sub.add_parser("solve", help="run the two-phase solver"))
    rates = sub.add_parser("rates", help="tabulate local convergence rates")
    run_flags(rates)
    rates.add_argument("--distances", type=float, nargs="+", default=[1e-1, 1e-2])

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suite", nargs="?", default="all", choices=verify.SUITES + ("all",))
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--inject-fault", choices=("coderivative",), default=None, help=argparse.SUPPRESS)
    return p


def _config(args) -> RunConfig:
    if not args.a > 0:
        raise ConfigError("--a must be positive")
    try:
        opts = solver.NewtonOptions(tol_residual=args.tol, max_iter=args.max_iter)
    except ActiveNewtonError as exc:
        raise ConfigError(str(exc)) from exc
    spec = load_problem(args.problem, args.seed)
    return RunConfig(spec, opts, args.a, args.output, args.format)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed, args.inject_fault)
        config = _config(args)
        if args.command == "solve":
            return cmd_solve(config)
        return cmd_rates(config, args.distances, args.seed or 0)
    except (ConfigError, ActiveNewtonError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
