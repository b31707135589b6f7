"""Command-line interface.

    divspec run <scenario-file> [--refinements N] [--strict-continuum]
                [--emit-csv PATH] [--emit-matrices DIR] [--slack REL]
    divspec oracle <interval|rectangle|disk> --count K [--length L] [--a A] [--b B]
    divspec check-expr <expr> --at x1=..,x2=..

Exit codes: 0 all checks passed; 1 at least one check failed;
2 solver or assembly failure; 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bounds, oracle
from . import expressions as ex
from .assembly import assemble
from .errors import (AssemblyError, ConfigError, DivspecError, EvalDomainError,
                     ExprSyntaxError, GeometryDegeneracyError,
                     HypothesisViolationError, InternalConsistencyError,
                     MassMatrixError, MeshTooCoarseError,
                     SolverConvergenceError, UnsupportedOperationError)
from .mesh import generate, refine
from .runner import build_geometry, render_csv, render_matrix, render_report, run
from .scenario import parse_scenario

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3

_CONFIG_ERRORS = (ConfigError, ExprSyntaxError, HypothesisViolationError,
                  UnsupportedOperationError)
_SOLVER_ERRORS = (AssemblyError, MassMatrixError, SolverConvergenceError,
                  GeometryDegeneracyError, MeshTooCoarseError, EvalDomainError,
                  InternalConsistencyError)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="divspec",
        description="Eigenvalues of weighted divergence-form operators and "
                    "universal inequality checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="path to the scenario document")
    p_run.add_argument("--refinements", type=int, default=None,
                       help="override the scenario's refinement count")
    p_run.add_argument("--strict-continuum", action="store_true",
                       help="require positive, settled margins over the last "
                            "three refinement levels")
    p_run.add_argument("--emit-csv", metavar="PATH", default=None)
    p_run.add_argument("--emit-matrices", metavar="DIR", default=None)
    p_run.add_argument("--slack", type=float, default=None, metavar="REL",
                       help="relative slack for the pass decision")

    p_or = sub.add_parser("oracle", help="closed-form reference spectra")
    p_or.add_argument("domain", choices=["interval", "rectangle", "disk"])
    p_or.add_argument("--count", type=int, required=True)
    p_or.add_argument("--length", type=float, default=1.0,
                      help="interval length")
    p_or.add_argument("--a", type=float, default=1.0, help="rectangle width")
    p_or.add_argument("--b", type=float, default=1.0, help="rectangle height")

    p_ce = sub.add_parser("check-expr", help="evaluate a scenario expression")
    p_ce.add_argument("expr")
    p_ce.add_argument("--at", required=True, metavar="x1=..,x2=..",
                      help="comma-separated variable assignments")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_check_expr(args)
    except _CONFIG_ERRORS as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except _SOLVER_ERRORS as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except DivspecError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


def _cmd_run(args):
    try:
        text = Path(args.scenario).read_text()
    except OSError as err:
        raise ConfigError("scenario", f"cannot read file: {err}")
    sc = parse_scenario(text)
    slack = bounds.SlackPolicy(rel=args.slack) if args.slack is not None \
        else bounds.DEFAULT_SLACK
    report = run(sc, refinements=args.refinements,
                 strict=args.strict_continuum, slack=slack)
    text_out = render_report(report)
    report_path = sc.output.get("report")
    if report_path:
        _write(report_path, text_out)
        print(f"report written to {report_path}")
        print(f"verdict = {report.verdict}")
    else:
        sys.stdout.write(text_out)
    csv_path = args.emit_csv or sc.output.get("csv")
    if csv_path:
        _write(csv_path, render_csv(report))
    matrices_dir = args.emit_matrices or sc.output.get("matrices")
    if matrices_dir:
        _emit_matrices(sc, args.refinements, matrices_dir)
    return EXIT_PASS if report.verdict == "pass" else EXIT_CHECK_FAILED


def _emit_matrices(sc, refinements, matrices_dir):
    chart, tensor, eta = build_geometry(sc)
    mesh = generate(sc.domain, sc.resolution)
    levels = refinements if refinements is not None else sc.refinements
    for _ in range(levels - 1):
        mesh = refine(mesh)
    problem = assemble(mesh, chart, tensor, eta)
    directory = Path(matrices_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "K.txt").write_text(render_matrix(problem.K))
    (directory / "M.txt").write_text(render_matrix(problem.M))


def _cmd_oracle(args):
    if args.count < 1:
        raise ConfigError("--count", "must be >= 1")
    if args.domain == "interval":
        ref = oracle.interval_spectrum(args.length, args.count)
    elif args.domain == "rectangle":
        ref = oracle.rectangle_spectrum(args.a, args.b, args.count)
    else:
        ref = oracle.disk_spectrum(args.count)
    for v in ref.values:
        print(f"{v:.17g}")
    return EXIT_PASS


def _cmd_check_expr(args):
    tree = ex.parse(args.expr)
    env = {}
    for item in args.at.split(","):
        if "=" not in item:
            raise ConfigError("--at", f"expected var=value, got {item!r}")
        name, value = item.split("=", 1)
        name = name.strip()
        if name not in ex.VARIABLES:
            raise ConfigError("--at", f"unknown variable {name!r}")
        try:
            env[name] = float(value)
        except ValueError:
            raise ConfigError("--at", f"bad number {value!r}")
    missing = ex.free_variables(tree) - set(env)
    if missing:
        raise ConfigError("--at", f"no value for {sorted(missing)[0]}")
    print(f"{ex.evaluate(tree, env):.17g}")
    return EXIT_PASS


def _write(path, text):
    p = Path(path)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        fh.write(text)


if __name__ == "__main__":
    sys.exit(main())
