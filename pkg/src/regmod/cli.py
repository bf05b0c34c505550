"""Command line interface.

regmod solve FILE [--backend native|asp] [--solver-path PATH]
                  [--max-states N] [--max-depth N] [--timeout SECONDS]
                  [--no-symmetry-breaking] [--emit-asp DIR] [--count-models]
                  [--json]
regmod gen member-rev K [-o FILE]

Exit codes: 0 satisfiable, 1 unsatisfiable, 2 unknown, 64 usage error,
65 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import asp, driver
from .benchmarks import GENERATORS
from .core import BudgetExceeded, validate
from .frontend import ParseError, parse_problem, print_problem

EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 64
EXIT_INPUT = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="regmod", description="Regular-model CHC satisfiability over ADTs")
    sub = p.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="decide satisfiability of an SMT-LIB file")
    solve.add_argument("file", help="problem file (SMT-LIB 2 subset)")
    solve.add_argument("--backend", choices=("native", "asp"), default="native")
    solve.add_argument("--solver-path", default="clingo", help="ASP solver binary")
    solve.add_argument("--max-states", type=int, default=8, metavar="N")
    solve.add_argument(
        "--max-depth",
        type=int,
        default=None,
        metavar="N",
        help="cap the counterexample depth (0 disables that phase)",
    )
    solve.add_argument("--timeout", type=float, default=None, metavar="SECONDS")
    solve.add_argument("--no-symmetry-breaking", action="store_true")
    solve.add_argument(
        "--emit-asp",
        metavar="DIR",
        default=None,
        help="write both ASP programs per bound and do not solve",
    )
    solve.add_argument(
        "--count-models",
        action="store_true",
        help="count answer sets at the --max-states bound, with and without "
        "symmetry breaking (asp backend)",
    )
    solve.add_argument("--json", action="store_true", dest="as_json")

    gen = sub.add_parser("gen", help="generate a benchmark problem")
    gen.add_argument("generator", choices=sorted(GENERATORS))
    gen.add_argument("k", type=int)
    gen.add_argument("-o", "--output", default=None, metavar="FILE")
    return p


def _load_problem(path: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise _InputError("cannot read %s: %s" % (path, e))
    try:
        problem = parse_problem(text)
    except ParseError as e:
        span = e.span
        where = "%s:%d:%d" % (path, span.line, span.column) if span else path
        raise _InputError("%s: %s" % (where, e.message))
    report = validate(problem)
    if not report.ok:
        raise _InputError(
            "%s: invalid problem:\n  %s" % (path, "\n  ".join(report.errors))
        )
    return problem


class _InputError(Exception):
    pass


def _emit_asp_programs(problem, args) -> int:
    out_dir = Path(args.emit_asp)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote: List[str] = []
    ce_capped = False
    for n in range(1, args.max_states + 1):
        prog = asp.emit_model_search(problem, n, not args.no_symmetry_breaking)
        path = out_dir / ("model_%02d.lp" % n)
        path.write_text(prog.text)
        wrote.append(str(path))
        depth = n if args.max_depth is None else min(n, args.max_depth)
        if depth == 0 or ce_capped:
            continue
        try:
            ce = asp.emit_counterexample_search(problem, depth)
        except BudgetExceeded:
            ce_capped = True
            continue
        path = out_dir / ("counterexample_%02d.lp" % depth)
        path.write_text(ce.text)
        if str(path) not in wrote:
            wrote.append(str(path))
    for w in wrote:
        print(w)
    return EXIT_SAT


def _count_models(problem, args) -> int:
    solver = asp.SolverConfig(
        args.solver_path, time_limit=args.timeout, extra_args=("0", "-q")
    )
    n = args.max_states
    with_sb = driver.count_models(problem, n, solver, True)
    without_sb = driver.count_models(problem, n, solver, False)
    if args.as_json:
        print(
            json.dumps(
                {
                    "bound": n,
                    "with_symmetry_breaking": with_sb[0],
                    "with_exact": with_sb[1],
                    "without_symmetry_breaking": without_sb[0],
                    "without_exact": without_sb[1],
                }
            )
        )
    else:
        print(
            "Model count at %d states with symmetry breaking: %d%s"
            % (n, with_sb[0], "" if with_sb[1] else "+")
        )
        print(
            "Model count at %d states without symmetry breaking: %d%s"
            % (n, without_sb[0], "" if without_sb[1] else "+")
        )
    return EXIT_SAT


def _run_solve(args) -> int:
    problem = _load_problem(args.file)
    if args.emit_asp and args.count_models:
        raise UsageError("--emit-asp and --count-models are mutually exclusive")
    if args.emit_asp:
        return _emit_asp_programs(problem, args)
    if args.count_models:
        if args.backend != "asp":
            raise UsageError("--count-models needs --backend asp")
        return _count_models(problem, args)

    solver = None
    if args.backend == "asp":
        solver = asp.SolverConfig(args.solver_path, time_limit=args.timeout)
    options = driver.SolveOptions(
        backend=args.backend,
        max_states=args.max_states,
        max_depth=args.max_depth,
        time_limit=args.timeout,
        symmetry_breaking=not args.no_symmetry_breaking,
        solver=solver,
    )
    outcome, log = driver.solve(problem, options)
    if args.as_json:
        print(json.dumps(driver.outcome_to_json(outcome, log), indent=2))
    else:
        print(driver.render_outcome(outcome, log))
    if isinstance(outcome, driver.Sat):
        return EXIT_SAT
    if isinstance(outcome, driver.Unsat):
        return EXIT_UNSAT
    return EXIT_UNKNOWN


def _run_gen(args) -> int:
    try:
        problem = GENERATORS[args.generator](args.k)
    except ValueError as e:
        raise UsageError(str(e))
    text = print_problem(problem)
    if args.output is None:
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
        print("wrote %s" % args.output)
    return EXIT_SAT


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _run_solve(args)
        return _run_gen(args)
    except UsageError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except _InputError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_INPUT
    except (asp.SolverNotFoundError, driver.DriverError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, asp.AspError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_UNKNOWN


if __name__ == "__main__":
    sys.exit(main())
