"""Iterative-deepening satisfiability procedure.

Per bound n the driver first looks for a ground counterexample within term
depth n, then for a model over n states per sort, and stops at the first
answer.  Both phases exist for the native backend and for an external ASP
solver; verdict parity between them is part of the test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from . import asp
from .automaton import PredicateTables, TreeAutomaton
from .core import (
    DEFAULT_ATOM_CAP,
    BudgetExceeded,
    Derivation,
    Problem,
    format_atom,
    format_term,
    goal_violated,
    ground_least_model,
    validate,
)
from .interpretation import ClausePlans
from .native import (
    SearchBudgetExceeded,
    SearchConfig,
    SearchTimeout,
    find_counterexample,
    search_model,
)


@dataclass(frozen=True)
class Sat:
    automaton: TreeAutomaton
    tables: PredicateTables
    states_used: int  # per sort


@dataclass(frozen=True)
class Unsat:
    derivation: Derivation


@dataclass(frozen=True)
class Unknown:
    reason: str  # "timeout" or "budget"
    detail: str = ""


SolveOutcome = Union[Sat, Unsat, Unknown]


@dataclass(frozen=True)
class PhaseEvent:
    phase: str  # "counterexample" or "model"
    bound: int
    seconds: float
    verdict: str  # "found", "none", "budget", "timeout" or "skipped"


RunLog = Tuple[PhaseEvent, ...]


@dataclass
class SolveOptions:
    backend: str = "native"
    max_states: int = 8
    # None ties the counterexample depth to the state bound; a number caps
    # it, 0 disables the counterexample phases entirely.
    max_depth: Optional[int] = None
    time_limit: Optional[float] = None
    symmetry_breaking: bool = True
    atom_cap: int = DEFAULT_ATOM_CAP
    node_budget: int = 0
    solver: Optional[asp.SolverConfig] = None


class DriverError(Exception):
    pass


def solve(problem: Problem, options: Optional[SolveOptions] = None) -> Tuple[SolveOutcome, RunLog]:
    opts = options or SolveOptions()
    report = validate(problem)
    if not report.ok:
        raise DriverError("invalid problem: " + "; ".join(report.errors))
    if opts.backend not in ("native", "asp"):
        raise DriverError("unknown backend %r" % opts.backend)
    if opts.backend == "asp" and opts.solver is None:
        raise DriverError("the asp backend needs a solver configuration")
    if opts.max_states < 1:
        raise DriverError("max_states must be at least 1")

    deadline = None
    if opts.time_limit is not None:
        deadline = time.monotonic() + opts.time_limit
    events: List[PhaseEvent] = []
    plans = ClausePlans(problem)
    ce_capped = False  # the ground universe hit the atom cap; deeper ones will too

    def out_of_time() -> bool:
        return deadline is not None and time.monotonic() >= deadline

    def left() -> Optional[float]:
        if deadline is None:
            return None
        return max(deadline - time.monotonic(), 0.01)

    for n in range(1, opts.max_states + 1):
        depth = n if opts.max_depth is None else min(n, opts.max_depth)
        # counterexample phase
        if depth == 0 or ce_capped:
            events.append(PhaseEvent("counterexample", depth, 0.0, "skipped"))
        else:
            if out_of_time():
                return Unknown("timeout", _limit_text(opts)), tuple(events)
            t0 = time.monotonic()
            try:
                derivation = _counterexample(problem, depth, opts)
            except BudgetExceeded:
                ce_capped = True
                events.append(
                    PhaseEvent("counterexample", depth, time.monotonic() - t0, "budget")
                )
            except _PhaseTimeout:
                events.append(
                    PhaseEvent("counterexample", depth, time.monotonic() - t0, "timeout")
                )
                return Unknown("timeout", _limit_text(opts)), tuple(events)
            else:
                dt = time.monotonic() - t0
                if derivation is not None:
                    events.append(PhaseEvent("counterexample", depth, dt, "found"))
                    return Unsat(derivation), tuple(events)
                events.append(PhaseEvent("counterexample", depth, dt, "none"))

        # model phase
        if out_of_time():
            return Unknown("timeout", _limit_text(opts)), tuple(events)
        t0 = time.monotonic()
        try:
            found = _model(problem, n, opts, plans, deadline)
        except SearchTimeout:
            events.append(PhaseEvent("model", n, time.monotonic() - t0, "timeout"))
            return Unknown("timeout", _limit_text(opts)), tuple(events)
        except _PhaseTimeout:
            events.append(PhaseEvent("model", n, time.monotonic() - t0, "timeout"))
            return Unknown("timeout", _limit_text(opts)), tuple(events)
        except SearchBudgetExceeded as e:
            events.append(PhaseEvent("model", n, time.monotonic() - t0, "budget"))
            return Unknown("budget", "node budget of %d exhausted" % opts.node_budget), tuple(events)
        dt = time.monotonic() - t0
        if found is not None:
            a, tables = found
            events.append(PhaseEvent("model", n, dt, "found"))
            return Sat(a, tables, n), tuple(events)
        events.append(PhaseEvent("model", n, dt, "none"))

    return Unknown("budget", "state bound %d exhausted" % opts.max_states), tuple(events)


class _PhaseTimeout(Exception):
    pass


def _limit_text(opts: SolveOptions) -> str:
    if opts.time_limit is not None:
        return "time limit of %g seconds reached" % opts.time_limit
    return "time limit reached"


def _counterexample(problem: Problem, depth: int, opts: SolveOptions) -> Optional[Derivation]:
    if opts.backend == "native":
        return find_counterexample(problem, depth, opts.atom_cap)
    prog = asp.emit_counterexample_search(problem, depth, opts.atom_cap)
    run = asp.run_external(prog.text, opts.solver)
    if run.outcome == "timeout":
        raise _PhaseTimeout()
    if run.outcome == "unsat":
        return None
    if run.outcome != "sat":
        raise DriverError(
            "solver failed on the counterexample program (exit %s): %s"
            % (run.exit_status, (run.errors or run.output).strip()[:500])
        )
    # The witness itself is decoded only as a cross-check; the replayable
    # derivation is rebuilt natively so Unsat always carries a proof.
    answers = asp.parse_answer_set(run.output)
    asp.decode_witnesses(answers, problem, prog.meta)
    atoms, provenance = ground_least_model(problem, depth, opts.atom_cap)
    derivation = goal_violated(problem, atoms, provenance)
    if derivation is None:
        raise DriverError("solver reported a counterexample that does not replay")
    return derivation


def _model(
    problem: Problem,
    n: int,
    opts: SolveOptions,
    plans: ClausePlans,
    deadline: Optional[float],
) -> Optional[Tuple[TreeAutomaton, PredicateTables]]:
    if opts.backend == "native":
        config = SearchConfig(
            symmetry_breaking=opts.symmetry_breaking,
            node_budget=opts.node_budget,
            deadline=deadline,
            atom_cap=opts.atom_cap,
        )
        return search_model(problem, n, config, plans)
    prog = asp.emit_model_search(problem, n, opts.symmetry_breaking)
    solver = opts.solver
    if deadline is not None:
        remaining = max(deadline - time.monotonic(), 0.01)
        if solver.time_limit is None or solver.time_limit > remaining:
            solver = asp.SolverConfig(
                solver.path, remaining, solver.extra_args, solver.sat_codes, solver.unsat_codes
            )
    run = asp.run_external(prog.text, solver)
    if run.outcome == "timeout":
        raise _PhaseTimeout()
    if run.outcome == "unsat":
        return None
    if run.outcome != "sat":
        raise DriverError(
            "solver failed on the model program (exit %s): %s"
            % (run.exit_status, (run.errors or run.output).strip()[:500])
        )
    answers = asp.parse_answer_set(run.output)
    return asp.decode_model(answers, problem, n)


def count_models(
    problem: Problem, n: int, solver: asp.SolverConfig, symmetry_breaking: bool
) -> Tuple[int, bool]:
    """Answer-set count for the model program at bound n, as (count, exact).
    The solver must be asked to enumerate; pass its enumerate-all flag in
    extra_args (clingo: "0", ideally with "-q")."""
    prog = asp.emit_model_search(problem, n, symmetry_breaking)
    run = asp.run_external(prog.text, solver)
    if run.outcome == "timeout":
        raise _PhaseTimeout()
    counted = asp.parse_model_count(run.output)
    if counted is None:
        raise DriverError(
            "no model count in solver output (exit %s)" % run.exit_status
        )
    return counted


def trace_lines(log: RunLog) -> List[str]:
    """The console trace, one line per executed phase."""
    lines = []
    for e in log:
        if e.verdict == "skipped":
            continue
        noun = "counterexample" if e.phase == "counterexample" else "model"
        plural = "state" if e.bound == 1 else "states"
        lines.append("Searching for a %s with %d %s" % (noun, e.bound, plural))
    return lines


def _two_column_model(a: TreeAutomaton, tables: PredicateTables) -> List[str]:
    """Transitions on the left, predicate rows flowed into columns on the
    right, mirroring the solver console layout."""
    trans = []
    for (ctor, args), target in a.delta.items():
        name = ctor[0].upper() + ctor[1:] if ctor else ctor
        if args:
            trans.append("%s(%s) -> %d" % (name, ",".join(map(str, args)), target))
        else:
            trans.append("%s -> %d" % (name, target))
    rows = []
    for pred in tables:
        for row in sorted(tables[pred]):
            rows.append("%s(%s)" % (pred, ",".join(map(str, row))))
    height = max(len(trans), 1)
    columns = [rows[i : i + height] for i in range(0, len(rows), height)]
    head_left = "ADT Transitions:"
    widths = [max(len(head_left), max((len(t) for t in trans), default=0))]
    for col in columns:
        widths.append(max(len(c) for c in col))
    lines = []
    header = [head_left] + (["Predicates:"] if rows else [])
    out_rows = max(height, len(trans))
    for i in range(-1, out_rows):
        if i < 0:
            cells = header
        else:
            cells = [trans[i] if i < len(trans) else ""]
            for col in columns:
                cells.append(col[i] if i < len(col) else "")
        line = ""
        for j, cell in enumerate(cells):
            pad = widths[j] if j < len(widths) else len(cell)
            line += cell.ljust(pad + 8)
        lines.append(line.rstrip())
    return lines


def _render_proof(tree, depth: int, lines: List[str]) -> None:
    lines.append(
        "%s%s   [clause %d]" % ("  " * depth, format_atom(tree.atom), tree.clause_index)
    )
    for child in tree.children:
        _render_proof(child, depth + 1, lines)


def render_outcome(outcome: SolveOutcome, log: RunLog = ()) -> str:
    lines = trace_lines(log)
    if isinstance(outcome, Sat):
        lines.extend(_two_column_model(outcome.automaton, outcome.tables))
        lines.append("")
        lines.append(
            "Success! Clauses are satisfiable by a Herbrand model recognized "
            "by a tree automaton with %d state%s"
            % (outcome.states_used, "" if outcome.states_used == 1 else "s")
        )
    elif isinstance(outcome, Unsat):
        d = outcome.derivation
        subst = ", ".join("%s = %s" % (v, format_term(t)) for v, t in d.substitution)
        lines.append("")
        lines.append(
            "Counterexample! Goal clause %d is violated%s"
            % (d.goal_index, " with " + subst if subst else "")
        )
        for tree in d.proofs:
            _render_proof(tree, 1, lines)
        lines.append("Clauses are unsatisfiable.")
    else:
        lines.append("")
        lines.append("Gave up: %s" % (outcome.detail or outcome.reason))
    return "\n".join(lines)


def _term_json(t) -> str:
    return format_term(t)


def _proof_json(tree) -> Dict[str, object]:
    return {
        "atom": format_atom(tree.atom),
        "clause": tree.clause_index,
        "substitution": {v: _term_json(t) for v, t in tree.substitution},
        "children": [_proof_json(c) for c in tree.children],
    }


def outcome_to_json(outcome: SolveOutcome, log: RunLog = ()) -> Dict[str, object]:
    doc: Dict[str, object] = {
        "log": [
            {"phase": e.phase, "bound": e.bound, "seconds": round(e.seconds, 6), "verdict": e.verdict}
            for e in log
        ]
    }
    if isinstance(outcome, Sat):
        a = outcome.automaton
        doc["verdict"] = "sat"
        doc["states_used"] = outcome.states_used
        doc["state_ranges"] = [
            {"sort": s, "lo": lo, "hi": hi} for s, lo, hi in a.state_ranges
        ]
        doc["transitions"] = [
            {"ctor": ctor, "args": list(args), "target": q}
            for (ctor, args), q in a.delta.items()
        ]
        doc["tables"] = {
            pred: sorted(list(row) for row in rows)
            for pred, rows in outcome.tables.items()
        }
    elif isinstance(outcome, Unsat):
        d = outcome.derivation
        doc["verdict"] = "unsat"
        doc["goal_clause"] = d.goal_index
        doc["substitution"] = {v: _term_json(t) for v, t in d.substitution}
        doc["proofs"] = [_proof_json(t) for t in d.proofs]
    else:
        doc["verdict"] = "unknown"
        doc["reason"] = outcome.reason
        doc["detail"] = outcome.detail
    return doc
