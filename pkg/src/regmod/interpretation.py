"""Interpreting clauses over a tree automaton.

A clause is flattened into constraints over state variables: predicate
literals become table lookups, each constructor occurrence becomes one
transition constraint, equations merge state variables (sound because the
automaton is deterministic), and disequations become diff_approx checks.
Variables that end up in the head only are generators: they range over all
states of their sort, which is how universally quantified head variables
are interpreted.

The least predicate tables are the fixpoint of the flattened definite
clauses; a model check replays every clause against given tables and
reports the first failure under a fixed clause and assignment order.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from .automaton import (
    PredicateTables,
    TreeAutomaton,
    diff_approx,
    inhabitation,
    run_term,
)
from .core import App, Atom, Clause, Diseq, Eq, Problem, Term, Var

PredLit = Tuple[str, Tuple[int, ...]]
TransCon = Tuple[str, Tuple[int, ...], int]


@dataclass(frozen=True)
class FlatClause:
    """Clause over state variables 0..n_vars-1.  head is None for goals;
    generators list the variables constrained by nothing but their sort."""

    head: Optional[PredLit]
    pred_literals: Tuple[PredLit, ...]
    transitions: Tuple[TransCon, ...]
    diseqs: Tuple[Tuple[int, int], ...]
    generators: Tuple[int, ...]
    var_sorts: Tuple[str, ...]

    @property
    def n_vars(self) -> int:
        return len(self.var_sorts)


def flatten(problem: Problem, clause: Clause) -> FlatClause:
    """Deterministic flattening: state variables are allocated scanning the
    body left to right and then the head, arguments before the surrounding
    constructor, named variables shared, constructor occurrences fresh.
    Equations merge variables; the result is renumbered compactly."""
    var_of: Dict[str, int] = {}
    sorts: List[str] = []
    transitions: List[TransCon] = []

    def alloc(sort: str) -> int:
        sorts.append(sort)
        return len(sorts) - 1

    def walk(t: Term) -> int:
        if isinstance(t, Var):
            if t.name not in var_of:
                var_of[t.name] = alloc(t.sort)
            return var_of[t.name]
        args = tuple(walk(a) for a in t.args)
        sv = alloc(problem.constructor(t.ctor)[1])
        transitions.append((t.ctor, args, sv))
        return sv

    pred_literals: List[PredLit] = []
    eqs: List[Tuple[int, int]] = []
    diseqs: List[Tuple[int, int]] = []
    for lit in clause.body:
        if isinstance(lit, Atom):
            pred_literals.append((lit.pred, tuple(walk(a) for a in lit.args)))
        elif isinstance(lit, Eq):
            eqs.append((walk(lit.lhs), walk(lit.rhs)))
        else:
            diseqs.append((walk(lit.lhs), walk(lit.rhs)))
    head: Optional[PredLit] = None
    if clause.head is not None:
        head = (clause.head.pred, tuple(walk(a) for a in clause.head.args))

    # Union-find with the smallest member as representative, so merging is
    # deterministic.
    parent = list(range(len(sorts)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in eqs:
        ra, rb = find(a), find(b)
        if ra != rb:
            lo, hi = min(ra, rb), max(ra, rb)
            parent[hi] = lo

    # Renumber representatives in first-occurrence order over the clause
    # structure, so equal clauses flatten identically.
    compact: Dict[int, int] = {}
    new_sorts: List[str] = []

    def renum(sv: int) -> int:
        rep = find(sv)
        if rep not in compact:
            compact[rep] = len(new_sorts)
            new_sorts.append(sorts[rep])
        return compact[rep]

    new_preds = tuple((p, tuple(renum(v) for v in vs)) for p, vs in pred_literals)
    seen_trans: Set[TransCon] = set()
    new_trans: List[TransCon] = []
    for ctor, args, res in transitions:
        t = (ctor, tuple(renum(v) for v in args), renum(res))
        if t not in seen_trans:
            seen_trans.add(t)
            new_trans.append(t)
    new_head = None
    if head is not None:
        new_head = (head[0], tuple(renum(v) for v in head[1]))
    new_diseqs = tuple((renum(a), renum(b)) for a, b in diseqs)
    for sv in range(len(sorts)):
        renum(sv)  # reach variables mentioned only in equations

    constrained: Set[int] = set()
    for _, vs in new_preds:
        constrained.update(vs)
    for _, args, res in new_trans:
        constrained.update(args)
        constrained.add(res)
    generators = tuple(
        sv for sv in range(len(new_sorts)) if sv not in constrained
    )
    return FlatClause(
        head=new_head,
        pred_literals=new_preds,
        transitions=tuple(new_trans),
        diseqs=new_diseqs,
        generators=generators,
        var_sorts=tuple(new_sorts),
    )


# ---------------------------------------------------------------------------
# Satisfying assignments of a flat clause body

Step = Tuple  # ("pred", i) | ("fwd", i) | ("enum", i) | ("diseq", i) | ("gen", sv)


def _plan(flat: FlatClause) -> List[Step]:
    """Constraint order: joins and propagations before blind enumeration.
    Deterministic, derived from the clause alone."""
    steps: List[Step] = []
    assigned: Set[int] = set()
    preds = list(range(len(flat.pred_literals)))
    trans = list(range(len(flat.transitions)))
    diseqs = list(range(len(flat.diseqs)))

    def absorb() -> None:
        changed = True
        while changed:
            changed = False
            for ti in list(trans):
                ctor, args, res = flat.transitions[ti]
                if all(v in assigned for v in args):
                    steps.append(("fwd", ti))
                    trans.remove(ti)
                    assigned.add(res)
                    changed = True
            for di in list(diseqs):
                a, b = flat.diseqs[di]
                if a in assigned and b in assigned:
                    steps.append(("diseq", di))
                    diseqs.remove(di)
                    changed = True

    absorb()
    while preds or trans:
        if preds:
            pi = preds.pop(0)
            steps.append(("pred", pi))
            assigned.update(flat.pred_literals[pi][1])
        else:
            ti = trans.pop(0)
            ctor, args, res = flat.transitions[ti]
            steps.append(("enum", ti))
            assigned.update(args)
            assigned.add(res)
        absorb()
    for sv in flat.generators:
        if sv not in assigned:
            steps.append(("gen", sv))
            assigned.add(sv)
    absorb()
    return steps


class ClausePlans:
    """Flattened clauses with their execution plans, compiled once per
    problem and reused across automata."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self.definite: List[Tuple[int, FlatClause, List[Step]]] = []
        self.goals: List[Tuple[int, FlatClause, List[Step]]] = []
        for i, clause in enumerate(problem.clauses):
            flat = flatten(problem, clause)
            entry = (i, flat, _plan(flat))
            if clause.is_goal:
                self.goals.append(entry)
            else:
                self.definite.append(entry)


def _solutions(
    flat: FlatClause,
    steps: Sequence[Step],
    a: TreeAutomaton,
    tables: PredicateTables,
    inh: Dict[int, int],
    delta_by_ctor_res: Optional[Dict[Tuple[str, int], List[Tuple[Tuple[int, ...], int]]]] = None,
) -> Iterator[List[int]]:
    """All assignments satisfying the body constraints, in a fixed order.
    Yields one mutable assignment list; callers must copy to keep it."""
    sigma: List[int] = [0] * flat.n_vars

    def run(i: int) -> Iterator[List[int]]:
        if i == len(steps):
            yield sigma
            return
        kind, arg = steps[i]
        if kind == "pred":
            pred, vs = flat.pred_literals[arg]
            for row in sorted(tables.get(pred, ())):
                ok = True
                undo: List[int] = []
                for v, q in zip(vs, row):
                    if v in bound:
                        if sigma[v] != q:
                            ok = False
                            break
                    else:
                        bound.add(v)
                        undo.append(v)
                        sigma[v] = q
                if ok:
                    yield from run(i + 1)
                for v in undo:
                    bound.discard(v)
        elif kind == "fwd":
            ctor, args, res = flat.transitions[arg]
            key = (ctor, tuple(sigma[v] for v in args))
            target = a.delta.get(key)
            if target is None:
                return
            if res in bound:
                if sigma[res] == target:
                    yield from run(i + 1)
                return
            bound.add(res)
            sigma[res] = target
            yield from run(i + 1)
            bound.discard(res)
        elif kind == "enum":
            ctor, args, res = flat.transitions[arg]
            for key, target in sorted(a.delta.items()):
                if key[0] != ctor:
                    continue
                ok = True
                undo: List[int] = []
                for v, q in zip(args, key[1]):
                    if v in bound:
                        if sigma[v] != q:
                            ok = False
                            break
                    else:
                        bound.add(v)
                        undo.append(v)
                        sigma[v] = q
                if ok:
                    if res in bound:
                        if sigma[res] == target:
                            yield from run(i + 1)
                    else:
                        bound.add(res)
                        sigma[res] = target
                        yield from run(i + 1)
                        bound.discard(res)
                for v in undo:
                    bound.discard(v)
        elif kind == "diseq":
            va, vb = flat.diseqs[arg]
            if diff_approx(a, sigma[va], sigma[vb], inh):
                yield from run(i + 1)
        else:  # gen
            sv = arg
            bound.add(sv)
            for q in a.states_of(flat.var_sorts[sv]):
                sigma[sv] = q
                yield from run(i + 1)
            bound.discard(sv)

    bound: Set[int] = set()
    yield from run(0)


def least_tables(
    a: TreeAutomaton,
    problem: Problem,
    plans: Optional[ClausePlans] = None,
    seed: Optional[PredicateTables] = None,
) -> PredicateTables:
    """Least fixpoint of the flattened definite clauses over the automaton.
    Monotone in the transition map: adding transitions can only grow the
    tables, which is what makes partial-automaton pruning sound.  A seed
    known to be below the fixpoint (a parent automaton's tables, say) just
    skips early rounds."""
    if plans is None:
        plans = ClausePlans(problem)
    tables: PredicateTables = {p.name: set() for p in problem.predicates}
    if seed:
        for pred, rows in seed.items():
            tables[pred] |= rows
    inh = inhabitation(a)
    changed = True
    while changed:
        changed = False
        for _, flat, steps in plans.definite:
            assert flat.head is not None
            pred, vs = flat.head
            rows = tables[pred]
            for sigma in _solutions(flat, steps, a, tables, inh):
                row = tuple(sigma[v] for v in vs)
                if row not in rows:
                    rows.add(row)
                    changed = True
    return tables


@dataclass(frozen=True)
class ModelViolation:
    """kind "closure": a definite clause body fires but its head tuple is
    missing.  kind "goal": a goal body is satisfiable.  assignment is the
    state of every flat variable of that clause."""

    clause_index: int
    kind: str
    assignment: Tuple[int, ...]


def check_model(
    a: TreeAutomaton,
    tables: PredicateTables,
    problem: Problem,
    plans: Optional[ClausePlans] = None,
) -> Optional[ModelViolation]:
    """First violation in clause order, assignments in plan order, or None
    when the tables are a model of every clause."""
    if plans is None:
        plans = ClausePlans(problem)
    inh = inhabitation(a)
    entries = sorted(plans.definite + plans.goals, key=lambda e: e[0])
    for idx, flat, steps in entries:
        if flat.head is None:
            for sigma in _solutions(flat, steps, a, tables, inh):
                return ModelViolation(idx, "goal", tuple(sigma))
        else:
            pred, vs = flat.head
            rows = tables.get(pred, set())
            for sigma in _solutions(flat, steps, a, tables, inh):
                if tuple(sigma[v] for v in vs) not in rows:
                    return ModelViolation(idx, "closure", tuple(sigma))
    return None


def violated_goal(
    a: TreeAutomaton,
    tables: PredicateTables,
    plans: ClausePlans,
    inh: Optional[Dict[int, int]] = None,
) -> Optional[Tuple[int, Tuple[int, ...]]]:
    """First goal whose body is satisfiable over the tables, or None.  The
    tables need not be a fixpoint: goals are monotone in the tables, so a
    hit on any under-approximation already refutes every extension."""
    if inh is None:
        inh = inhabitation(a)
    for idx, flat, steps in plans.goals:
        for sigma in _solutions(flat, steps, a, tables, inh):
            return idx, tuple(sigma)
    return None


def interpret_atom(
    a: TreeAutomaton, tables: PredicateTables, atom: Atom
) -> bool:
    """Truth of a ground atom: run every argument to its state and look the
    tuple up."""
    row = tuple(run_term(a, t) for t in atom.args)
    return row in tables.get(atom.pred, set())
