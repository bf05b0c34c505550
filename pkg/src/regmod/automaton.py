"""Complete deterministic bottom-up tree automata over the problem signature.

States are numbered globally from 1 with one contiguous range per sort, in
sort declaration order.  The transition map is keyed by constructor name and
argument-state tuple; completeness and determinism together mean the map has
exactly one entry per key, so a predicate interpretation is just a set of
state tuples per predicate (PredicateTables).
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union

from .core import App, Problem, Term, Var, term_depth

Transition = Tuple[str, Tuple[int, ...]]
PredicateTables = Dict[str, Set[Tuple[int, ...]]]

# Inhabitation classes: how many ground terms reach a state.
EMPTY, ONE, MANY = 0, 1, 2


@dataclass
class TreeAutomaton:
    """state_ranges lists (sort, lo, hi) with lo..hi inclusive; delta maps
    each (constructor, argument states) pair to the resulting state.  The
    insertion order of delta is the fixed grid order used everywhere:
    constructors in declaration order, argument tuples lexicographic."""

    state_ranges: Tuple[Tuple[str, int, int], ...]
    delta: Dict[Transition, int]
    _sort_of: Dict[int, str] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._sort_of = {}
        for sort, lo, hi in self.state_ranges:
            for q in range(lo, hi + 1):
                self._sort_of[q] = sort

    def states_of(self, sort: str) -> range:
        for s, lo, hi in self.state_ranges:
            if s == sort:
                return range(lo, hi + 1)
        raise KeyError(sort)

    def sort_of_state(self, q: int) -> str:
        return self._sort_of[q]

    @property
    def total_states(self) -> int:
        return max((hi for _, _, hi in self.state_ranges), default=0)

    def all_states(self) -> range:
        return range(1, self.total_states + 1)

    def states_summary(self) -> str:
        return ", ".join(
            "%s: %d" % (sort, hi - lo + 1) for sort, lo, hi in self.state_ranges
        )


def state_ranges_for(
    problem: Problem, n_states: Union[int, Dict[str, int]]
) -> Tuple[Tuple[str, int, int], ...]:
    """Contiguous 1-based ranges in sort declaration order; n_states is a
    per-sort count, either uniform or keyed by sort name."""
    ranges: List[Tuple[str, int, int]] = []
    lo = 1
    for s in problem.sorts:
        n = n_states if isinstance(n_states, int) else n_states[s.name]
        if n < 1:
            raise ValueError("sort %s needs at least one state" % s.name)
        ranges.append((s.name, lo, lo + n - 1))
        lo += n
    return tuple(ranges)


def transition_grid(
    problem: Problem, ranges: Tuple[Tuple[str, int, int], ...]
) -> List[Transition]:
    """The fixed slot order: constructors in declaration order, argument
    tuples lexicographic over the argument sorts' ranges."""
    by_sort = {sort: range(lo, hi + 1) for sort, lo, hi in ranges}
    grid: List[Transition] = []
    for s in problem.sorts:
        for c in s.constructors:
            pools = [by_sort[a] for a in c.arg_sorts]
            if not pools:
                grid.append((c.name, ()))
                continue
            for args in itertools.product(*pools):
                grid.append((c.name, args))
    return grid


def run_term(a: TreeAutomaton, t: Term) -> int:
    """State reached on a ground term."""
    if isinstance(t, Var):
        raise ValueError("cannot run the automaton on the variable %s" % t.name)
    key = (t.ctor, tuple(run_term(a, arg) for arg in t.args))
    if key not in a.delta:
        raise ValueError("no transition for %s(%s)" % (key[0], key[1]))
    return a.delta[key]


def check_automaton(a: TreeAutomaton, problem: Problem) -> List[str]:
    """Completeness, determinism and range discipline against the problem
    signature; empty list means well-formed."""
    errors: List[str] = []
    if {s for s, _, _ in a.state_ranges} != {s.name for s in problem.sorts}:
        errors.append("state ranges do not cover exactly the declared sorts")
        return errors
    expected = state_ranges_for(
        problem, {sort: hi - lo + 1 for sort, lo, hi in a.state_ranges}
    )
    if expected != a.state_ranges:
        errors.append(
            "state ranges must be contiguous from 1 in sort declaration order"
        )
        return errors
    grid = transition_grid(problem, a.state_ranges)
    missing = [t for t in grid if t not in a.delta]
    for ctor, args in missing:
        errors.append("missing transition for %s%s" % (ctor, list(args)))
    extra = set(a.delta) - set(grid)
    for ctor, args in sorted(extra):
        errors.append("transition %s%s is outside the signature grid" % (ctor, list(args)))
    for (ctor, args), target in a.delta.items():
        if (ctor, args) in extra:
            continue
        result_sort = problem.constructor(ctor)[1]
        if target not in a.states_of(result_sort):
            errors.append(
                "transition %s%s targets state %d outside sort %s"
                % (ctor, list(args), target, result_sort)
            )
    return errors


def inhabitation(a: TreeAutomaton) -> Dict[int, int]:
    """Number of ground terms reaching each state, saturated at two
    (EMPTY, ONE, MANY).  Distinct transitions accept disjoint term sets
    because the automaton is deterministic, so contributions add up."""
    count: Dict[int, int] = {q: EMPTY for q in a.all_states()}
    changed = True
    while changed:
        changed = False
        for q in a.all_states():
            total = 0
            for (ctor, args), target in a.delta.items():
                if target != q:
                    continue
                contrib = 1
                for arg in args:
                    contrib *= count[arg]
                    if contrib >= MANY:
                        contrib = MANY
                        break
                total += contrib
                if total >= MANY:
                    total = MANY
                    break
            if total > count[q]:
                count[q] = total
                changed = True
    return count


def diff_approx(
    a: TreeAutomaton, q1: int, q2: int, inh: Optional[Dict[int, int]] = None
) -> bool:
    """Over-approximates "two terms reaching q1 and q2 can differ".  By
    determinism different states accept disjoint languages, so distinct
    inhabited states always differ; a state differs from itself only if it
    accepts at least two terms.  False therefore certifies that all
    accepted term pairs are equal."""
    if inh is None:
        inh = inhabitation(a)
    if q1 != q2:
        return inh[q1] != EMPTY and inh[q2] != EMPTY
    return inh[q1] == MANY


def sample_language(
    a: TreeAutomaton, q: int, limit: int, max_depth: Optional[int] = None
) -> List[App]:
    """The first `limit` ground terms reaching q, ordered by depth and then
    by transition grid order.  With max_depth set, the result is exhaustive
    for the language up to that depth (still truncated at `limit`)."""
    strata: Dict[int, Dict[int, List[App]]] = {s: {} for s in a.all_states()}
    out: List[App] = []
    depth = 0
    last_hit = -1
    # Pumping bound: consecutive depths carrying terms of one state are at
    # most total_states apart, and the least one is below total_states.
    gap = max(a.total_states, 1)
    while len(out) < limit:
        if max_depth is not None and depth > max_depth:
            break
        if depth - max(last_hit, 0) > gap:
            break
        for (ctor, args), target in a.delta.items():
            for term in _terms_at_depth(strata, ctor, args, depth):
                strata[target].setdefault(depth, []).append(term)
                if target == q:
                    last_hit = depth
                    if len(out) < limit:
                        out.append(term)
        depth += 1
    return out


def _terms_at_depth(
    strata: Dict[int, Dict[int, List[App]]],
    ctor: str,
    args: Tuple[int, ...],
    depth: int,
) -> Iterator[App]:
    if not args:
        if depth == 0:
            yield App(ctor)
        return
    if depth == 0:
        return
    pools = [
        [t for d in range(depth) for t in strata[arg].get(d, [])]
        for arg in args
    ]
    for chosen in itertools.product(*pools):
        if 1 + max(term_depth(t) for t in chosen) == depth:
            yield App(ctor, tuple(chosen))


def check_tables(
    tables: PredicateTables, a: TreeAutomaton, problem: Problem
) -> List[str]:
    """Arity and range discipline for a predicate interpretation."""
    errors: List[str] = []
    for pred, rows in tables.items():
        if not problem.has_predicate(pred):
            errors.append("unknown predicate %s" % pred)
            continue
        decl = problem.predicate(pred)
        for row in rows:
            if len(row) != len(decl.arg_sorts):
                errors.append("%s%s has the wrong arity" % (pred, list(row)))
                continue
            for qv, sort in zip(row, decl.arg_sorts):
                if qv not in a.states_of(sort):
                    errors.append(
                        "%s%s: state %d is outside sort %s" % (pred, list(row), qv, sort)
                    )
    for p in problem.predicates:
        if p.name not in tables:
            errors.append("missing table for predicate %s" % p.name)
    return errors


def _display_ctor(name: str) -> str:
    return name[0].upper() + name[1:] if name else name


def render_automaton(
    a: TreeAutomaton, tables: Optional[PredicateTables] = None
) -> str:
    """Transition list, and predicate tuples when tables are given."""
    lines = ["ADT Transitions:"]
    for (ctor, args), target in a.delta.items():
        if args:
            lines.append(
                "%s(%s) -> %d" % (_display_ctor(ctor), ",".join(map(str, args)), target)
            )
        else:
            lines.append("%s -> %d" % (_display_ctor(ctor), target))
    if tables is not None:
        lines.append("")
        lines.append("Predicates:")
        for pred, rows in tables.items():
            for row in sorted(rows):
                lines.append("%s(%s)" % (pred, ",".join(map(str, row))))
    return "\n".join(lines)
