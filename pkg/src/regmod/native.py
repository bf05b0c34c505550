"""Built-in combinatorial backend: automaton enumeration and model search.

The search walks the fixed transition grid (constructors in declaration
order, argument tuples lexicographic) and assigns one target state per
slot, depth first.  Three prunes keep it tractable, each sound on its own:

  * First-occurrence symmetry breaking.  Scanning slots in grid order,
    arguments before the target, a state may appear for the first time
    only if every smaller state of its sort has already appeared.  Every
    isomorphism class has such a member (its lexicographically least
    one), so the prune never loses a class; classes can still show up
    more than once, which the leaf-level canonicity check removes when
    exact enumeration is requested.

  * Goal pruning.  Least tables, inhabitation counts, and the diff
    over-approximation are all monotone in added transitions, so a goal
    firing on a partial automaton fires on every completion, and the
    whole subtree can be dropped.

  * Warm-started fixpoints.  Tables and inhabitation are extended
    incrementally along the search path and rolled back on backtracking,
    never recomputed from scratch.

The counterexample side is a thin wrapper over the bounded ground least
model: both clause variables and derivations stay within the depth bound.
"""

import itertools
import time
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Set, Tuple

from .automaton import (
    EMPTY,
    MANY,
    PredicateTables,
    Transition,
    TreeAutomaton,
    state_ranges_for,
    transition_grid,
)
from .core import (
    DEFAULT_ATOM_CAP,
    Derivation,
    Problem,
    ground_least_model,
    goal_violated,
)
from .interpretation import ClausePlans, _solutions, violated_goal


class SearchBudgetExceeded(Exception):
    """The node budget ran out before the bound was exhausted; unlike a
    None result this says nothing about models at this bound."""

    def __init__(self, nodes: int):
        super().__init__("search stopped after %d nodes" % nodes)
        self.nodes = nodes


class SearchTimeout(Exception):
    def __init__(self, seconds: float):
        super().__init__("search deadline of %.1fs passed" % seconds)
        self.seconds = seconds


@dataclass
class SearchConfig:
    symmetry_breaking: bool = True
    node_budget: int = 0  # 0 means unlimited
    deadline: Optional[float] = None  # absolute time.monotonic() value
    atom_cap: int = DEFAULT_ATOM_CAP


class _Search:
    """Shared walk state for one (problem, bound) pair."""

    def __init__(self, problem: Problem, n_states: int, config: SearchConfig,
                 plans: Optional[ClausePlans]):
        self.problem = problem
        self.config = config
        self.ranges = state_ranges_for(problem, n_states)
        self.grid = transition_grid(problem, self.ranges)
        self.plans = plans
        self.automaton = TreeAutomaton(self.ranges, {})
        self.range_of = {sort: (lo, hi) for sort, lo, hi in self.ranges}
        self.result_sort = {
            c.name: s.name for s in problem.sorts for c in s.constructors
        }
        # Highest state of each sort seen so far in the appearance order.
        self.seen_upto = {sort: lo - 1 for sort, lo, hi in self.ranges}
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.config.node_budget and self.nodes > self.config.node_budget:
            raise SearchBudgetExceeded(self.nodes)
        if self.config.deadline is not None and self.nodes % 256 == 0:
            if time.monotonic() > self.config.deadline:
                raise SearchTimeout(self.config.deadline)

    def mark_seen(self, states: Tuple[int, ...]) -> List[Tuple[str, int]]:
        undo = []
        for q in states:
            sort = self.automaton.sort_of_state(q)
            if q > self.seen_upto[sort]:
                undo.append((sort, self.seen_upto[sort]))
                self.seen_upto[sort] = q
        return undo

    def unmark(self, undo: List[Tuple[str, int]]) -> None:
        for sort, old in reversed(undo):
            self.seen_upto[sort] = old

    def targets_for(self, ctor: str) -> range:
        lo, hi = self.range_of[self.result_sort[ctor]]
        if not self.config.symmetry_breaking:
            return range(lo, hi + 1)
        return range(lo, min(hi, self.seen_upto[self.result_sort[ctor]] + 1) + 1)


def _state_bijections(
    ranges: Tuple[Tuple[str, int, int], ...]
) -> List[Dict[int, int]]:
    """All per-sort state bijections, as global state maps."""
    perms_per_sort = [
        [
            dict(zip(range(lo, hi + 1), image))
            for image in itertools.permutations(range(lo, hi + 1))
        ]
        for _, lo, hi in ranges
    ]
    combos: List[Dict[int, int]] = []
    for combo in itertools.product(*perms_per_sort):
        pi: Dict[int, int] = {}
        for mapping in combo:
            pi.update(mapping)
        combos.append(pi)
    return combos


def _is_orbit_minimum(
    grid: List[Transition],
    index: Dict[Transition, int],
    bijections: List[Dict[int, int]],
    targets: List[int],
) -> bool:
    """Exact canonicity: the target tuple is the lexicographic minimum of
    its isomorphism orbit under per-sort state bijections."""
    for pi in bijections:
        # The transition (c, args) -> q maps to (c, pi(args)) -> pi(q).
        permuted_targets = [0] * len(targets)
        for i, (ctor, args) in enumerate(grid):
            j = index[(ctor, tuple(pi[a] for a in args))]
            permuted_targets[j] = pi[targets[i]]
        if permuted_targets < targets:
            return False
    return True


def enumerate_automata(
    problem: Problem,
    n_states: int,
    config: Optional[SearchConfig] = None,
) -> Iterator[TreeAutomaton]:
    """All complete deterministic automata with n_states per sort; with
    symmetry breaking on, exactly one representative per isomorphism
    class, in lexicographic target order."""
    config = config or SearchConfig()
    search = _Search(problem, n_states, config, None)
    grid = search.grid
    delta = search.automaton.delta
    targets: List[int] = []
    index = {slot: i for i, slot in enumerate(grid)}
    bijections = _state_bijections(search.ranges) if config.symmetry_breaking else []

    def assign(i: int) -> Iterator[TreeAutomaton]:
        if i == len(grid):
            if not config.symmetry_breaking or _is_orbit_minimum(
                grid, index, bijections, targets
            ):
                yield TreeAutomaton(search.ranges, dict(delta))
            return
        search.tick()
        ctor, args = grid[i]
        undo_args = search.mark_seen(args)
        for q in search.targets_for(ctor):
            undo_t = search.mark_seen((q,))
            delta[grid[i]] = q
            targets.append(q)
            yield from assign(i + 1)
            targets.pop()
            del delta[grid[i]]
            search.unmark(undo_t)
        search.unmark(undo_args)

    yield from assign(0)


def search_model(
    problem: Problem,
    n_states: int,
    config: Optional[SearchConfig] = None,
    plans: Optional[ClausePlans] = None,
) -> Optional[Tuple[TreeAutomaton, PredicateTables]]:
    """First automaton (in search order) whose least tables satisfy every
    goal, or None when the bound is exhausted.  The first hit is returned
    as found; it satisfies check_model but need not be the canonical
    class representative."""
    config = config or SearchConfig()
    if plans is None:
        plans = ClausePlans(problem)
    search = _Search(problem, n_states, config, plans)
    grid = search.grid
    a = search.automaton
    delta = a.delta

    tables: PredicateTables = {p.name: set() for p in problem.predicates}
    inh: Dict[int, int] = {q: EMPTY for q in a.all_states()}

    def extend_inh(undo: List[Tuple[int, int]]) -> None:
        changed = True
        while changed:
            changed = False
            totals: Dict[int, int] = {}
            for (ctor, args), target in delta.items():
                contrib = 1
                for arg in args:
                    contrib *= inh[arg]
                    if contrib >= MANY:
                        contrib = MANY
                        break
                total = totals.get(target, 0) + contrib
                totals[target] = MANY if total > MANY else total
            for q, total in totals.items():
                if total > inh[q]:
                    undo.append((q, inh[q]))
                    inh[q] = total
                    changed = True

    def extend_tables(undo: List[Tuple[str, Tuple[int, ...]]]) -> None:
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
                        undo.append((pred, row))
                        changed = True

    def assign(i: int) -> Optional[Tuple[TreeAutomaton, PredicateTables]]:
        if i == len(grid):
            return TreeAutomaton(search.ranges, dict(delta)), {
                p: set(rows) for p, rows in tables.items()
            }
        search.tick()
        ctor, args = grid[i]
        undo_args = search.mark_seen(args)
        for q in search.targets_for(ctor):
            undo_t = search.mark_seen((q,))
            delta[grid[i]] = q
            inh_undo: List[Tuple[int, int]] = []
            table_undo: List[Tuple[str, Tuple[int, ...]]] = []
            extend_inh(inh_undo)
            extend_tables(table_undo)
            if violated_goal(a, tables, plans, inh) is None:
                found = assign(i + 1)
                if found is not None:
                    return found
            for pred, row in reversed(table_undo):
                tables[pred].discard(row)
            for qq, old in reversed(inh_undo):
                inh[qq] = old
            del delta[grid[i]]
            search.unmark(undo_t)
        search.unmark(undo_args)
        return None

    return assign(0)


def find_counterexample(
    problem: Problem,
    depth_bound: int,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> Optional[Derivation]:
    """Replayable goal violation within the depth bound, or None.  Both
    the instantiations and every intermediate atom stay inside the bounded
    universe, so a None here never rules out deeper counterexamples."""
    atoms, provenance = ground_least_model(problem, depth_bound, atom_cap)
    return goal_violated(problem, atoms, provenance)
