"""Exact branch and bound for the time-indexed model.

Costs are kept as integers scaled by ``lambda_den * N * lcm(slacks)`` so that
pruning and optimality are decided in exact arithmetic.

Two searches share one node budget:

- a sequence search that grows each CPU's job sequence in time order with
  every job started as early as possible. Waiting costs only grow with the
  start time, so some optimum has this shape, and states that agree on the
  undecided set and the multiset of CPU release times are merged.
- a slot search over (drop | cpu, start slot) decisions per task, ordered by
  latest start. It dives to good incumbents quickly on large instances and
  also drives the lexicographic tie-break among optima.

Both bounds add, for every undecided task, the cheaper of dropping it or
starting it at the earliest time still open to it, which never overestimates.
"""

from __future__ import annotations

import heapq
import math
import time
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .greedy import schedule_fcfs, schedule_stf
from .milp import MilpModel
from .model import Schedule

OPTIMAL = "optimal"
BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class ExactResult:
    schedule: Schedule
    objective: float
    status: str
    objective_exact: Fraction
    nodes: int
    canonical: bool

    def __iter__(self):
        return iter((self.schedule, self.objective, self.status))


class _Frame:
    __slots__ = ("depth", "k", "options", "applied", "mark")

    def __init__(self, depth, k, options):
        self.depth = depth
        self.k = k
        self.options = options
        self.applied = None
        self.mark = 0


class _BudgetExhausted(Exception):
    pass


class _Search:
    def __init__(self, model: MilpModel, node_limit, deadline_at):
        sts = model.slot_tasks
        self.model = model
        self.n = n = len(sts)
        self.m = model.m_cpus
        self.ids = [st.id for st in sts]
        self.arr = [st.arrival for st in sts]
        self.proc = [st.proc for st in sts]
        windows = [model.start_window(st) for st in sts]
        self.lo = [w.start for w in windows]
        self.hi = [w.stop - 1 for w in windows]
        self.feasible = [len(w) > 0 for w in windows]

        lam = model.weights.exact
        ln, ld = lam.numerator, lam.denominator
        slacks = [st.slack for st in sts if st.slack > 0]
        lcm = math.lcm(*slacks) if slacks else 1
        self.unit = [ln * n * (lcm // st.slack) if st.slack > 0 else 0 for st in sts]
        self.drop = (ld - ln) * lcm
        self.denom = ld * n * lcm

        self.starts = [[] for _ in range(self.m)]
        self.ends = [[] for _ in range(self.m)]
        self.place: dict[int, tuple[int, int]] = {}
        self.es = [[None] * self.m for _ in range(n)]
        self.lbv = [0] * n
        self.trail: list[tuple[int, int, int | None, int]] = []
        self.partial = 0
        self.rest = 0
        self.nodes = 0
        self.node_limit = node_limit
        self.deadline_at = deadline_at

    # -- primitive state ------------------------------------------------------------------

    def earliest(self, j: int, k: int, frm: int):
        """Earliest start >= frm at which task k fits on cpu j, or None."""
        s = max(frm, self.lo[k])
        p = self.proc[k]
        starts, ends = self.starts[j], self.ends[j]
        idx = bisect_right(ends, s)
        while idx < len(starts):
            if s + p <= starts[idx]:
                break
            if ends[idx] > s:
                s = ends[idx]
            idx += 1
        return s if s <= self.hi[k] else None

    def _lb(self, k: int) -> int:
        best = None
        for e in self.es[k]:
            if e is not None and (best is None or e < best):
                best = e
        if best is None:
            return self.drop
        return min(self.drop, self.unit[k] * (best - self.arr[k]))

    def reset(self, order: list[int]) -> None:
        self.starts = [[] for _ in range(self.m)]
        self.ends = [[] for _ in range(self.m)]
        self.place = {}
        self.trail = []
        self.partial = sum(self.drop for k in range(self.n) if not self.feasible[k])
        self.rest = 0
        for k in order:
            self.es[k] = [self.lo[k]] * self.m
            self.lbv[k] = self._lb(k)
            self.rest += self.lbv[k]

    def apply(self, frame: _Frame, option, undecided: list[int]) -> None:
        k = frame.k
        kind, j, s, cost = option
        frame.mark = len(self.trail)
        self.partial += cost
        self.rest -= self.lbv[k]
        if kind == "place":
            e = s + self.proc[k]
            starts, ends = self.starts[j], self.ends[j]
            idx = bisect_right(starts, s)
            starts.insert(idx, s)
            ends.insert(idx, e)
            self.place[k] = (j, s)
            es, lbv, trail = self.es, self.lbv, self.trail
            for k2 in undecided:
                old = es[k2][j]
                if old is not None and old < e and old + self.proc[k2] > s:
                    es[k2][j] = self.earliest(j, k2, e)
                    new_lb = self._lb(k2)
                    trail.append((k2, j, old, lbv[k2]))
                    self.rest += new_lb - lbv[k2]
                    lbv[k2] = new_lb
        frame.applied = option

    def undo(self, frame: _Frame) -> None:
        k = frame.k
        kind, j, s, cost = frame.applied
        trail = self.trail
        while len(trail) > frame.mark:
            k2, j2, old, old_lb = trail.pop()
            self.es[k2][j2] = old
            self.rest += old_lb - self.lbv[k2]
            self.lbv[k2] = old_lb
        if kind == "place":
            idx = self.starts[j].index(s)
            del self.starts[j][idx]
            del self.ends[j][idx]
            del self.place[k]
        self.rest += self.lbv[k]
        self.partial -= cost
        frame.applied = None

    def tick(self) -> None:
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise _BudgetExhausted
        if self.deadline_at is not None and self.nodes % 256 == 0 and time.perf_counter() > self.deadline_at:
            raise _BudgetExhausted

    # -- option generators ----------------------------------------------------------------

    def _cpus(self) -> list[int]:
        """CPUs up to symmetry: a CPU whose state equals a lower-numbered one is skipped."""
        out = []
        for j in range(self.m):
            if any(self.starts[j] == self.starts[i] and self.ends[j] == self.ends[i] for i in out):
                continue
            out.append(j)
        return out

    def _starts_on(self, j: int, k: int):
        s = self.es[k][j]
        while s is not None:
            yield s, j
            s = self.earliest(j, k, s + 1)

    def options_by_cost(self, k: int, ctx):
        """Cheapest-first options; stops once no option can beat the incumbent."""
        a, unit, drop = self.arr[k], self.unit[k], self.drop
        merged = heapq.merge(*[self._starts_on(j, k) for j in self._cpus()])
        drop_done = False
        for s, j in merged:
            c = unit * (s - a)
            base = self.partial + self.rest - self.lbv[k]
            if not drop_done and drop <= c:
                drop_done = True
                if base + drop < ctx.best:
                    yield ("drop", None, None, drop)
                    base = self.partial + self.rest - self.lbv[k]
            if base + c >= ctx.best:
                return
            yield ("place", j, s, c)
        if not drop_done and self.partial + self.rest - self.lbv[k] + drop < ctx.best:
            yield ("drop", None, None, drop)

    def options_lex(self, k: int, ctx):
        """Options in (drop, cpu, start) order, restricted to those that can still reach the target."""
        a, unit, drop = self.arr[k], self.unit[k], self.drop
        if self.partial + self.rest - self.lbv[k] + drop <= ctx.target:
            yield ("drop", None, None, drop)
        for j in self._cpus():
            for s, _ in self._starts_on(j, k):
                c = unit * (s - a)
                if self.partial + self.rest - self.lbv[k] + c > ctx.target:
                    break
                yield ("place", j, s, c)

    # -- driver ---------------------------------------------------------------------------

    def dfs(self, order: list[int], make_options, on_leaf) -> None:
        """Iterative DFS; ``on_leaf`` returns True to stop the search."""
        self.reset(order)
        if not order:
            on_leaf()
            return
        depth_last = len(order) - 1
        stack = [_Frame(0, order[0], make_options(order[0]))]
        try:
            while stack:
                fr = stack[-1]
                if fr.applied is not None:
                    self.undo(fr)
                opt = next(fr.options, None)
                if opt is None:
                    stack.pop()
                    continue
                self.tick()
                self.apply(fr, opt, order[fr.depth + 1:])
                if fr.depth == depth_last:
                    if on_leaf():
                        return
                else:
                    k2 = order[fr.depth + 1]
                    stack.append(_Frame(fr.depth + 1, k2, make_options(k2)))
        finally:
            while stack:
                fr = stack.pop()
                if fr.applied is not None:
                    self.undo(fr)

    def placement_cost(self, placements: dict[int, tuple[int, int]]) -> int:
        total = 0
        for k in range(self.n):
            if k in placements:
                total += self.unit[k] * (placements[k][1] - self.arr[k])
            else:
                total += self.drop
        return total


class _Ctx:
    def __init__(self, best, best_place, target=None):
        self.best = best
        self.best_place = best_place
        self.target = target
        self.found = None


def _sequence_search(search: _Search, ctx: _Ctx) -> None:
    """Exhaust left-justified schedules, improving ``ctx``; raises ``_BudgetExhausted``."""
    arr, proc, hi, unit, drop = search.arr, search.proc, search.hi, search.unit, search.drop
    feasible = [k for k in range(search.n) if search.feasible[k]]
    base = drop * (search.n - len(feasible))
    closed = math.inf  # release time of a CPU that takes no further jobs
    seen: dict[tuple[int, tuple], int] = {}

    def expand(remaining: int, ends: tuple, cost: int, place):
        """Children of a node, cheapest first, or None when the node is pruned or a leaf.

        ``place`` is a linked list ``(task, (cpu, start), parent)`` of placements.
        """
        e = min(ends)
        todo = [k for k in feasible if remaining >> k & 1]
        if e == closed or not todo:
            total = cost + drop * len(todo)
            if total < ctx.best:
                ctx.best, ctx.best_place = total, {}
                while place is not None:
                    k, where, place = place
                    ctx.best_place[k] = where
            return None
        bound = 0
        live = []
        for k in todo:
            st = e if e > arr[k] else arr[k]
            if st > hi[k]:
                remaining &= ~(1 << k)
                cost += drop
            else:
                bound += min(drop, unit[k] * (st - arr[k]))
                live.append((unit[k] * (st - arr[k]), arr[k], k, st))
        key = (remaining, tuple(sorted(ends)))
        if seen.get(key, cost + 1) <= cost or cost + bound >= ctx.best:
            return None
        seen[key] = cost
        j = ends.index(e)
        live.sort()
        children = []
        for c, _, k, st in live:
            nxt = ends[:j] + (st + proc[k],) + ends[j + 1:]
            children.append((remaining & ~(1 << k), nxt, cost + c, (k, (j, st), place)))
        children.append((remaining, ends[:j] + (closed,) + ends[j + 1:], cost, place))
        return iter(children)

    full = sum(1 << k for k in feasible)
    root = expand(full, (0,) * search.m, base, None)
    stack = [root] if root is not None else []
    while stack:
        child = next(stack[-1], None)
        if child is None:
            stack.pop()
            continue
        search.tick()
        remaining, ends, cost, place = child
        it = expand(remaining, ends, cost, place)
        if it is not None:
            stack.append(it)


def _schedule_from(model: MilpModel, search: _Search, place: dict[int, tuple[int, int]]) -> Schedule:
    placements = {search.ids[k]: (j + 1, s * model.slot_ms) for k, (j, s) in place.items()}
    return Schedule.from_starts(model.tasks, placements, model.m_cpus)


def _greedy_incumbents(model: MilpModel, search: _Search):
    pos = {tid: k for k, tid in enumerate(search.ids)}
    for sched in (schedule_fcfs(model.tasks, model.m_cpus), schedule_stf(model.tasks, model.m_cpus)):
        yield {pos[a.task_id]: (a.cpu_id - 1, a.start // model.slot_ms) for a in sched.assignments}


def solve_exact(model: MilpModel, node_limit: int | None = None, time_limit: float | None = None,
                canonicalize: bool = True) -> ExactResult:
    """Minimise the model objective; ``status`` is ``optimal`` unless the budget ran out.

    ``time_limit`` is in seconds and makes results machine-dependent; prefer
    ``node_limit`` where reproducibility matters. Among equal-cost optima the
    lexicographically smallest (cpu, start) vector in task-id order is
    returned, with a dropped task counting as cpu 0.
    """
    deadline_at = None if time_limit is None else time.perf_counter() + time_limit
    search = _Search(model, node_limit, deadline_at)
    n = search.n

    ctx = _Ctx(best=n * search.drop, best_place={})
    for place in _greedy_incumbents(model, search):
        cost = search.placement_cost(place)
        if cost < ctx.best:
            ctx.best, ctx.best_place = cost, place

    def record():
        if search.partial < ctx.best:
            ctx.best = search.partial
            ctx.best_place = dict(search.place)
        return False

    feasible = [k for k in range(n) if search.feasible[k]]
    by_latest = sorted(feasible, key=lambda k: (search.hi[k], search.ids[k]))
    status = OPTIMAL
    # first half of the budget (all of it when unlimited) goes to the sequence search
    search.node_limit = None if node_limit is None else node_limit // 2
    try:
        _sequence_search(search, ctx)
    except _BudgetExhausted:
        search.node_limit = node_limit
        try:
            search.dfs(by_latest, lambda k: search.options_by_cost(k, ctx), record)
        except _BudgetExhausted:
            status = BUDGET_EXHAUSTED

    best_place = ctx.best_place
    canonical = False
    if status == OPTIMAL and canonicalize:
        lex = _Ctx(best=None, best_place=None, target=ctx.best)

        def first_hit():
            if search.partial == lex.target:
                lex.found = dict(search.place)
                return True
            return False

        by_id = sorted(feasible, key=lambda k: search.ids[k])
        first_pass_nodes, search.nodes = search.nodes, 0
        try:
            search.dfs(by_id, lambda k: search.options_lex(k, lex), first_hit)
        except _BudgetExhausted:
            pass
        search.nodes += first_pass_nodes
        if lex.found is not None:
            best_place, canonical = lex.found, True

    schedule = _schedule_from(model, search, best_place)
    exact = Fraction(search.placement_cost(best_place), search.denom) if n else Fraction(0)
    return ExactResult(schedule, float(exact), status, exact, search.nodes, canonical)
