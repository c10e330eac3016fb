"""Time-indexed 0-1 model of the offloading problem and LP-format export.

Variables (``i`` = task id, ``j`` = CPU id, ``t`` = slot index):

- ``x_i_j``   binary, task i runs on CPU j
- ``tw_i``    integer waiting time in slots, ``0 <= tw_i <= W_i``
- ``A_i_j``   linearised ``x_i_j * tw_i`` (big-M ``W_i``)
- ``S_i_t_j`` binary, task i starts on CPU j in slot t
- ``M_i_t_j`` binary, task i occupies CPU j in slot t
- ``T_i_t_j`` linearised ``x_i_j * M_i_t_j``
- ``ONE``     fixed at 1, carries the objective constant

The tableau is built lazily; the exact solver works on (drop | cpu, start)
decisions and never needs it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from .errors import ModelError
from .model import ObjectiveWeights, Schedule, Task, TaskSet, as_taskset

Number = int | Fraction


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "integer" | "continuous"
    lb: Number = 0
    ub: Number = 1


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    terms: tuple[tuple[str, Number], ...]
    sense: str  # "<=" | ">=" | "="
    rhs: Number

    def lhs(self, values: Mapping[str, Number]) -> Number:
        return sum(coef * values.get(var, 0) for var, coef in self.terms)

    def satisfied(self, values: Mapping[str, Number]) -> bool:
        v = self.lhs(values)
        if self.sense == "<=":
            return v <= self.rhs
        if self.sense == ">=":
            return v >= self.rhs
        return v == self.rhs


@dataclass(frozen=True)
class SlotTask:
    """A task expressed in slot units."""

    id: int
    arrival: int
    proc: int
    deadline: int

    @property
    def slack(self) -> int:
        return self.deadline - self.arrival - self.proc

    @property
    def latest_start(self) -> int:
        return self.deadline - self.proc


def a_block(i: int, j: int, big_m: int) -> list[LinearConstraint]:
    """Big-M linearisation forcing ``A_i_j = x_i_j * tw_i`` for ``0 <= tw_i <= big_m``."""
    x, tw, a = f"x_{i}_{j}", f"tw_{i}", f"A_{i}_{j}"
    return [
        LinearConstraint(f"linA1_{i}_{j}", ((a, 1), (x, -big_m)), "<=", 0),
        LinearConstraint(f"linA2_{i}_{j}", ((a, 1), (tw, -1)), "<=", 0),
        LinearConstraint(f"linA3_{i}_{j}", ((x, big_m), (tw, 1), (a, -1)), "<=", big_m),
    ]


def t_block(i: int, t: int, j: int) -> list[LinearConstraint]:
    """Linearisation forcing ``T_i_t_j = x_i_j * M_i_t_j`` for binaries (upper bound 1)."""
    x, m, tv = f"x_{i}_{j}", f"M_{i}_{t}_{j}", f"T_{i}_{t}_{j}"
    return [
        LinearConstraint(f"linT1_{i}_{t}_{j}", ((tv, 1), (x, -1)), "<=", 0),
        LinearConstraint(f"linT2_{i}_{t}_{j}", ((tv, 1), (m, -1)), "<=", 0),
        LinearConstraint(f"linT3_{i}_{t}_{j}", ((x, 1), (m, 1), (tv, -1)), "<=", 1),
    ]


class MilpModel:
    def __init__(self, tasks: TaskSet, m_cpus: int, weights: ObjectiveWeights, slot_ms: int,
                 horizon: int):
        self.tasks = tasks
        self.m_cpus = m_cpus
        self.weights = weights
        self.slot_ms = slot_ms
        self.horizon = horizon
        self.slot_tasks = tuple(
            SlotTask(t.id, t.arrival // slot_ms, t.proc_time // slot_ms, t.deadline // slot_ms)
            for t in tasks
        )

    @property
    def n_tasks(self) -> int:
        return len(self.slot_tasks)

    def start_window(self, st: SlotTask) -> range:
        return range(max(st.arrival, 0), min(st.latest_start, self.horizon - st.proc) + 1)

    def variable_counts(self) -> dict[str, int]:
        n, m, T = self.n_tasks, self.m_cpus, self.horizon
        return {
            "x": n * m,
            "tw": n,
            "A": n * m,
            "S": sum(len(self.start_window(st)) for st in self.slot_tasks) * m,
            "M": n * T * m,
            "T": n * T * m,
            "ONE": 1,
        }

    @cached_property
    def variables(self) -> tuple[Variable, ...]:
        out = []
        cpus = range(1, self.m_cpus + 1)
        for st in self.slot_tasks:
            big_m = max(st.slack, 0)
            out.extend(Variable(f"x_{st.id}_{j}", "binary") for j in cpus)
            out.append(Variable(f"tw_{st.id}", "integer", 0, big_m))
            out.extend(Variable(f"A_{st.id}_{j}", "continuous", 0, big_m) for j in cpus)
            for j in cpus:
                out.extend(Variable(f"S_{st.id}_{t}_{j}", "binary") for t in self.start_window(st))
            for j in cpus:
                for t in range(self.horizon):
                    out.append(Variable(f"M_{st.id}_{t}_{j}", "binary"))
                    out.append(Variable(f"T_{st.id}_{t}_{j}", "continuous", 0, 1))
        out.append(Variable("ONE", "continuous", 1, 1))
        return tuple(out)

    @cached_property
    def objective(self) -> tuple[tuple[str, Fraction], ...]:
        """Linear objective terms; ``ONE`` carries the constant ``1 - lambda``."""
        lam = self.weights.exact
        n = self.n_tasks
        terms: list[tuple[str, Fraction]] = []
        for st in self.slot_tasks:
            for j in range(1, self.m_cpus + 1):
                if st.slack > 0 and lam != 0:
                    terms.append((f"A_{st.id}_{j}", lam / st.slack))
                if lam != 1:
                    terms.append((f"x_{st.id}_{j}", -(1 - lam) / n))
        if lam != 1 and n:
            terms.append(("ONE", 1 - lam))
        return tuple(terms)

    @cached_property
    def constraints(self) -> tuple[LinearConstraint, ...]:
        out: list[LinearConstraint] = []
        cpus = range(1, self.m_cpus + 1)
        T = self.horizon
        for st in self.slot_tasks:
            i = st.id
            window = self.start_window(st)
            out.append(LinearConstraint(f"assign_{i}", tuple((f"x_{i}_{j}", 1) for j in cpus), "<=", 1))
            for j in cpus:
                terms = tuple((f"S_{i}_{t}_{j}", 1) for t in window) + ((f"x_{i}_{j}", -1),)
                out.append(LinearConstraint(f"startsel_{i}_{j}", terms, "=", 0))
            wait_terms = [(f"tw_{i}", 1)]
            for j in cpus:
                wait_terms.extend((f"S_{i}_{t}_{j}", -(t - st.arrival)) for t in window if t != st.arrival)
            out.append(LinearConstraint(f"wait_{i}", tuple(wait_terms), "=", 0))
            for j in cpus:
                out.extend(a_block(i, j, max(st.slack, 0)))
            for j in cpus:
                for t in range(T):
                    covering = [s for s in window if s <= t < s + st.proc]
                    terms = ((f"M_{i}_{t}_{j}", 1),) + tuple((f"S_{i}_{s}_{j}", -1) for s in covering)
                    out.append(LinearConstraint(f"occ_{i}_{t}_{j}", terms, "=", 0))
                    if t < st.arrival:
                        out.append(LinearConstraint(f"avail_{i}_{t}_{j}", ((f"M_{i}_{t}_{j}", 1),), "=", 0))
                    out.extend(t_block(i, t, j))
            alloc = tuple((f"T_{i}_{t}_{j}", 1) for j in cpus for t in range(T))
            alloc += tuple((f"x_{i}_{j}", -st.proc) for j in cpus)
            out.append(LinearConstraint(f"alloc_{i}", alloc, "=", 0))
        for j in cpus:
            for t in range(T):
                terms = tuple((f"T_{st.id}_{t}_{j}", 1) for st in self.slot_tasks)
                if terms:
                    out.append(LinearConstraint(f"cap_{t}_{j}", terms, "<=", 1))
        return tuple(out)

    def objective_value(self, values: Mapping[str, Number]) -> Fraction:
        return sum((coef * values.get(var, 0) for var, coef in self.objective), Fraction(0))

    def solution_values(self, schedule: Schedule) -> dict[str, int]:
        """Variable assignment realising ``schedule`` (unlisted variables are 0)."""
        values: dict[str, int] = {"ONE": 1}
        placed = schedule.by_task()
        for st in self.slot_tasks:
            a = placed.get(st.id)
            if a is None:
                continue
            j, s = a.cpu_id, a.start // self.slot_ms
            values[f"x_{st.id}_{j}"] = 1
            values[f"tw_{st.id}"] = s - st.arrival
            values[f"A_{st.id}_{j}"] = s - st.arrival
            values[f"S_{st.id}_{s}_{j}"] = 1
            for t in range(s, s + st.proc):
                values[f"M_{st.id}_{t}_{j}"] = 1
                values[f"T_{st.id}_{t}_{j}"] = 1
        return values

    def violated(self, values: Mapping[str, Number]) -> list[str]:
        bad = [c.name for c in self.constraints if not c.satisfied(values)]
        for v in self.variables:
            val = values.get(v.name, 0)
            if not v.lb <= val <= v.ub:
                bad.append(f"bound:{v.name}")
        return bad


def build_model(tasks: TaskSet | Iterable[Task], m_cpus: int, weights: ObjectiveWeights,
                slot_ms: int = 1, horizon: int | None = None) -> MilpModel:
    ts = as_taskset(tasks)
    if m_cpus < 1:
        raise ModelError("m_cpus must be >= 1")
    if not isinstance(slot_ms, int) or slot_ms < 1:
        raise ModelError("slot_ms must be a positive integer number of ms")
    for t in ts:
        if t.arrival % slot_ms or t.proc_time % slot_ms or t.deadline % slot_ms:
            raise ModelError(f"task {t.id}: times are not multiples of the {slot_ms} ms slot")
        if t.arrival < 0:
            raise ModelError(f"task {t.id}: negative arrival")
    needed = max((t.deadline // slot_ms for t in ts), default=0)
    if horizon is None:
        horizon = needed
    elif horizon < needed:
        raise ModelError(f"horizon {horizon} shorter than the last deadline ({needed} slots)")
    return MilpModel(ts, m_cpus, weights, slot_ms, horizon)


def _fmt(v: Number) -> str:
    if isinstance(v, Fraction) and v.denominator != 1:
        return repr(float(v))
    return str(int(v))


def _expr(terms) -> list[str]:
    out = []
    for k, (var, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_fmt(mag)} {var}"
        out.append(f"{'- ' if sign == '-' else ('' if k == 0 else '+ ')}{body}")
    return out or ["0 ONE"]


def _wrap(head: str, tokens: list[str], width: int = 78) -> list[str]:
    lines, cur = [], head
    for tok in tokens:
        candidate = f"{cur} {tok}"
        if len(candidate) > width and cur.strip():
            lines.append(cur)
            cur = f"    {tok}"
        else:
            cur = candidate
    if cur.strip():
        lines.append(cur)
    return lines


def export_lp(model: MilpModel) -> str:
    """Render the model in CPLEX LP text format; identical models give identical text."""
    lines = [
        f"\\ tasks={model.n_tasks} cpus={model.m_cpus} slot_ms={model.slot_ms} "
        f"horizon={model.horizon} lambda={model.weights.lam!r}",
        "Minimize",
    ]
    lines += _wrap(" obj:", _expr(model.objective))
    lines.append("Subject To")
    for c in model.constraints:
        lines += _wrap(f" {c.name}:", _expr(c.terms) + [c.sense, _fmt(c.rhs)])
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == "binary":
            continue
        if v.lb == v.ub:
            lines.append(f" {v.name} = {_fmt(v.lb)}")
        else:
            lines.append(f" {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
    lines.append("Binaries")
    lines += _wrap("", [v.name for v in model.variables if v.kind == "binary"])
    lines.append("Generals")
    lines += _wrap("", [v.name for v in model.variables if v.kind == "integer"])
    lines.append("End")
    return "\n".join(lines) + "\n"
