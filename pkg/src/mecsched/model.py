"""Domain types shared by every scheduler, plus objective and metric evaluation.

All times are integer milliseconds. A schedule assigns each task either to a
CPU with a start time or to the dropped set; execution is non-preemptive.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from scipy import stats

from .errors import (
    InfeasibleTermError,
    InsufficientSamplesError,
    InvalidScheduleError,
    ScheduleMismatchError,
)


@dataclass(frozen=True, order=True)
class Task:
    id: int
    user_id: int
    arrival: int
    proc_time: int
    deadline: int

    def __post_init__(self):
        if self.proc_time <= 0:
            raise ValueError(f"task {self.id}: proc_time must be positive, got {self.proc_time}")

    @property
    def slack(self) -> int:
        """Largest admissible waiting time; negative means the task can never run."""
        return self.deadline - self.arrival - self.proc_time

    @property
    def latest_start(self) -> int:
        return self.deadline - self.proc_time


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[Task, ...]
    config_echo: Any = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(sorted(self.tasks, key=lambda t: (t.arrival, t.id))))
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids in task set")

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def by_id(self) -> dict[int, Task]:
        return {t.id: t for t in self.tasks}

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for t in self.tasks:
            h.update(f"{t.id},{t.user_id},{t.arrival},{t.proc_time},{t.deadline}\n".encode())
        return h.hexdigest()


def as_taskset(tasks: TaskSet | Iterable[Task]) -> TaskSet:
    return tasks if isinstance(tasks, TaskSet) else TaskSet(tuple(tasks))


@dataclass(frozen=True, order=True)
class Assignment:
    task_id: int
    cpu_id: int
    start: int
    waiting: int


@dataclass(frozen=True)
class Schedule:
    assignments: tuple[Assignment, ...]
    dropped: frozenset[int]
    m_cpus: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))
        object.__setattr__(self, "dropped", frozenset(self.dropped))

    @classmethod
    def from_starts(cls, tasks: TaskSet | Iterable[Task], placements: dict[int, tuple[int, int]],
                    m_cpus: int) -> "Schedule":
        """Build a schedule from ``{task_id: (cpu_id, start)}``; unlisted tasks are dropped."""
        assignments = []
        dropped = []
        for t in as_taskset(tasks):
            if t.id in placements:
                cpu, start = placements[t.id]
                assignments.append(Assignment(t.id, cpu, start, start - t.arrival))
            else:
                dropped.append(t.id)
        return cls(tuple(assignments), frozenset(dropped), m_cpus)

    def by_task(self) -> dict[int, Assignment]:
        return {a.task_id: a for a in self.assignments}


@dataclass(frozen=True)
class ObjectiveWeights:
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0 or math.isnan(self.lam):
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def exact(self) -> Fraction:
        return Fraction(self.lam)


@dataclass(frozen=True)
class RunMetrics:
    mean_delay: float
    dropped_ratio: float
    objective: float
    solver_runtime: float = 0.0
    delay_defined: bool = True  # False when no task completed and mean_delay is a placeholder 0


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    half_width: float
    level: float
    n_samples: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


@dataclass(frozen=True)
class Violation:
    rule: str
    task_id: int | None = None
    cpu_id: int | None = None
    detail: str = field(default="", compare=False)

    def __str__(self):
        where = []
        if self.task_id is not None:
            where.append(f"task {self.task_id}")
        if self.cpu_id is not None:
            where.append(f"cpu {self.cpu_id}")
        loc = ", ".join(where)
        return f"{self.rule} ({loc}): {self.detail}" if self.detail else f"{self.rule} ({loc})"


def _check_cover(schedule: Schedule, ts: TaskSet) -> None:
    ids = {t.id for t in ts}
    assigned = [a.task_id for a in schedule.assignments]
    covered = set(assigned) | schedule.dropped
    if covered != ids or len(assigned) + len(schedule.dropped) != len(ids):
        raise ScheduleMismatchError("schedule does not cover exactly the tasks of the task set")


def objective_exact(schedule: Schedule, tasks: TaskSet | Iterable[Task],
                    weights: ObjectiveWeights) -> Fraction:
    """Exact rational value of the weighted delay / dropped-ratio objective."""
    ts = as_taskset(tasks)
    _check_cover(schedule, ts)
    n = len(ts)
    if n == 0:
        return Fraction(0)
    lam = weights.exact
    by_id = ts.by_id()
    delay = Fraction(0)
    for a in schedule.assignments:
        slack = by_id[a.task_id].slack
        if slack == 0:
            if a.waiting != 0:
                raise InfeasibleTermError(f"task {a.task_id} has zero slack but waits {a.waiting} ms")
            continue
        delay += Fraction(a.waiting, slack)
    return lam * delay + (1 - lam) * Fraction(len(schedule.dropped), n)


def evaluate_objective(schedule: Schedule, tasks: TaskSet | Iterable[Task],
                       weights: ObjectiveWeights) -> float:
    return float(objective_exact(schedule, tasks, weights))


def validate_schedule(schedule: Schedule, tasks: TaskSet | Iterable[Task]) -> list[Violation]:
    ts = as_taskset(tasks)
    by_id = ts.by_id()
    out: list[Violation] = []

    seen: dict[int, int] = defaultdict(int)
    for a in schedule.assignments:
        seen[a.task_id] += 1
    for tid in schedule.dropped:
        seen[tid] += 1
    for tid, count in sorted(seen.items()):
        if tid not in by_id:
            out.append(Violation("unknown-task", tid, detail="task not in task set"))
        elif count > 1:
            out.append(Violation("duplicate-task", tid, detail=f"appears {count} times"))
    for tid in sorted(by_id):
        if tid not in seen:
            out.append(Violation("missing-task", tid, detail="neither assigned nor dropped"))

    per_cpu: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
    for a in schedule.assignments:
        t = by_id.get(a.task_id)
        if t is None:
            continue
        if not 1 <= a.cpu_id <= schedule.m_cpus:
            out.append(Violation("cpu-range", a.task_id, a.cpu_id,
                                 f"cpu id outside 1..{schedule.m_cpus}"))
        if a.start < t.arrival:
            out.append(Violation("arrival", a.task_id, a.cpu_id,
                                 f"start {a.start} before arrival {t.arrival}"))
        if a.start + t.proc_time > t.deadline:
            out.append(Violation("deadline", a.task_id, a.cpu_id,
                                 f"completes at {a.start + t.proc_time} after deadline {t.deadline}"))
        if a.waiting != a.start - t.arrival:
            out.append(Violation("waiting", a.task_id, a.cpu_id,
                                 f"waiting {a.waiting} != start - arrival = {a.start - t.arrival}"))
        per_cpu[a.cpu_id].append((a.start, a.start + t.proc_time, a.task_id))

    for cpu in sorted(per_cpu):
        intervals = sorted(per_cpu[cpu])
        for (s0, e0, t0), (s1, e1, t1) in zip(intervals, intervals[1:]):
            if s1 < e0:
                out.append(Violation("cpu-overlap", t1, cpu,
                                     f"[{s1},{e1}) overlaps task {t0} at [{s0},{e0})"))
    return out


def compute_metrics(schedule: Schedule, tasks: TaskSet | Iterable[Task], weights: ObjectiveWeights,
                    solver_runtime: float = 0.0) -> RunMetrics:
    ts = as_taskset(tasks)
    violations = validate_schedule(schedule, ts)
    if violations:
        raise InvalidScheduleError("; ".join(str(v) for v in violations))
    n = len(ts)
    waits = [a.waiting for a in schedule.assignments]
    mean_delay = sum(waits) / len(waits) if waits else 0.0
    return RunMetrics(
        mean_delay=float(mean_delay),
        dropped_ratio=len(schedule.dropped) / n if n else 0.0,
        objective=evaluate_objective(schedule, ts, weights),
        solver_runtime=solver_runtime,
        delay_defined=bool(waits),
    )


def confidence_interval(samples: Sequence[float], level: float = 0.95) -> ConfidenceInterval:
    """Student-t interval for the mean of ``samples``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    n = len(samples)
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n}")
    if all(x == samples[0] for x in samples):
        return ConfidenceInterval(mean=float(samples[0]), half_width=0.0, level=level, n_samples=n)
    mean = math.fsum(samples) / n
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in samples) / (n - 1))
    half = 0.0 if sd == 0.0 else float(stats.t.ppf((1.0 + level) / 2.0, n - 1)) * sd / math.sqrt(n)
    return ConfidenceInterval(mean=mean, half_width=half, level=level, n_samples=n)
