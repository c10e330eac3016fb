"""Seeded Poisson workload generation and task-set CSV I/O."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import WorkloadError
from .model import Task, TaskSet

MAX_HORIZON_SLOTS = 2**53

CSV_COLUMNS = ("task_id", "user_id", "arrival_ms", "proc_ms", "deadline_ms")


@dataclass(frozen=True)
class Distribution:
    """A sampling distribution: ``uniform(low, high)``, ``constant(value)`` or ``exponential(mean)``."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        arity = {"uniform": 2, "constant": 1, "exponential": 1}
        if self.kind not in arity:
            raise WorkloadError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != arity[self.kind]:
            raise WorkloadError(f"{self.kind} takes {arity[self.kind]} parameter(s)")
        if self.kind == "uniform" and self.params[0] > self.params[1]:
            raise WorkloadError("uniform: low > high")
        if self.kind == "exponential" and self.params[0] <= 0:
            raise WorkloadError("exponential: mean must be positive")

    @classmethod
    def uniform(cls, low, high):
        return cls("uniform", (low, high))

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", (mean,))

    @property
    def support_min(self) -> float:
        return 0.0 if self.kind == "exponential" else self.params[0]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        if self.kind == "constant":
            return np.full(size, self.params[0])
        return rng.exponential(self.params[0], size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "Distribution":
        return cls(d["kind"], tuple(d["params"]))


@dataclass(frozen=True)
class WorkloadConfig:
    n_users: int = 20
    tasks_per_user: int = 5
    arrival_rate: float = 0.004          # tasks per ms, per user
    packet_size: float = 1000.0          # bits ("1 Kb")
    datarate: float = 50_000.0           # bits per ms (50 Mbps)
    proc_time_dist: Distribution = field(default_factory=lambda: Distribution.uniform(10, 100))
    slack_factor_dist: Distribution = field(default_factory=lambda: Distribution.uniform(1.5, 4.0))
    seed: int = 0
    slot_ms: int = 1

    def __post_init__(self):
        if self.n_users < 1 or self.tasks_per_user < 1:
            raise WorkloadError("n_users and tasks_per_user must be >= 1")
        if not (self.arrival_rate > 0 and self.datarate > 0):
            raise WorkloadError("arrival_rate and datarate must be positive")
        if self.packet_size < 0:
            raise WorkloadError("packet_size must be non-negative")
        if self.proc_time_dist.support_min < 0:
            raise WorkloadError("processing times must be non-negative")
        if self.slack_factor_dist.support_min < 1:
            raise WorkloadError("slack factors must be >= 1")
        if not isinstance(self.slot_ms, int) or self.slot_ms < 1:
            raise WorkloadError("slot_ms must be a positive integer")

    def with_(self, **kw) -> "WorkloadConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["proc_time_dist"] = self.proc_time_dist.to_dict()
        d["slack_factor_dist"] = self.slack_factor_dist.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadConfig":
        d = dict(d)
        for key in ("proc_time_dist", "slack_factor_dist"):
            if key in d and isinstance(d[key], dict):
                d[key] = Distribution.from_dict(d[key])
        return cls(**d)


def transmission_delay(packet_size: float, datarate: float, slot_ms: int | None = None) -> float:
    """Uplink delay in ms; rounded up to a multiple of ``slot_ms`` when given."""
    if datarate <= 0:
        raise WorkloadError("datarate must be positive")
    delay = Fraction(packet_size) / Fraction(datarate)
    if slot_ms is not None:
        return float(math.ceil(delay / slot_ms) * slot_ms)
    return float(delay)


def generate_workload(config: WorkloadConfig) -> TaskSet:
    """Draw a task set; identical configs give identical task sets."""
    slot = config.slot_ms
    tx = transmission_delay(config.packet_size, config.datarate)
    raw = []
    for user in range(config.n_users):
        rng = np.random.default_rng([config.seed & (2**64 - 1), user])
        k = config.tasks_per_user
        gaps = rng.exponential(1.0 / config.arrival_rate, k)
        gen_times = np.cumsum(gaps)
        procs = config.proc_time_dist.sample(rng, k)
        factors = config.slack_factor_dist.sample(rng, k)
        try:
            for seq in range(k):
                arrival = math.ceil((float(gen_times[seq]) + tx) / slot) * slot
                proc = max(slot, round(float(procs[seq]) / slot) * slot)
                window = max(proc, math.floor(proc * float(factors[seq]) / slot) * slot)
                raw.append((arrival, user, seq, proc, arrival + window))
        except (OverflowError, ValueError):
            raise WorkloadError("time horizon overflow") from None

    raw.sort()
    if raw and max(r[4] for r in raw) // slot > MAX_HORIZON_SLOTS:
        raise WorkloadError("time horizon exceeds 2**53 slots")
    tasks = tuple(
        Task(id=i + 1, user_id=user + 1, arrival=int(arr), proc_time=int(p), deadline=int(d))
        for i, (arr, user, _seq, p, d) in enumerate(raw)
    )
    return TaskSet(tasks, config_echo=config)


def taskset_to_csv(ts: TaskSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for t in ts:
        w.writerow((t.id, t.user_id, t.arrival, t.proc_time, t.deadline))
    return buf.getvalue()


def taskset_from_csv(text: str) -> TaskSet:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise WorkloadError(f"task CSV header must be {','.join(CSV_COLUMNS)}")
    tasks = []
    for row in reader:
        try:
            tasks.append(Task(int(row["task_id"]), int(row["user_id"]), int(row["arrival_ms"]),
                              int(row["proc_ms"]), int(row["deadline_ms"])))
        except ValueError as e:
            raise WorkloadError(f"bad task row {row}: {e}") from None
    return TaskSet(tuple(tasks))


def write_taskset(ts: TaskSet, path: str | Path) -> None:
    Path(path).write_text(taskset_to_csv(ts))


def read_taskset(path: str | Path) -> TaskSet:
    return taskset_from_csv(Path(path).read_text())
