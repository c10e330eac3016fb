"""Replicated experiments over a (users x tasks-per-user) grid, plus runtime benchmarks."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bnb import BUDGET_EXHAUSTED, OPTIMAL, solve_exact
from .errors import InsufficientSamplesError, InvalidScheduleError, MissingCellsError
from .ga import GaParams, run_ga
from .greedy import schedule_fcfs, schedule_stf
from .milp import build_model
from .model import (ObjectiveWeights, Schedule, TaskSet, compute_metrics, confidence_interval,
                    validate_schedule)
from .workload import WorkloadConfig, generate_workload

log = logging.getLogger(__name__)

ALGORITHMS = ("FCFS", "STF", "GA", "MILP")
METRICS = ("mean_delay", "dropped_ratio", "objective")

# Published reference runtimes in ms; displayed next to measurements, never a target.
REFERENCE_RUNTIME_MS = {
    10: {"MILP": 42.2, "GA": 62.5},
    50: {"MILP": 90.8, "GA": 1800.0},
    100: {"MILP": 3800.0, "GA": 4600.0},
    500: {"MILP": 11600.0, "GA": 19500.0},
    1000: {"MILP": 21800.0, "GA": 30500.0},
    2500: {"MILP": 40300.0, "GA": 57600.0},
    5000: {"MILP": 60100.0, "GA": 90900.0},
    10000: {"MILP": 125600.0, "GA": 165800.0},
}
RUNTIME_NOTE = ("Reference runtimes come from different hardware and a commercial-grade solver; "
                "they are shown for qualitative comparison only.")


@dataclass(frozen=True)
class Scenario:
    users: tuple[int, ...] = (20,)
    tasks_per_user: tuple[int, ...] = (5,)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    m_cpus: int = 2
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    algorithms: tuple[str, ...] = ALGORITHMS
    n_runs: int = 10
    base_seed: int = 0
    ga_params: GaParams = field(default_factory=GaParams)
    milp_node_limit: int | None = 100_000
    milp_time_limit: float | None = None
    level: float = 0.95
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if not self.users or not self.tasks_per_user:
            raise ValueError("the users and tasks_per_user grids must be non-empty")

    def cells(self) -> list[tuple[int, int]]:
        return [(u, k) for u in self.users for k in self.tasks_per_user]

    def run_seed(self, run: int) -> int:
        return self.base_seed + run

    def workload_for(self, users: int, tpu: int, run: int) -> WorkloadConfig:
        return self.workload.with_(n_users=users, tasks_per_user=tpu, seed=self.run_seed(run))


@dataclass(frozen=True)
class RunRecord:
    users: int
    tasks_per_user: int
    run: int
    seed: int
    algorithm: str
    n_tasks: int
    n_dropped: int
    mean_delay: float
    delay_defined: bool
    dropped_ratio: float
    objective: float
    status: str
    taskset_sha256: str
    runtime_ms: float = field(default=0.0, compare=False)


RUN_COLUMNS = ("users", "tasks_per_user", "run", "seed", "algorithm", "n_tasks", "n_dropped",
               "mean_delay", "delay_defined", "dropped_ratio", "objective", "status", "taskset_sha256")
RESULT_COLUMNS = ("users", "tasks_per_user", "algorithm", "metric", "mean", "ci_half_width", "n")


@dataclass(frozen=True)
class ResultRow:
    users: int
    tasks_per_user: int
    algorithm: str
    metric: str
    mean: float
    ci_half_width: float | None  # None: fewer than two runs, no interval
    n: int


@dataclass
class ResultTable:
    rows: list[ResultRow]
    records: list[RunRecord]
    level: float = 0.95

    def get(self, users: int, tpu: int, algorithm: str, metric: str) -> ResultRow:
        for r in self.rows:
            if (r.users, r.tasks_per_user, r.algorithm, r.metric) == (users, tpu, algorithm, metric):
                return r
        raise KeyError((users, tpu, algorithm, metric))

    def mean_runtime_ms(self) -> dict[tuple[int, int, str], float]:
        acc: dict[tuple[int, int, str], list[float]] = {}
        for rec in self.records:
            acc.setdefault((rec.users, rec.tasks_per_user, rec.algorithm), []).append(rec.runtime_ms)
        return {k: float(np.mean(v)) for k, v in acc.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in self.rows:
            hw = "" if r.ci_half_width is None else repr(r.ci_half_width)
            w.writerow((r.users, r.tasks_per_user, r.algorithm, r.metric, repr(r.mean), hw, r.n))
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"columns": list(RESULT_COLUMNS), "level": self.level,
               "rows": [asdict(r) for r in self.rows]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        return cls([ResultRow(**r) for r in doc["rows"]], [], doc.get("level", 0.95))

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for rec in self.records:
            w.writerow([_cell(getattr(rec, c)) for c in RUN_COLUMNS])
        return buf.getvalue()

    def timings_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("users", "tasks_per_user", "run", "algorithm", "runtime_ms"))
        for rec in self.records:
            w.writerow((rec.users, rec.tasks_per_user, rec.run, rec.algorithm, f"{rec.runtime_ms:.3f}"))
        return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_runs_csv(text: str) -> list[RunRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(RunRecord(
            users=int(row["users"]), tasks_per_user=int(row["tasks_per_user"]), run=int(row["run"]),
            seed=int(row["seed"]), algorithm=row["algorithm"], n_tasks=int(row["n_tasks"]),
            n_dropped=int(row["n_dropped"]), mean_delay=float(row["mean_delay"]),
            delay_defined=bool(int(row["delay_defined"])), dropped_ratio=float(row["dropped_ratio"]),
            objective=float(row["objective"]), status=row["status"], taskset_sha256=row["taskset_sha256"],
        ))
    return out


def solve(algorithm: str, ts: TaskSet, scenario: Scenario, seed: int) -> tuple[Schedule, str]:
    """Run one algorithm on one task set; returns the schedule and a solver status."""
    m, w = scenario.m_cpus, scenario.weights
    if algorithm == "FCFS":
        return schedule_fcfs(ts, m), "heuristic"
    if algorithm == "STF":
        return schedule_stf(ts, m), "heuristic"
    if algorithm == "GA":
        seed_seq = np.random.SeedSequence([scenario.ga_params.seed & (2**64 - 1), seed & (2**64 - 1)])
        params = replace(scenario.ga_params, seed=int(seed_seq.generate_state(1, np.uint64)[0]))
        return run_ga(ts, m, w, params).schedule, "heuristic"
    if algorithm == "MILP":
        model = build_model(ts, m, w, slot_ms=ts.config_echo.slot_ms if ts.config_echo else 1)
        res = solve_exact(model, node_limit=scenario.milp_node_limit, time_limit=scenario.milp_time_limit)
        return res.schedule, res.status
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _run_one(job: tuple[Scenario, int, int, int]) -> list[RunRecord]:
    scenario, users, tpu, run = job
    seed = scenario.run_seed(run)
    ts = generate_workload(scenario.workload_for(users, tpu, run))
    digest = ts.fingerprint()
    out = []
    for alg in scenario.algorithms:
        t0 = time.perf_counter()
        sched, status = solve(alg, ts, scenario, seed)
        runtime = (time.perf_counter() - t0) * 1000.0
        if ts.fingerprint() != digest:
            raise RuntimeError(f"{alg} modified the shared task set (seed {seed})")
        violations = validate_schedule(sched, ts)
        if violations:
            raise InvalidScheduleError(
                f"{alg} produced an invalid schedule for users={users} tasks_per_user={tpu} "
                f"seed={seed}: " + "; ".join(str(v) for v in violations[:5]))
        met = compute_metrics(sched, ts, scenario.weights, runtime)
        out.append(RunRecord(users, tpu, run, seed, alg, len(ts), len(sched.dropped), met.mean_delay,
                             met.delay_defined, met.dropped_ratio, met.objective, status, digest, runtime))
        log.debug("users=%d tpu=%d run=%d %s objective=%.6g (%.1f ms)", users, tpu, run, alg,
                  met.objective, runtime)
    return out


def aggregate(records: Sequence[RunRecord], scenario: Scenario) -> list[ResultRow]:
    """Per-cell confidence intervals; identical records always give identical rows."""
    rows = []
    for users, tpu in scenario.cells():
        for alg in scenario.algorithms:
            recs = sorted((r for r in records if (r.users, r.tasks_per_user, r.algorithm) == (users, tpu, alg)),
                          key=lambda r: r.run)
            for metric in METRICS:
                samples = [getattr(r, metric) for r in recs]
                if not samples:
                    continue
                try:
                    ci = confidence_interval(samples, scenario.level)
                    mean, hw = ci.mean, ci.half_width
                except InsufficientSamplesError:
                    mean, hw = float(samples[0]), None
                rows.append(ResultRow(users, tpu, alg, metric, mean, hw, len(samples)))
    return rows


def run_experiment(scenario: Scenario) -> ResultTable:
    jobs = [(scenario, u, k, r) for u, k in scenario.cells() for r in range(scenario.n_runs)]
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(job) for job in jobs]
    records = [rec for chunk in chunks for rec in chunk]
    return ResultTable(aggregate(records, scenario), records, scenario.level)


def write_results(table: ResultTable, outdir: str | Path, timings: bool = True) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        "results.csv": table.to_csv(),
        "results.json": table.to_json(),
        "runs.csv": table.runs_csv(),
    }
    if timings:
        files["timings.csv"] = table.timings_csv()
    paths = []
    for name, text in files.items():
        p = outdir / name
        p.write_text(text)
        paths.append(p)
    return paths


_PLOT_METRIC = {"delay": "mean_delay", "mean_delay": "mean_delay", "dropped_ratio": "dropped_ratio",
                "objective": "objective"}


def emit_plot_data(table: ResultTable, metric: str, outdir: str | Path,
                   expected: Iterable[tuple[int, int, str]] | None = None) -> list[Path]:
    """Write one CSV per tasks-per-user value: ``users, algorithm, mean, ci_half_width``."""
    if metric not in _PLOT_METRIC:
        raise ValueError(f"unknown metric {metric!r}")
    key = _PLOT_METRIC[metric]
    rows = [r for r in table.rows if r.metric == key]
    if not rows:
        raise MissingCellsError("result table has no rows for metric " + key)
    users = sorted({r.users for r in rows})
    tpus = sorted({r.tasks_per_user for r in rows})
    algs = [a for a in ALGORITHMS if any(r.algorithm == a for r in rows)]
    want = set(expected) if expected is not None else {(u, k, a) for u in users for k in tpus for a in algs}
    have = {(r.users, r.tasks_per_user, r.algorithm) for r in rows}
    missing = sorted(want - have)
    if missing:
        raise MissingCellsError("missing grid cells: " + ", ".join(
            f"(users={u}, tasks_per_user={k}, {a})" for u, k, a in missing))

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in sorted({c[1] for c in want}):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("users", "algorithm", "mean", "ci_half_width"))
        cell_rows = sorted((r for r in rows if r.tasks_per_user == k and (r.users, k, r.algorithm) in want),
                           key=lambda r: (r.users, ALGORITHMS.index(r.algorithm)))
        for r in cell_rows:
            w.writerow((r.users, r.algorithm, repr(r.mean),
                        "" if r.ci_half_width is None else repr(r.ci_half_width)))
        p = outdir / f"plot_{key}_tpu{k}.csv"
        p.write_text(buf.getvalue())
        paths.append(p)
    return paths


@dataclass(frozen=True)
class BenchRow:
    n_tasks: int
    algorithm: str
    mean_runtime_ms: float
    n_runs: int
    budget_exhausted: int
    reference_ms: float | None


def runtime_benchmark(sizes: Sequence[int], template: Scenario,
                      algorithms: Sequence[str] = ("MILP", "GA")) -> list[BenchRow]:
    """Mean wall-clock per solve for instances of ``n`` tasks (``n`` users, one task each)."""
    rows = []
    for n in sizes:
        for alg in algorithms:
            times, exhausted = [], 0
            for run in range(template.n_runs):
                cfg = template.workload_for(n, 1, run)
                ts = generate_workload(cfg)
                t0 = time.perf_counter()
                _, status = solve(alg, ts, template, template.run_seed(run))
                times.append((time.perf_counter() - t0) * 1000.0)
                exhausted += status == BUDGET_EXHAUSTED
            rows.append(BenchRow(n, alg, float(np.mean(times)), template.n_runs, exhausted,
                                 REFERENCE_RUNTIME_MS.get(n, {}).get(alg)))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n_tasks", "algorithm", "mean_runtime_ms", "n_runs", "budget_exhausted", "reference_ms"))
    for r in rows:
        w.writerow((r.n_tasks, r.algorithm, f"{r.mean_runtime_ms:.3f}", r.n_runs, r.budget_exhausted,
                    "" if r.reference_ms is None else r.reference_ms))
    return buf.getvalue()


__all__ = [
    "ALGORITHMS", "BUDGET_EXHAUSTED", "OPTIMAL", "REFERENCE_RUNTIME_MS", "RUNTIME_NOTE", "BenchRow",
    "ResultRow", "ResultTable", "RunRecord", "Scenario", "aggregate", "bench_csv", "emit_plot_data",
    "read_runs_csv", "run_experiment", "runtime_benchmark", "solve", "write_results",
]
