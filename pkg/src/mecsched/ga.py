"""Genetic algorithm over per-task CPU/drop codes with a repairing decoder."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import kernels
from .greedy import schedule_fcfs, schedule_stf
from .model import ObjectiveWeights, Schedule, Task, TaskSet, as_taskset, objective_exact

ORDER_ARRIVAL = 0
ORDER_SHORTEST = 1


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 100
    mutation_rate: float = 0.01
    tournament_size: int = 3
    crossover: str = "two-point"
    crossover_rate: float = 1.0
    seed: int = 0
    seed_with_greedy: bool = True

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if self.crossover != "two-point":
            raise ValueError(f"unsupported crossover {self.crossover!r}")


class GaResult(NamedTuple):
    schedule: Schedule
    fitness_history: list[float]


def bits_per_task(m_cpus: int) -> int:
    return m_cpus.bit_length()  # == ceil(log2(m + 1))


def chromosome_length(n_tasks: int, m_cpus: int) -> int:
    """CPU-code bits for every task plus one trailing sequencing gene."""
    return n_tasks * bits_per_task(m_cpus) + 1


def _arrays(ts: TaskSet):
    arrival = np.array([t.arrival for t in ts], dtype=np.int64)
    proc = np.array([t.proc_time for t in ts], dtype=np.int64)
    deadline = np.array([t.deadline for t in ts], dtype=np.int64)
    return arrival, proc, deadline


def encode(schedule: Schedule, tasks: TaskSet | Iterable[Task], order: int = ORDER_ARRIVAL) -> np.ndarray:
    ts = as_taskset(tasks)
    bits = bits_per_task(schedule.m_cpus)
    cpu_of = {a.task_id: a.cpu_id for a in schedule.assignments}
    genes = np.zeros(chromosome_length(len(ts), schedule.m_cpus), dtype=np.uint8)
    for k, t in enumerate(ts):
        code = cpu_of.get(t.id, 0)
        for b in range(bits):
            genes[k * bits + b] = (code >> (bits - 1 - b)) & 1
    genes[-1] = order
    return genes


def decode(chromosome, tasks: TaskSet | Iterable[Task], m_cpus: int) -> Schedule:
    """Turn a chromosome into a feasible schedule, dropping tasks that would miss their deadline."""
    ts = as_taskset(tasks)
    chromosome = np.asarray(chromosome, dtype=np.uint8)
    if len(chromosome) != chromosome_length(len(ts), m_cpus):
        raise ValueError("chromosome length does not match the instance")
    if len(ts) == 0:
        return Schedule((), frozenset(), m_cpus)
    cpu, start = kernels.decode_one(chromosome, *_arrays(ts), m_cpus, bits_per_task(m_cpus))
    placements = {t.id: (int(cpu[k]), int(start[k])) for k, t in enumerate(ts) if cpu[k] > 0}
    return Schedule.from_starts(ts, placements, m_cpus)


def run_ga(tasks: TaskSet | Iterable[Task], m_cpus: int, weights: ObjectiveWeights,
           params: GaParams = GaParams()) -> GaResult:
    """Generational GA with tournament selection, two-point crossover and bit-flip mutation.

    The best individual ever evaluated is kept (hall of fame of size one);
    ``fitness_history[g]`` is its objective after generation ``g`` (0 = initial population).
    """
    ts = as_taskset(tasks)
    n = len(ts)
    if n == 0:
        return GaResult(Schedule((), frozenset(), m_cpus), [0.0] * (params.generations + 1))

    arrival, proc, deadline = _arrays(ts)
    bits = bits_per_task(m_cpus)
    length = chromosome_length(n, m_cpus)
    lam = float(weights.lam)
    P = params.population
    rng = np.random.default_rng(params.seed & (2**64 - 1))

    def evaluate(pop):
        return kernels.evaluate_population(pop, arrival, proc, deadline, m_cpus, bits, lam)

    pop = rng.integers(0, 2, size=(P, length), dtype=np.uint8)
    hof_sched: Schedule | None = None
    hof_exact: Fraction | None = None
    hof_float = np.inf

    def offer(sched: Schedule, fitness: float):
        nonlocal hof_sched, hof_exact, hof_float
        exact = objective_exact(sched, ts, weights)
        if hof_exact is None or exact < hof_exact:
            hof_sched, hof_exact, hof_float = sched, exact, fitness

    if params.seed_with_greedy:
        seeds = [encode(schedule_fcfs(ts, m_cpus), ts, ORDER_ARRIVAL),
                 encode(schedule_stf(ts, m_cpus), ts, ORDER_SHORTEST)]
        for i, genes in enumerate(seeds[:P]):
            pop[i] = genes
    fit = evaluate(pop)
    if params.seed_with_greedy:
        for i in range(min(2, P)):
            offer(decode(pop[i], ts, m_cpus), float(fit[i]))

    def update_hof():
        i = int(np.argmin(fit))
        if hof_exact is None or fit[i] < hof_float:
            offer(decode(pop[i], ts, m_cpus), float(fit[i]))

    update_hof()
    history = [float(hof_exact)]

    half = P // 2
    for _ in range(params.generations):
        contenders = rng.integers(0, P, size=(P, params.tournament_size))
        winners = contenders[np.arange(P), np.argmin(fit[contenders], axis=1)]
        off = pop[winners].copy()

        do_cx = rng.random(half) < params.crossover_rate
        cut1 = rng.integers(1, length + 1, size=half)
        cut2 = rng.integers(1, max(length, 2), size=half)
        if length >= 2:
            for h in np.flatnonzero(do_cx):
                a, b = int(cut1[h]), int(cut2[h])
                if b >= a:
                    b += 1
                else:
                    a, b = b, a
                i, j = 2 * h, 2 * h + 1
                tmp = off[i, a:b].copy()
                off[i, a:b] = off[j, a:b]
                off[j, a:b] = tmp

        off ^= (rng.random(off.shape) < params.mutation_rate).astype(np.uint8)
        pop = off
        fit = evaluate(pop)
        update_hof()
        history.append(float(hof_exact))

    return GaResult(hof_sched, history)


def fitness_history_csv(history: list[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("generation", "best_objective"))
    for g, v in enumerate(history):
        w.writerow((g, repr(float(v))))
    return buf.getvalue()


def write_fitness_history(history: list[float], path: str | Path) -> None:
    Path(path).write_text(fitness_history_csv(history))
