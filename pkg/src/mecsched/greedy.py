"""FCFS and STF list schedulers over identical CPUs with deadline-based dropping."""

from __future__ import annotations

import heapq
from typing import Callable, Iterable

from .model import Schedule, Task, TaskSet, as_taskset


def _fcfs_key(t: Task):
    return (t.arrival, t.id)


def _stf_key(t: Task):
    return (t.proc_time, t.arrival, t.id)


def _simulate(tasks: TaskSet, m_cpus: int, key: Callable[[Task], tuple]) -> Schedule:
    if m_cpus < 1:
        raise ValueError("m_cpus must be >= 1")
    pending = list(tasks)  # already in (arrival, id) order
    n = len(pending)
    free_at = [None] * m_cpus  # None = never used
    queue: list[tuple[tuple, Task]] = []
    placements: dict[int, tuple[int, int]] = {}
    nxt = 0
    now = pending[0].arrival if pending else 0

    while nxt < n or queue:
        while nxt < n and pending[nxt].arrival <= now:
            t = pending[nxt]
            heapq.heappush(queue, (key(t), t))
            nxt += 1
        # a queued task whose latest start has passed can never run
        if any(t.latest_start < now for _, t in queue):
            queue = [e for e in queue if e[1].latest_start >= now]
            heapq.heapify(queue)
        for cpu in range(m_cpus):
            if not queue:
                break
            if free_at[cpu] is None or free_at[cpu] <= now:
                _, t = heapq.heappop(queue)
                placements[t.id] = (cpu + 1, now)
                free_at[cpu] = now + t.proc_time

        candidates = []
        if nxt < n:
            candidates.append(pending[nxt].arrival)
        if queue:
            candidates.extend(f for f in free_at if f is not None and f > now)
        if not candidates:
            break
        now = min(candidates)

    return Schedule.from_starts(tasks, placements, m_cpus)


def schedule_fcfs(tasks: TaskSet | Iterable[Task], m_cpus: int) -> Schedule:
    """Dispatch strictly in arrival order; drop tasks that can no longer meet their deadline."""
    return _simulate(as_taskset(tasks), m_cpus, _fcfs_key)


def schedule_stf(tasks: TaskSet | Iterable[Task], m_cpus: int) -> Schedule:
    """Dispatch the shortest queued task first, ties by arrival then id."""
    return _simulate(as_taskset(tasks), m_cpus, _stf_key)
