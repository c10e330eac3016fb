import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mecsched.greedy import schedule_fcfs, schedule_stf
from mecsched.model import Task, TaskSet, validate_schedule

from oracles import I1, tick_simulate


def placements(s):
    return {a.task_id: (a.cpu_id, a.start) for a in s.assignments}


def test_single_task():
    ts = TaskSet([Task(1, 0, 7, 3, 20)])
    for f in (schedule_fcfs, schedule_stf):
        s = f(ts, 2)
        assert placements(s) == {1: (1, 7)}
        assert s.assignments[0].waiting == 0


def test_i1_fcfs():
    s = schedule_fcfs(I1, 1)
    assert placements(s) == {1: (1, 0), 3: (1, 5)}
    assert s.dropped == {2}


def test_i1_stf():
    s = schedule_stf(I1, 1)
    assert placements(s) == {2: (1, 0), 3: (1, 2), 1: (1, 4)}
    assert not s.dropped


def test_two_cpus_same_arrival():
    ts = TaskSet([Task(1, 0, 0, 4, 10), Task(2, 0, 0, 4, 10)])
    s = schedule_fcfs(ts, 2)
    assert placements(s) == {1: (1, 0), 2: (2, 0)}


def test_equal_proc_matches_fcfs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        tasks = []
        for k in range(12):
            a = int(rng.integers(0, 30))
            tasks.append(Task(k + 1, 0, a, 4, a + 4 + int(rng.integers(0, 12))))
        ts = TaskSet(tasks)
        assert schedule_stf(ts, 2) == schedule_fcfs(ts, 2)


@st.composite
def instances(draw, max_n=12):
    n = draw(st.integers(0, max_n))
    m = draw(st.integers(1, 3))
    tasks = []
    for k in range(n):
        a = draw(st.integers(0, 25))
        p = draw(st.integers(1, 8))
        tasks.append(Task(k + 1, 0, a, p, a + p + draw(st.integers(0, 15))))
    return TaskSet(tasks), m


@settings(max_examples=400, deadline=None)
@given(instances())
def test_matches_unit_time_replay(case):
    """Event-driven output equals a tick-by-tick replay of the dispatch rules."""
    ts, m = case
    for rule, f in (("fcfs", schedule_fcfs), ("stf", schedule_stf)):
        s = f(ts, m)
        placed, dropped = tick_simulate(ts, m, rule)
        assert placements(s) == placed
        assert s.dropped == dropped


@settings(max_examples=300, deadline=None)
@given(instances())
def test_work_conservation_and_drop_rule(case):
    """No CPU idles while a dispatchable task waits; drops happen only past the latest start."""
    ts, m = case
    by_id = ts.by_id()
    for f in (schedule_fcfs, schedule_stf):
        s = f(ts, m)
        assert validate_schedule(s, ts) == []
        horizon = max((t.deadline for t in ts), default=0)
        starts = placements(s)
        for now in range(horizon + 1):
            busy = {starts[tid][0] for tid in starts
                    if starts[tid][1] <= now < starts[tid][1] + by_id[tid].proc_time}
            waiting = [t for t in ts if t.arrival <= now <= t.latest_start
                       and (t.id not in starts or starts[t.id][1] > now)]
            if waiting:
                assert len(busy) == m, f"idle cpu at {now} while {[t.id for t in waiting]} wait"
        for tid in s.dropped:
            t = by_id[tid]
            # every slot in its start window was fully occupied
            for now in range(t.arrival, t.latest_start + 1):
                busy = {starts[o][0] for o in starts
                        if starts[o][1] <= now < starts[o][1] + by_id[o].proc_time}
                assert len(busy) == m


@pytest.mark.parametrize("seed", range(30))
def test_spt_optimal_common_arrival(seed):
    """With one CPU, common arrival and no deadline pressure, STF waiting is minimal over all orders."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    procs = rng.integers(1, 20, n)
    big = int(procs.sum()) + 1
    ts = TaskSet([Task(k + 1, 0, 5, int(p), 5 + big + int(p)) for k, p in enumerate(procs)])
    stf = sum(a.waiting for a in schedule_stf(ts, 1).assignments)
    fcfs = sum(a.waiting for a in schedule_fcfs(ts, 1).assignments)
    best = None
    for order in itertools.permutations(ts):
        t, total = 5, 0
        for task in order:
            total += t - 5
            t += task.proc_time
        best = total if best is None else min(best, total)
    assert stf == best
    assert stf <= fcfs
