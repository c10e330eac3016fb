import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mecsched.errors import InfeasibleTermError, InsufficientSamplesError, InvalidScheduleError, ScheduleMismatchError
from mecsched.model import (Assignment, ObjectiveWeights, Schedule, Task, TaskSet, compute_metrics,
                            confidence_interval, evaluate_objective, objective_exact, validate_schedule)

from oracles import I1

HALF = ObjectiveWeights(0.5)
STF_I1 = Schedule.from_starts(I1, {2: (1, 0), 3: (1, 2), 1: (1, 4)}, 1)
FCFS_I1 = Schedule.from_starts(I1, {1: (1, 0), 3: (1, 5)}, 1)


def test_task_slack_and_latest_start():
    t = Task(1, 0, 3, 4, 12)
    assert t.slack == 5
    assert t.latest_start == 8
    with pytest.raises(ValueError):
        Task(2, 0, 0, 0, 5)


def test_taskset_sorted_and_unique():
    ts = TaskSet([Task(2, 0, 5, 1, 9), Task(1, 0, 5, 1, 9), Task(3, 0, 0, 1, 9)])
    assert [t.id for t in ts] == [3, 1, 2]
    with pytest.raises(ValueError):
        TaskSet([Task(1, 0, 0, 1, 2), Task(1, 1, 0, 1, 2)])


def test_fingerprint_tracks_content():
    a = TaskSet([Task(1, 0, 0, 2, 5)])
    assert a.fingerprint() == TaskSet([Task(1, 0, 0, 2, 5)]).fingerprint()
    assert a.fingerprint() != TaskSet([Task(1, 0, 0, 2, 6)]).fingerprint()


def test_objective_all_assigned_no_wait_is_zero():
    ts = TaskSet([Task(1, 0, 0, 2, 5), Task(2, 0, 0, 3, 9)])
    s = Schedule.from_starts(ts, {1: (1, 0), 2: (2, 0)}, 2)
    for lam in (0.0, 0.3, 1.0):
        assert objective_exact(s, ts, ObjectiveWeights(lam)) == 0


def test_objective_all_dropped_half():
    s = Schedule.from_starts(I1, {}, 1)
    assert evaluate_objective(s, I1, HALF) == 0.5


def test_objective_i1_stf():
    # 0.5 * (0 + 1/6 + 4/5)
    assert objective_exact(STF_I1, I1, HALF) == Fraction(29, 60)
    assert evaluate_objective(STF_I1, I1, HALF) == pytest.approx(0.48333, abs=5e-6)


def test_objective_zero_slack():
    ts = TaskSet([Task(1, 0, 0, 3, 3), Task(2, 0, 0, 1, 10)])
    ok = Schedule.from_starts(ts, {1: (1, 0), 2: (2, 0)}, 2)
    assert objective_exact(ok, ts, HALF) == 0
    bad = Schedule.from_starts(ts, {1: (1, 1)}, 2)
    with pytest.raises(InfeasibleTermError) as e:
        objective_exact(bad, ts, HALF)
    assert e.value.code == "infeasible-term"


def test_objective_mismatch():
    s = Schedule.from_starts(I1, {1: (1, 0)}, 1)
    other = TaskSet([Task(9, 0, 0, 1, 2)])
    with pytest.raises(ScheduleMismatchError):
        objective_exact(s, other, HALF)


def test_validate_known_feasible():
    assert validate_schedule(STF_I1, I1) == []
    assert validate_schedule(FCFS_I1, I1) == []


def test_validate_overlap():
    ts = TaskSet([Task(1, 0, 0, 5, 20), Task(2, 0, 0, 3, 20)])
    s = Schedule.from_starts(ts, {1: (1, 0), 2: (1, 3)}, 1)
    v = validate_schedule(s, ts)
    assert [x.rule for x in v] == ["cpu-overlap"]
    assert v[0].cpu_id == 1


def test_validate_deadline():
    ts = TaskSet([Task(1, 0, 0, 5, 6)])
    v = validate_schedule(Schedule.from_starts(ts, {1: (1, 2)}, 1), ts)
    assert [x.rule for x in v] == ["deadline"]
    assert v[0].task_id == 1


def test_validate_other_rules():
    ts = TaskSet([Task(1, 0, 4, 1, 20), Task(2, 0, 0, 1, 20)])
    s = Schedule((Assignment(1, 3, 2, -2), Assignment(7, 1, 0, 0)), frozenset(), 2)
    rules = {x.rule for x in validate_schedule(s, ts)}
    assert {"cpu-range", "arrival", "unknown-task", "missing-task"} <= rules
    s2 = Schedule((Assignment(1, 1, 5, 0),), frozenset({1, 2}), 1)
    rules2 = {x.rule for x in validate_schedule(s2, ts)}
    assert {"waiting", "duplicate-task"} <= rules2


def test_metrics_i1():
    m = compute_metrics(FCFS_I1, I1, HALF)
    assert m.mean_delay == 2.0
    assert m.dropped_ratio == pytest.approx(1 / 3)
    m = compute_metrics(STF_I1, I1, HALF)
    assert m.mean_delay == pytest.approx(5 / 3)
    assert m.dropped_ratio == 0
    assert m.objective == evaluate_objective(STF_I1, I1, HALF)


def test_metrics_zero_and_invalid():
    ts = TaskSet([Task(1, 0, 0, 2, 5), Task(2, 0, 0, 3, 9)])
    m = compute_metrics(Schedule.from_starts(ts, {1: (1, 0), 2: (2, 0)}, 2), ts, HALF)
    assert (m.mean_delay, m.dropped_ratio) == (0.0, 0.0)
    with pytest.raises(InvalidScheduleError):
        compute_metrics(Schedule.from_starts(ts, {1: (1, 0), 2: (1, 0)}, 2), ts, HALF)
    empty = compute_metrics(Schedule.from_starts(ts, {}, 2), ts, HALF)
    assert not empty.delay_defined


def test_lambda_range():
    with pytest.raises(ValueError):
        ObjectiveWeights(1.5)
    with pytest.raises(ValueError):
        ObjectiveWeights(-0.1)


def test_ci_examples():
    ci = confidence_interval([5, 5, 5])
    assert (ci.mean, ci.half_width) == (5, 0)
    ci = confidence_interval(list(range(1, 11)))
    assert ci.mean == 5.5
    assert ci.half_width == pytest.approx(2.166, abs=1e-3)
    assert ci.low == pytest.approx(5.5 - ci.half_width)
    with pytest.raises(InsufficientSamplesError) as e:
        confidence_interval([7])
    assert e.value.code == "insufficient-samples"


def test_ci_scales_inverse_sqrt_n():
    # hw * sqrt(n) / (t_q * c4(n)) is an unbiased estimate of sigma for every n,
    # so the half-width shrinks exactly as 1/sqrt(n); checked at 3 sigma over 1000 resamples
    rng = np.random.default_rng(7)
    sigma = 2.0
    for n in (5, 20, 80):
        tq = stats.t.ppf(0.975, n - 1)
        c4 = math.sqrt(2 / (n - 1)) * math.exp(math.lgamma(n / 2) - math.lgamma((n - 1) / 2))
        est = np.array([confidence_interval(list(rng.normal(1.0, sigma, n))).half_width
                        for _ in range(1000)]) * math.sqrt(n) / (tq * c4)
        se = est.std(ddof=1) / math.sqrt(len(est))
        assert abs(est.mean() - sigma) < 3 * se


def test_ci_coverage():
    rng = np.random.default_rng(11)
    hits = 0
    trials = 2000
    for _ in range(trials):
        ci = confidence_interval(list(rng.normal(3.0, 2.0, 10)))
        hits += ci.low <= 3.0 <= ci.high
    p = hits / trials
    assert abs(p - 0.95) < 3 * np.sqrt(0.95 * 0.05 / trials)


@st.composite
def instance_and_schedule(draw):
    n = draw(st.integers(1, 6))
    m = draw(st.integers(1, 3))
    tasks = []
    for k in range(n):
        a = draw(st.integers(0, 20))
        p = draw(st.integers(1, 6))
        d = a + p + draw(st.integers(0, 10))
        tasks.append(Task(k + 1, 0, a, p, d))
    ts = TaskSet(tasks)
    placements = {}
    for t in ts:
        if draw(st.booleans()):
            placements[t.id] = (draw(st.integers(1, m)), t.arrival + draw(st.integers(0, t.slack)))
    lam = draw(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0, 0.3]))
    return ts, Schedule.from_starts(ts, placements, m), ObjectiveWeights(lam)


@settings(max_examples=300, deadline=None)
@given(instance_and_schedule())
def test_objective_bounds(case):
    # the delay term is a sum of per-task ratios in [0, 1], so the value is
    # bounded by lambda * |assigned| + (1 - lambda), not by 1
    ts, s, w = case
    v = objective_exact(s, ts, w)
    assert 0 <= v <= w.exact * len(s.assignments) + (1 - w.exact)
    assert float(v) == evaluate_objective(s, ts, w)


@settings(max_examples=100, deadline=None)
@given(instance_and_schedule())
def test_objective_unit_bound_when_delay_mean(case):
    # dividing the delay sum by N recovers a value inside [0, 1]
    ts, s, w = case
    v = objective_exact(s, ts, w)
    dropped = (1 - w.exact) * Fraction(len(s.dropped), len(ts))
    assert 0 <= (v - dropped) / len(ts) + dropped <= 1


def _all_schedules(ts, m):
    opts = []
    for t in ts:
        o = [None] + [(j, s) for j in range(1, m + 1) for s in range(t.arrival, t.latest_start + 1)]
        opts.append(o)
    for combo in itertools.product(*opts):
        pl = {t.id: c for t, c in zip(ts, combo) if c is not None}
        sched = Schedule.from_starts(ts, pl, m)
        if not validate_schedule(sched, ts):
            yield sched, pl


@pytest.mark.parametrize("seed", range(6))
def test_literal_dropped_term_same_argmin(seed):
    """The double-sum dropped term differs from |dropped|/N by the constant M - 1."""
    rng = np.random.default_rng(seed)
    m = 2
    n = int(rng.integers(2, 5))
    tasks = []
    for k in range(n):
        a = int(rng.integers(0, 4))
        p = int(rng.integers(1, 4))
        tasks.append(Task(k + 1, 0, a, p, a + p + int(rng.integers(0, 3))))
    ts = TaskSet(tasks)
    lam = Fraction(1, 2)
    impl, literal = {}, {}
    for sched, pl in _all_schedules(ts, m):
        key = tuple(sorted(pl.items()))
        impl[key] = objective_exact(sched, ts, HALF)
        delay = sum((Fraction(a.waiting, ts.by_id()[a.task_id].slack)
                     for a in sched.assignments if ts.by_id()[a.task_id].slack), Fraction(0))
        x = {(t.id, j): int(pl.get(t.id, (0,))[0] == j) for t in ts for j in range(1, m + 1)}
        literal[key] = lam * delay + (1 - lam) * sum(Fraction(1 - v, n) for v in x.values())
    assert all(literal[k] - impl[k] == (1 - lam) * (m - 1) for k in impl)
    best_i = min(impl.values())
    best_l = min(literal.values())
    assert {k for k, v in impl.items() if v == best_i} == {k for k, v in literal.items() if v == best_l}
