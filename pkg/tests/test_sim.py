import dataclasses
import random
from fractions import Fraction

import pytest

from corpus import instances
from mrsync.planner import TeamRun
from mrsync.sim import (Deadlock, ExecutionTrace, HorizonExhausted, NoLasso, RandomTiming, ScheduleTiming,
                        enumerate_interleavings, simulate, verify_trace, witness_schedule)
from mrsync.strategy import compile_strategies
from mrsync.syncreduce import STRONG, WEAK, SyncPlan, build_sync_automaton, test_feasibility as feasibility
from mrsync.ltl import parse

PLAN = SyncPlan({8: WEAK, 12: WEAK})


def run_case(case_run, labels, plan, timing, **kw):
    return simulate(compile_strategies(case_run, plan), labels, timing, **kw)


def test_case_study_traces_satisfy(case_run, case_phi, case_labels):
    for seed in range(30):
        tr = run_case(case_run, case_labels, PLAN, RandomTiming(seed))
        assert verify_trace(tr, case_phi)


def test_trace_invariants(case_run, case_labels):
    tr = run_case(case_run, case_labels, PLAN, RandomTiming(3))
    times = [e.t for e in tr.events]
    assert times == sorted(times) and all(t >= 0 for t in times)
    assert all(a != b for a, b in zip(tr.configs, tr.configs[1:]))
    from mrsync.syncreduce import project_runs
    runs, _ = project_runs(case_run)
    for i, run in enumerate(runs):
        cells = [c[i] for c in tr.configs]
        cells = [c for k, c in enumerate(cells) if k == 0 or c != cells[k - 1]]
        allowed = {(run.cell(j), run.cell(run.next(j))) for j in range(1, run.l + 1)}
        assert all((a, b) in allowed for a, b in zip(cells, cells[1:]))


def test_weak_moments_are_witnessed(case_run, case_labels):
    tr = run_case(case_run, case_labels, PLAN, RandomTiming(5))
    a, c = tr.lasso
    cycle = tr.configs[a:a + c]
    for s in PLAN.moments:
        assert case_run.at(s) in cycle


def test_strong_crossings_share_a_timestamp():
    r = TeamRun((), (("a", "x"), ("b", "y"), ("c", "y")))
    plan = SyncPlan({1: STRONG})
    for seed in range(10):
        tr = simulate(compile_strategies(r, plan), None, RandomTiming(seed))
        crossings = {}
        for e in tr.events:
            if e.kind == "cross" and e.cell in ("b", "y"):
                crossings.setdefault(e.cell, []).append(e.t)
        assert crossings["b"] == crossings["y"]


def test_single_robot_settles():
    r = TeamRun((("a",), ("b",)), (("c",),))
    tr = simulate(compile_strategies(r, SyncPlan()), {"c": {"p"}}, RandomTiming(0))
    assert tr.lasso == (2, 1)
    assert tr.word().cycle == (frozenset({"p"}),)


def test_stationary_team():
    r = TeamRun((), (("a", "b"),))
    tr = simulate(compile_strategies(r, SyncPlan()), None, RandomTiming(0))
    assert verify_trace(tr, parse("G !pi3"))


def test_witness_replay_violates(case_run, case_phi, case_labels):
    res = feasibility(case_phi, case_run, SyncPlan(), case_labels, fair_witness=True)
    timing = witness_schedule(res.witness.stem, res.witness.cycle)
    tr = run_case(case_run, case_labels, SyncPlan(), timing)
    assert tr.configs[: len(res.witness.cells_stem)] == res.witness.cells_stem
    assert not verify_trace(tr, case_phi)


def test_determinism(case_run, case_labels):
    a = run_case(case_run, case_labels, PLAN, RandomTiming(42)).to_jsonl()
    b = run_case(case_run, case_labels, PLAN, RandomTiming(42)).to_jsonl()
    c = run_case(case_run, case_labels, PLAN, RandomTiming(43)).to_jsonl()
    assert a == b and a != c


def test_message_delay_is_tolerated(case_run, case_phi, case_labels):
    for seed in range(5):
        tr = run_case(case_run, case_labels, PLAN, RandomTiming(seed), delay=Fraction(3, 2))
        assert verify_trace(tr, case_phi)


def test_deadlock_is_reported():
    r = TeamRun((), (("a", "x"), ("b", "y")))
    s1, s2 = compile_strategies(r, SyncPlan({1: WEAK}))
    s2 = dataclasses.replace(s2, n=3)  # waits for a robot that does not exist
    with pytest.raises(Deadlock) as e:
        simulate([s1, s2], None, RandomTiming(0))
    assert e.value.waiting == {1: (1, WEAK, 1), 2: (1, WEAK, 0)}


def test_horizon():
    r = TeamRun((), (("a",), ("b",)))
    timing = ScheduleTiming({1: ([], [Fraction(1, k) for k in range(1, 400)])})
    with pytest.raises(HorizonExhausted):
        simulate(compile_strategies(r, SyncPlan()), None, timing, horizon=1)
    with pytest.raises(ValueError):
        simulate(compile_strategies(r, SyncPlan()), None, RandomTiming(0), horizon=0)


def test_verdict_needs_a_lasso():
    tr = ExecutionTrace([], [("a",)], [0], [frozenset()], None)
    with pytest.raises(NoLasso):
        verify_trace(tr, parse("true"))


def test_timing_sources():
    t = RandomTiming(7)
    xs = [t.next(1) for _ in range(100)]
    assert all(Fraction(1, 2) <= x <= Fraction(3, 2) for x in xs)
    assert xs[:5] == [RandomTiming(7).next(1) for _ in range(1)] + xs[1:5]
    s = ScheduleTiming({1: ([1], [2, 3])})
    assert [s.next(1) for _ in range(5)] == [1, 2, 3, 2, 3]
    assert ScheduleTiming.from_json(s.to_json()).schedule == s.schedule
    with pytest.raises(ValueError):
        ScheduleTiming({1: ([0], [])})


def test_summary_format(case_run, case_phi, case_labels):
    tr = run_case(case_run, case_labels, PLAN, RandomTiming(1))
    s = tr.summary(case_phi)
    assert s["lasso_found"] and s["verdict"] is True
    assert set(s) == {"lasso_found", "word_stem", "word_cycle", "verdict"}
    line = tr.to_jsonl().splitlines()[0]
    assert set(__import__("json").loads(line)) == {"t", "robot", "kind", "cell", "tag"}


def test_interleavings_small_example(small_run):
    a = enumerate_interleavings(small_run, SyncPlan())
    assert len(a.reachable) == 12
    b = enumerate_interleavings(small_run, SyncPlan({2: STRONG, 4: WEAK}))
    assert not ({(1, 3), (3, 1), (4, 1)} & b.reachable)
    full = enumerate_interleavings(small_run, SyncPlan.full_strong(small_run))
    auto = build_sync_automaton(small_run, SyncPlan.full_strong(small_run))
    assert full.reachable == {auto.beta_tuple(j) for j in range(1, small_run.l + 1)}


def test_interleavings_agree_with_sync_automaton():
    rng = random.Random(2)
    for r, phi, labels, _ in instances(17, 40):
        plan = SyncPlan({j: rng.choice((WEAK, STRONG)) for j in range(1, r.l + 1) if rng.random() < 0.4})
        a = build_sync_automaton(r, plan, labels)
        assert enumerate_interleavings(r, plan, bound=1).reachable == set(a.reachable())


def test_interleavings_guard(case_run):
    with pytest.raises(ValueError):
        enumerate_interleavings(case_run, SyncPlan(), guard=100)
