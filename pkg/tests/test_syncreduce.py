import random

import pytest

from corpus import instances
from mrsync.ltl import parse
from mrsync.planner import TeamRun
from mrsync.syncreduce import (STRONG, WEAK, SyncPlan, beta_at, build_sync_automaton, find_optimal_sync,
                               find_sync_moments, project_runs, test_feasibility as feasibility)

RESTRICTED_SUCC = {
    (1, 1): [(1, 2), (2, 1), (2, 2)],
    (1, 2): [(2, 2)],
    (2, 1): [(2, 2)],
    (2, 2): [(3, 2)],
    (2, 3): [(2, 2)],
    (3, 2): [(3, 3), (4, 2), (4, 3)],
    (3, 3): [(4, 3)],
    (4, 2): [(2, 2), (4, 3)],
    (4, 3): [(2, 2), (2, 3), (4, 2)],
}


def test_projection_of_small_example(small_run):
    runs, betas = project_runs(small_run)
    assert [r.states for r in runs] == [("c5", "c1", "c7", "c3"), ("c6", "c2", "c4")]
    assert [(r.k, r.l) for r in runs] == [(2, 4), (2, 3)]
    assert betas[1] == (1, 2, 2, 3)


def test_projection_of_case_study(case_run):
    runs, betas = project_runs(case_run)
    assert " ".join(runs[0].states) == "c7 c2 c1 c10 c9 c18 c16 c31"
    assert (runs[0].k, runs[0].l) == (8, 8)
    assert " ".join(runs[1].states) == "c4 c3 c6 c8 c17 c11 c12 c11 c17 c8 c6 c8 c17 c11"
    assert (runs[1].k, runs[1].l) == (7, 14)
    assert " ".join(runs[2].states) == "c28 c25 c26 c24 c38 c24 c27 c20 c27 c24"
    assert (runs[2].k, runs[2].l) == (5, 10)
    assert beta_at(betas[0], case_run, 8) == beta_at(betas[0], case_run, 12) == 8
    assert beta_at(betas[2], case_run, 12) == 8 and runs[2].cell(8) == "c20"


def test_beta_invariants_on_random_runs():
    rng = random.Random(4)
    for _ in range(300):
        n = rng.randint(1, 3)
        seq = [tuple(rng.choice("abc") for _ in range(n)) for _ in range(rng.randint(1, 7))]
        from mrsync.planner import collapse_run
        k = rng.randint(1, len(seq))
        r = collapse_run(seq[: k - 1], seq[k - 1:])
        runs, betas = project_runs(r)
        for i, (run, beta) in enumerate(zip(runs, betas)):
            assert beta[0] == 1 and len(beta) == r.l
            for j in range(1, r.l + 1):
                assert run.cell(beta_at(beta, r, j)) == r.at(j)[i]
            for j in range(1, r.l):
                step = beta[j] - beta[j - 1]
                assert step in (0, 1) or (j + 1 > r.k and beta[j] == run.k)
            assert all(a != b for a, b in zip(run.states, run.states[1:]))
            assert run.k <= r.k and run.l <= r.l


def test_small_example_unrestricted(small_run):
    a = build_sync_automaton(small_run, SyncPlan())
    assert len(a.states) == 12 and set(a.reachable()) == set(a.states)
    assert a.initial == (1, 1)
    assert a.acceptance == [frozenset((i, j) for i in (2, 3, 4) for j in (2, 3))]
    assert all(q not in a.succ.get(q, ()) for q in a.states)


def test_small_example_restricted(small_run):
    a = build_sync_automaton(small_run, SyncPlan({2: STRONG, 4: WEAK}))
    reach = set(a.reachable())
    assert reach == set(RESTRICTED_SUCC)
    assert {q: a.succ[q] for q in reach} == RESTRICTED_SUCC
    assert a.acceptance == [frozenset({(2, 2)}), frozenset({(4, 3)})]
    unreachable = set(a.states) - reach
    assert unreachable == {(1, 3), (3, 1), (4, 1)}
    dot = a.to_dot()
    assert "gray" in dot and "dashed" in dot


def test_terminal_self_loop():
    r = TeamRun((("a", "b"), ("c", "b")), (("c", "d"),))
    a = build_sync_automaton(r, SyncPlan())
    terminal = tuple(run.l for run in a.runs)
    assert a.succ[terminal] == [terminal]
    assert all(q not in a.succ.get(q, ()) for q in a.states if q != terminal)


def test_full_strong_is_a_single_lasso(case_run, case_labels):
    a = build_sync_automaton(case_run, SyncPlan.full_strong(case_run), case_labels)
    reach = a.reachable()
    assert all(len(a.succ[q]) == 1 for q in reach)
    assert reach == [a.beta_tuple(j) for j in range(1, case_run.l + 1)]


def test_restriction_only_removes_transitions():
    rng = random.Random(6)
    for r, phi, labels, _ in instances(5, 20):
        free = build_sync_automaton(r, SyncPlan(), labels)
        plan = SyncPlan({j: rng.choice((WEAK, STRONG)) for j in range(1, r.l + 1) if rng.random() < 0.5})
        a = build_sync_automaton(r, plan, labels)
        for q in a.reachable():
            assert set(a.succ.get(q, ())) <= set(free.succ.get(q, ())) | {q}


def test_case_study_feasibility(case_run, case_phi, case_labels):
    assert not feasibility(case_phi, case_run, SyncPlan(), case_labels)
    assert feasibility(case_phi, case_run, SyncPlan.full_strong(case_run), case_labels)
    for pf in (False, True):
        assert feasibility(case_phi, case_run, SyncPlan({8: WEAK, 12: WEAK}), case_labels, paper_faithful=pf)


def test_witness_violates_formula(case_run, case_phi, case_labels):
    from mrsync.ltl import eval_lasso
    res = feasibility(case_phi, case_run, SyncPlan(), case_labels, fair_witness=True)
    w = res.witness
    assert not eval_lasso(case_phi, w.word)
    a = build_sync_automaton(case_run, SyncPlan(), case_labels)
    path = w.stem + w.cycle + [w.cycle[0]]
    assert path[0] == a.initial
    assert all(y in a.succ[x] for x, y in zip(path, path[1:]))
    assert set(w.to_json()) >= {"stem", "cycle", "cells_stem", "cells_cycle", "word_stem", "word_cycle"}


def test_algorithm_on_case_study(case_run, case_phi, case_labels):
    for pf in (True, False):
        res = find_sync_moments(case_phi, case_run, case_labels, paper_faithful=pf)
        assert res.plan == SyncPlan({8: WEAK, 12: WEAK})
        assert res.calls <= 26


def test_already_feasible_needs_one_call():
    r = TeamRun((), (("a", "b"),))
    res = find_sync_moments(parse("G !p"), r, {"a": set(), "b": set()})
    assert res.plan == SyncPlan() and res.calls == 1


def test_strict_pseudocode_mode_is_feasible(case_run, case_phi, case_labels):
    res = find_sync_moments(case_phi, case_run, case_labels, strict_pseudocode=True)
    assert feasibility(case_phi, case_run, res.plan, case_labels)


def test_only_full_strong_is_feasible():
    # both robots swap between a and b; the formula forbids the two ever
    # being apart, which only lockstep motion can guarantee
    r = TeamRun((), (("a", "a"), ("b", "b")))
    labels = {"a": {"p"}, "b": {"q"}}
    phi = parse("G ((p -> !q) && (q -> !p))")
    res = find_optimal_sync(phi, r, labels)
    assert res.plan == SyncPlan({1: STRONG, 2: STRONG})
    assert res.calls == 9


def test_optimal_dominates_greedy():
    for r, phi, labels, _ in instances(9, 15):
        if r.l > 6:
            continue
        g = find_sync_moments(phi, r, labels)
        o = find_optimal_sync(phi, r, labels)
        assert o.plan.cost() <= g.plan.cost()
        assert feasibility(phi, r, o.plan, labels)


def test_optimal_guard():
    r = TeamRun((), tuple((f"c{i}",) for i in range(14)))
    with pytest.raises(ValueError):
        find_optimal_sync(parse("true"), r, {}, max_l=12)


def test_weak_and_strong_agree_on_a_single_suffix_tuple():
    for r, phi, labels, _ in instances(13, 30):
        if r.k != r.l:
            continue
        base = {j: STRONG for j in range(1, r.k)}
        for extra in ({}, {j: WEAK for j in range(1, r.k)}):
            w = SyncPlan({**base, **extra, r.k: WEAK})
            s = SyncPlan({**base, **extra, r.k: STRONG})
            assert bool(feasibility(phi, r, w, labels)) == bool(feasibility(phi, r, s, labels))


def test_plan_json_and_validation():
    p = SyncPlan({12: WEAK, 8: STRONG})
    assert p.moments == [8, 12] and p.cost() == 3
    assert SyncPlan.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        SyncPlan({1: "medium"})
    with pytest.raises(ValueError):
        build_sync_automaton(TeamRun((), (("a",),)), SyncPlan({5: WEAK}))
