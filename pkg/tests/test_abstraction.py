import itertools
import random

import pytest

from corpus import random_graph, random_labels, team_of
from mrsync.abstraction import TeamSystem, build_robot_ts, product_team, team_for
from mrsync.env import adjacency, load_partition


def test_robot_ts_case_study(case_env):
    ts = build_robot_ts(case_env, None, "c7")
    assert len(ts.states) == 40 and ts.initial == "c7"
    assert all(q in ts.succ[q] for q in ts.states)
    assert ts.observe("c31") == {"pi1"}
    assert ts.observe("c7") == frozenset()
    adj = adjacency(case_env)
    for q in ts.states:
        assert set(ts.succ[q]) == set(adj[q]) | {q}


def test_one_cell_ts():
    p = load_partition({"cells": [{"id": "c1", "vertices": [[0, 0], [1, 0], [1, 1]]}]})
    ts = build_robot_ts(p, None, "c1")
    assert ts.succ == {"c1": ("c1",)}


def test_unknown_start(case_env):
    with pytest.raises(ValueError):
        build_robot_ts(case_env, None, "c99")


def test_team_weights_and_observations(case_env):
    team = team_for(case_env)
    assert team.initial == ("c7", "c4", "c28")
    assert team.num_states() == 40 ** 3
    assert TeamSystem.weight(("c7", "c4", "c28"), ("c2", "c3", "c28")) == 2
    assert TeamSystem.weight(("c7", "c4", "c28"), ("c7", "c4", "c28")) == 0
    assert team.observe(("c31", "c29", "c38")) == {"pi1", "pi4", "pi6"}
    assert team.observe(("c7", "c4", "c28")) == frozenset()
    assert team.is_transition(("c7", "c4", "c28"), ("c2", "c3", "c28"))
    assert not team.is_transition(("c7", "c4", "c28"), ("c31", "c4", "c28"))


def test_mismatched_domains(case_env):
    p = load_partition({"cells": [{"id": "c1", "vertices": [[0, 0], [1, 0], [1, 1]]}]})
    with pytest.raises(ValueError):
        product_team([build_robot_ts(case_env, None, "c1"), build_robot_ts(p, None, "c1")])


def test_lazy_product_matches_eager():
    rng = random.Random(0)
    for _ in range(10):
        adj = random_graph(rng, rng.randint(2, 6))
        obs = random_labels(rng, sorted(adj))
        cells = sorted(adj)
        team = team_of(adj, obs, [rng.choice(cells), rng.choice(cells)])
        a, b = team.systems
        for q in itertools.product(cells, cells):
            eager = {(x, y) for x in a.succ[q[0]] for y in b.succ[q[1]]}
            assert set(team.successors(q)) == eager
            for t in eager:
                assert team.weight(q, t) == sum(u != v for u, v in zip(q, t))
            assert team.observe(q) == {o for o in (obs[q[0]], obs[q[1]]) if o is not None}


def test_dot_export(case_env):
    text = build_robot_ts(case_env, None, "c7").to_dot()
    assert text.startswith("graph T") and 'xlabel="pi1"' in text
