"""Seeded random instances shared by the test modules."""
from __future__ import annotations

import itertools
import random

from mrsync.abstraction import TransitionSystem, product_team
from mrsync.buchi import translate
from mrsync.ltl import (FALSE, TRUE, And, Always, Eventually, LassoWord, Not, Or, Prop, Release, Until,
                        eval_lasso)
from mrsync.planner import TeamRun, Unsatisfiable, search_run

PROPS = ("p", "q", "r")


def random_formula(rng: random.Random, props=PROPS, max_nodes: int = 12):
    """Random formula with at most ``max_nodes`` syntax nodes."""
    def build(budget):
        if budget <= 1 or rng.random() < 0.25:
            x = rng.random()
            if x < 0.06:
                return rng.choice((TRUE, FALSE)), 1
            return Prop(rng.choice(props)), 1
        ops = ("not", "F", "G") if budget < 3 else ("not", "and", "or", "U", "R", "F", "G", "F", "G")
        op = rng.choice(ops)
        if op in ("not", "F", "G"):
            sub, used = build(budget - 1)
            return {"not": Not, "F": Eventually, "G": Always}[op](sub), used + 1
        left, u1 = build(max(1, (budget - 1) // 2))
        right, u2 = build(max(1, budget - 1 - u1))
        cls = {"and": And, "or": Or, "U": Until, "R": Release}[op]
        return cls(left, right), u1 + u2 + 1

    f, _ = build(rng.randint(1, max_nodes))
    return f


def random_letter(rng, props=PROPS):
    return frozenset(p for p in props if rng.random() < 0.4)


def random_word(rng, props=PROPS, max_stem: int = 8, max_cycle: int = 8) -> LassoWord:
    stem = tuple(random_letter(rng, props) for _ in range(rng.randint(0, max_stem)))
    cycle = tuple(random_letter(rng, props) for _ in range(rng.randint(1, max_cycle)))
    return LassoWord(stem, cycle)


def random_graph(rng, n: int) -> dict:
    """Connected undirected graph on cells c1..cn, as a neighbour map."""
    cells = [f"c{i}" for i in range(1, n + 1)]
    adj = {c: set() for c in cells}
    for i in range(1, n):
        j = rng.randrange(i)
        adj[cells[i]].add(cells[j])
        adj[cells[j]].add(cells[i])
    for a, b in itertools.combinations(cells, 2):
        if rng.random() < 0.2:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def random_labels(rng, cells, props=PROPS) -> dict:
    """Each cell lies in at most one region; every proposition is used."""
    obs = {c: None for c in cells}
    free = list(cells)
    rng.shuffle(free)
    for p in props:
        if free:
            obs[free.pop()] = p
    for c in free:
        if rng.random() < 0.3:
            obs[c] = rng.choice(props)
    return obs


def team_of(adj: dict, obs: dict, starts) -> object:
    cells = sorted(adj, key=lambda c: int(c[1:]))
    props = frozenset(v for v in obs.values() if v is not None)
    systems = []
    for s in starts:
        succ = {c: tuple([c] + sorted(adj[c], key=lambda x: int(x[1:]))) for c in cells}
        systems.append(TransitionSystem(tuple(cells), s, succ, props, dict(obs)))
    return product_team(systems)


TEMPLATES = (
    "G F p && G F q",
    "F (p && F q)",
    "G F (p && F (q && F r))",
    "(!q U p) && F q",
    "G !r && G F (p && F q)",
    "F G (p || q)",
    "F p && F q && F r",
    "G (p -> F q) && G F p",
    "(!r U (p && q)) && G F r",
    "G F (p && q) && G !(p && r)",
)


def random_instance(rng, robots=2, cells=(4, 7), formula=None):
    """(team run, formula, labels) for a satisfiable random planning problem,
    or None when the drawn problem is unsatisfiable."""
    from mrsync.ltl import parse

    n = rng.randint(*cells)
    adj = random_graph(rng, n)
    obs = random_labels(rng, sorted(adj))
    k = rng.choice(robots) if isinstance(robots, tuple) else robots
    free = [c for c in sorted(adj) if obs[c] is None] or sorted(adj)
    starts = [rng.choice(free) for _ in range(k)]
    team = team_of(adj, obs, starts)
    phi = formula if formula is not None else parse(rng.choice(TEMPLATES))
    try:
        r = search_run(team, translate(phi))
    except Unsatisfiable:
        return None
    labels = {c: (frozenset() if o is None else frozenset([o])) for c, o in obs.items()}
    return r, phi, labels, team


def instances(seed: int, count: int, **kw):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        x = random_instance(rng, **kw)
        if x is not None:
            out.append(x)
    return out
