"""Minimum-movement prefix-suffix team runs satisfying an LTL formula."""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .abstraction import TeamSystem
from .buchi import Buchi, degeneralize, explore
from .ltl import LassoWord


class Unsatisfiable(Exception):
    """No run of the team satisfies the formula."""


Tuple = tuple  # one cell per robot


@dataclass(frozen=True)
class TeamRun:
    """``prefix suffix suffix ...``.  Positions are 1-based: the prefix covers
    1..k-1, the suffix k..l, and index l+1 wraps to k."""
    prefix: tuple
    suffix: tuple

    def __post_init__(self):
        if not self.suffix:
            raise ValueError("suffix must be non-empty")
        object.__setattr__(self, "prefix", tuple(tuple(t) for t in self.prefix))
        object.__setattr__(self, "suffix", tuple(tuple(t) for t in self.suffix))
        sizes = {len(t) for t in self.prefix + self.suffix}
        if len(sizes) != 1:
            raise ValueError("all tuples must have the same number of robots")

    @property
    def n(self) -> int:
        return len(self.suffix[0])

    @property
    def k(self) -> int:
        return len(self.prefix) + 1

    @property
    def l(self) -> int:
        return len(self.prefix) + len(self.suffix)

    def wrap(self, j: int) -> int:
        """Map any index ≥ 1 into 1..l."""
        if j <= self.l:
            return j
        return self.k + (j - self.k) % (self.l - self.k + 1)

    def at(self, j: int) -> tuple:
        j = self.wrap(j)
        return self.prefix[j - 1] if j < self.k else self.suffix[j - self.k]

    def tuples(self) -> list:
        return list(self.prefix + self.suffix)

    def word(self, observe) -> LassoWord:
        """Letters ``observe(R(j))``; repeated letters are kept."""
        return LassoWord(tuple(observe(t) for t in self.prefix), tuple(observe(t) for t in self.suffix))

    def cost(self) -> int:
        """Robot moves during the prefix and one pass of the suffix."""
        seq = self.tuples() + [self.suffix[0]]
        return sum(TeamSystem.weight(a, b) for a, b in zip(seq, seq[1:]))

    def check(self, team: TeamSystem | None = None) -> None:
        seq = self.tuples() + [self.suffix[0]]
        for j, (a, b) in enumerate(zip(seq, seq[1:]), start=1):
            if a == b and not (len(self.suffix) == 1 and j == self.l):
                raise ValueError(f"repeated tuple at index {j}")
            if team is not None and not team.is_transition(a, b):
                raise ValueError(f"no team transition from index {j}")

    def to_json(self) -> dict:
        return {"prefix": [list(t) for t in self.prefix], "suffix": [list(t) for t in self.suffix]}

    @classmethod
    def from_json(cls, doc) -> "TeamRun":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        return cls(tuple(map(tuple, doc.get("prefix", []))), tuple(map(tuple, doc["suffix"])))


def collapse_run(prefix: Sequence, suffix: Sequence) -> TeamRun:
    """Drop finite repetitions of a tuple (the cyclic suffix included)."""
    suf = [tuple(t) for i, t in enumerate(suffix) if i == 0 or tuple(t) != tuple(suffix[i - 1])]
    while len(suf) > 1 and suf[-1] == suf[0]:
        suf.pop()
    pre = [tuple(t) for i, t in enumerate(prefix) if i == 0 or tuple(t) != tuple(prefix[i - 1])]
    while pre and pre[-1] == suf[0]:
        pre.pop()
    return TeamRun(tuple(pre), tuple(suf))


def roll_back(r: TeamRun) -> TeamRun:
    """Move the loop entry backwards while the prefix ends with the tuple the
    suffix ends with.  The word is unchanged and each step saves the moves of
    one transition, since the stem's last edge now lies on the cycle."""
    pre, suf = list(r.prefix), list(r.suffix)
    while pre and len(suf) > 1 and pre[-1] == suf[-1]:
        pre.pop()
        suf.insert(0, suf.pop())
    return TeamRun(tuple(pre), tuple(suf))


def _product_succ(team: TeamSystem, b: Buchi):
    memo: dict = {}
    weighted: dict = {}

    def succ(v):
        out = memo.get(v)
        if out is not None:
            return out
        t, s = v
        letter = team.observe(t)
        nb = [s2 for g, s2 in b.edges.get(s, ()) if g.matches(letter)]
        out = []
        if nb:
            moves = weighted.get(t)
            if moves is None:
                moves = weighted[t] = [(t2, TeamSystem.weight(t, t2)) for t2 in team.successors(t)]
            out = [((t2, s2), c) for t2, c in moves for s2 in nb]
        memo[v] = out
        return out
    return succ


def search_run(team: TeamSystem, b: Buchi) -> TeamRun:
    """Accepting lasso of the team/automaton product with the fewest moves in
    prefix plus one suffix pass.  Ties go to shorter prefixes, then shorter
    suffixes, then discovery order."""
    b = degeneralize(b)
    acc = b.acceptance[0]
    succ = _product_succ(team, b)
    # a product cycle through (t, s) never leaves the automaton SCC of s
    comp = _components(b)
    starts = [(team.initial, s) for s in b.initial]

    # prefix search in (cost, hops) order; accepting states are handled as popped
    dist: dict = {}
    parent: dict = {}
    heap = []
    tick = 0
    for v in starts:
        heapq.heappush(heap, (0, 0, tick, v, None))
        tick += 1
    best = None  # (total, pre_hops, cyc_hops, order, v, cycle)
    order = 0
    while heap:
        d, h, _, v, par = heapq.heappop(heap)
        if v in dist:
            continue
        if best is not None and d > best[0]:
            break
        dist[v] = (d, h)
        parent[v] = par
        order += 1
        if v[1] in acc and comp[v[1]]:
            bound = None if best is None else best[0] - d
            cyc = _shortest_cycle(succ, v, bound, comp[v[1]])
            if cyc is not None:
                key = (d + cyc[0], h, cyc[1], order)
                if best is None or key < best[:4]:
                    best = key + (v, cyc[2])
        for w, c in succ(v):
            if w not in dist:
                heapq.heappush(heap, (d + c, h + 1, tick, w, v))
                tick += 1
    if best is None:
        raise Unsatisfiable("no accepting run of the team satisfies the formula")
    v, cycle = best[4], best[5]
    stem = []
    u = parent[v]
    while u is not None:
        stem.append(u)
        u = parent[u]
    stem.reverse()
    return roll_back(collapse_run([x[0] for x in stem], [x[0] for x in cycle]))


def _components(b: Buchi) -> dict:
    """Automaton state -> its strongly connected component, empty when the
    state lies on no cycle."""
    fwd = {q: set(explore([q], b.successors)) for q in b.states}
    out = {}
    for q in b.states:
        comp = frozenset(u for u in fwd[q] if q in fwd[u])
        on_cycle = any(t in comp for t in b.successors(q))
        out[q] = comp if on_cycle else frozenset()
    return out


def _shortest_cycle(succ, v, bound, within=None):
    """Cheapest cycle ``[v, ..., u]`` with an edge u -> v, as (cost, hops, states).
    ``within`` restricts the automaton component of the visited states."""
    dist = {}
    parent = {}
    heap = []
    tick = 0
    for w, c in succ(v):
        if within is None or w[1] in within:
            heapq.heappush(heap, (c, 1, tick, w, v))
            tick += 1
    while heap:
        d, h, _, u, par = heapq.heappop(heap)
        if bound is not None and d > bound:
            return None
        if u in dist:
            continue
        dist[u] = d
        parent[u] = par
        if u == v:
            path = []
            x = par
            while x != v:
                path.append(x)
                x = parent[x]
            path.append(v)
            return d, h, path[::-1]
        for w, c in succ(u):
            if w not in dist and (within is None or w[1] in within):
                heapq.heappush(heap, (d + c, h + 1, tick, w, u))
                tick += 1
    return None
