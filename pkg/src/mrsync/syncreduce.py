"""Synchronization reduction.

A team run R is projected to per-robot runs.  A synchronization plan (S, τ)
names positions of R where the robots must meet: weakly (all robots occupy
R(s) at some instant) or strongly (they also leave R(s) for R(s+1) together).
The sync automaton generates every team behaviour compatible with a plan, and
a plan is feasible when no such behaviour violates the formula.
"""
from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .buchi import Buchi, Lasso, Product, explore, is_empty, observed, translate
from .ltl import Formula, LassoWord, Not
from .planner import TeamRun

WEAK, STRONG = "weak", "strong"


# --------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class SyncPlan:
    types: Mapping[int, str] = field(default_factory=dict)  # moment -> weak|strong

    def __post_init__(self):
        t = {int(k): v for k, v in dict(self.types).items()}
        for k, v in t.items():
            if v not in (WEAK, STRONG):
                raise ValueError(f"bad synchronization type {v!r} at {k}")
            if k < 1:
                raise ValueError(f"moment {k} out of range")
        object.__setattr__(self, "types", dict(sorted(t.items())))

    @property
    def moments(self) -> list[int]:
        return list(self.types)

    def __len__(self):
        return len(self.types)

    def __hash__(self):
        return hash(tuple(self.types.items()))

    def __eq__(self, other):
        return isinstance(other, SyncPlan) and self.types == other.types

    def cost(self) -> int:
        return sum(1 if t == WEAK else 2 for t in self.types.values())

    @classmethod
    def full_strong(cls, r: TeamRun) -> "SyncPlan":
        return cls({j: STRONG for j in range(1, r.l + 1)})

    def to_json(self) -> dict:
        return {"moments": [{"index": k, "type": v} for k, v in self.types.items()]}

    @classmethod
    def from_json(cls, doc) -> "SyncPlan":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        return cls({m["index"]: m["type"] for m in doc.get("moments", [])})

    def __str__(self):
        return "{" + ", ".join(f"{k}:{v}" for k, v in self.types.items()) + "}"


# --------------------------------------------------------------------------
# projection

@dataclass(frozen=True)
class IndividualRun:
    robot: int
    states: tuple   # cells, index 1 is states[0]
    k: int
    l: int

    def cell(self, j: int) -> str:
        return self.states[j - 1]

    def next(self, j: int) -> int:
        return self.k if j == self.l else j + 1

    @property
    def stationary(self) -> bool:
        return self.k == self.l

    def __str__(self):
        pre = " ".join(self.states[: self.k - 1])
        suf = " ".join(self.states[self.k - 1:])
        return f"{pre} [{suf}]".strip()


def project_runs(r: TeamRun) -> tuple[list[IndividualRun], list[tuple[int, ...]]]:
    """Per-robot runs with finite repetitions removed, and index maps
    ``beta[i][j-1]`` from team positions to individual positions.

    A robot whose suffix ends in the cell it starts with has the two blocks
    merged, so its index map steps from l_i back to k_i inside the suffix."""
    runs, betas = [], []
    k, l = r.k, r.l
    for i in range(r.n):
        comp = [t[i] for t in r.tuples()]
        # suffix blocks
        suf = comp[k - 1:]
        block_of = []  # block number for each suffix position
        blocks = []
        for c in suf:
            if not blocks or blocks[-1] != c:
                blocks.append(c)
            block_of.append(len(blocks) - 1)
        if len(blocks) > 1 and blocks[-1] == blocks[0]:
            last = len(blocks) - 1
            blocks.pop()
            block_of = [0 if b == last else b for b in block_of]
        # prefix blocks, dropping a trailing block that continues into the suffix
        pre = comp[: k - 1]
        pblocks, pblock_of = [], []
        for c in pre:
            if not pblocks or pblocks[-1] != c:
                pblocks.append(c)
            pblock_of.append(len(pblocks) - 1)
        ki = len(pblocks) + 1
        if pblocks and pblocks[-1] == blocks[0]:
            merged = len(pblocks) - 1
            pblocks.pop()
            ki -= 1
            pblock_of = [ki - 1 if b == merged else b for b in pblock_of]
        beta = [b + 1 for b in pblock_of] + [ki + b for b in block_of]
        runs.append(IndividualRun(i + 1, tuple(pblocks + blocks), ki, ki + len(blocks) - 1))
        betas.append(tuple(beta))
    return runs, betas


def beta_at(beta: Sequence[int], r: TeamRun, j: int) -> int:
    return beta[r.wrap(j) - 1]


# --------------------------------------------------------------------------
# sync automaton

@dataclass
class SyncAutomaton:
    run: TeamRun
    plan: SyncPlan
    runs: list
    betas: list
    states: list
    succ: dict          # index tuple -> list of index tuples
    acceptance: list    # list of frozensets of index tuples
    obs: dict

    @property
    def initial(self) -> tuple:
        return tuple(1 for _ in self.runs)

    def reachable(self) -> list:
        return list(explore([self.initial], lambda q: self.succ.get(q, ())))

    def cells(self, q: tuple) -> tuple:
        return tuple(run.cell(j) for run, j in zip(self.runs, q))

    def beta_tuple(self, s: int) -> tuple:
        return tuple(beta_at(b, self.run, s) for b in self.betas)

    def to_buchi(self, extra_acceptance: Iterable = ()) -> Buchi:
        reach = self.reachable()
        keep = set(reach)
        acc = [frozenset(a & keep) for a in self.acceptance] + [frozenset(a & keep) for a in extra_acceptance]
        return observed(reach, [self.initial], {q: self.succ.get(q, ()) for q in reach}, acc,
                        {q: self.obs[q] for q in reach})

    def fairness_sets(self) -> list[frozenset]:
        """Sets forcing every robot with a non-trivial suffix to keep moving."""
        out = []
        for i, run in enumerate(self.runs):
            if run.stationary:
                continue
            for j in (run.k, run.k + 1):
                out.append(frozenset(q for q in self.states if q[i] == j))
        return out

    def to_dot(self) -> str:
        b = observed(self.states, [self.initial], self.succ, self.acceptance, self.obs)
        reach = set(self.reachable())
        return b.to_dot("A", gray=[q for q in self.states if q not in reach])


def _segments(r: TeamRun, plan: SyncPlan):
    """Stretches of unsynchronized motion as (start, end, end type) over the
    unrolled index line; end is None for endless free motion."""
    L = r.l - r.k + 1
    segs = []
    a = 1
    for s, t in plan.types.items():
        segs.append((a, s, t))
        a = s if t == WEAK else s + 1
    suffix = [s for s in plan.moments if s >= r.k]
    if suffix:
        s0 = suffix[0]
        segs.append((a, s0 + L, plan.types[s0]))
    else:
        segs.append((a, None, None))
    return segs


def _phase_transitions(r: TeamRun, plan: SyncPlan, runs, betas) -> dict:
    succ: dict = {}

    def add(q, q2):
        succ.setdefault(q, set()).add(q2)

    n = len(runs)
    for a, b, typ in _segments(r, plan):
        if b is None:
            # free motion: every index from the start onwards, with wrap
            reach = []
            for run, beta in zip(runs, betas):
                j0 = beta_at(beta, r, a)
                idx = set(range(j0, run.l + 1)) | set(range(run.k, run.l + 1))
                reach.append(sorted(idx))
            for q in itertools.product(*reach):
                movers = [i for i in range(n) if runs[i].next(q[i]) != q[i]]
                for m in range(1, len(movers) + 1):
                    for sub in itertools.combinations(movers, m):
                        q2 = list(q)
                        for i in sub:
                            q2[i] = runs[i].next(q[i])
                        add(q, tuple(q2))
            continue
        paths = []
        for beta in betas:
            p = []
            for j in range(a, b + 1):
                x = beta_at(beta, r, j)
                if not p or p[-1] != x:
                    p.append(x)
            paths.append(p)
        for pos in itertools.product(*(range(len(p)) for p in paths)):
            q = tuple(p[x] for p, x in zip(paths, pos))
            movers = [i for i in range(n) if pos[i] < len(paths[i]) - 1]
            if not movers:
                if typ == STRONG:
                    add(q, tuple(beta_at(beta, r, b + 1) for beta in betas))
                continue
            for m in range(1, len(movers) + 1):
                for sub in itertools.combinations(movers, m):
                    q2 = list(q)
                    for i in sub:
                        q2[i] = paths[i][pos[i] + 1]
                    add(q, tuple(q2))
    return succ


def _literal_transitions(r: TeamRun, plan: SyncPlan, runs, betas, states) -> dict:
    """Transition rules applied to the index tuple alone, without knowing
    which synchronization the team is heading for."""
    n = len(runs)
    targets = [(s, t, tuple(beta_at(b, r, s) for b in betas), tuple(beta_at(b, r, s + 1) for b in betas))
               for s, t in plan.types.items()]
    succ: dict = {}
    for q in states:
        forced = None
        frozen = set()
        for s, t, bs, bs1 in targets:
            inside = {i for i in range(n) if q[i] == bs[i]}
            if not inside:
                continue
            if len(inside) < n:
                frozen |= inside
            elif t == STRONG:
                forced = bs1
        if forced is not None:
            if forced != q:
                succ[q] = {forced}
            continue
        movers = [i for i in range(n) if i not in frozen and runs[i].next(q[i]) != q[i]]
        out = set()
        for m in range(1, len(movers) + 1):
            for sub in itertools.combinations(movers, m):
                q2 = list(q)
                for i in sub:
                    q2[i] = runs[i].next(q[i])
                out.add(tuple(q2))
        if out:
            succ[q] = out
    return succ


def build_sync_automaton(r: TeamRun, plan: SyncPlan, labels: Callable[[str], frozenset] | Mapping | None = None,
                         literal: bool = False) -> SyncAutomaton:
    """Sync automaton over tuples of individual-run indices.

    By default a robot waits at a synchronization point only while the team
    is actually heading for that synchronization, which is what the run
    semantics requires.  ``literal`` applies the waiting rule whenever any
    robot sits at the index of any synchronization moment; this can block
    the team in states the plan never asks it to wait in."""
    if any(s > r.l for s in plan.moments):
        raise ValueError(f"synchronization moment beyond l={r.l}")
    lab = _labeler(labels)
    runs, betas = project_runs(r)
    states = list(itertools.product(*(range(1, run.l + 1) for run in runs)))
    if literal:
        raw = _literal_transitions(r, plan, runs, betas, states)
    else:
        raw = _phase_transitions(r, plan, runs, betas)
    terminal = tuple(run.l for run in runs) if all(run.stationary for run in runs) else None
    succ = {}
    for q in states:
        out = {t for t in raw.get(q, ()) if t != q}
        if q == terminal:
            out.add(q)
        if out:
            succ[q] = sorted(out)
    suffix = [s for s in plan.moments if s >= r.k]
    if not suffix:
        acc = [frozenset(q for q in states if all(run.k <= j for run, j in zip(runs, q)))]
    else:
        acc = [frozenset([tuple(beta_at(b, r, s) for b in betas)]) for s in suffix]
    obs = {q: frozenset().union(*(lab(run.cell(j)) for run, j in zip(runs, q))) for q in states}
    return SyncAutomaton(r, plan, runs, betas, states, succ, acc, obs)


def _labeler(labels) -> Callable[[str], frozenset]:
    if labels is None:
        return lambda c: frozenset()
    if callable(labels):
        return labels
    return lambda c: frozenset(labels.get(c, ()))


def labels_from_partition(p) -> dict:
    """Cell -> set of propositions holding there."""
    out = {}
    for c in p.cell_ids:
        reg = p.region_of(c)
        out[c] = frozenset() if reg is None else frozenset([reg])
    return out


# --------------------------------------------------------------------------
# feasibility

@dataclass
class Witness:
    """A behaviour allowed by the plan whose word violates the formula."""
    stem: list     # index tuples
    cycle: list
    word: LassoWord
    cells_stem: list
    cells_cycle: list

    def to_json(self) -> dict:
        return {
            "stem": [list(q) for q in self.stem], "cycle": [list(q) for q in self.cycle],
            "cells_stem": [list(c) for c in self.cells_stem], "cells_cycle": [list(c) for c in self.cells_cycle],
            "word_stem": [sorted(a) for a in self.word.stem], "word_cycle": [sorted(a) for a in self.word.cycle],
        }


@dataclass
class Feasibility:
    feasible: bool
    witness: Witness | None = None
    product_states: int = 0
    seconds: float = 0.0

    def __bool__(self):
        return self.feasible


@lru_cache(maxsize=64)
def negated_automaton(phi: Formula) -> Buchi:
    return translate(Not(phi))


def test_feasibility(phi: Formula, r: TeamRun, plan: SyncPlan, labels=None, paper_faithful: bool = False,
                     literal: bool = False, fair_witness: bool = False) -> Feasibility:
    """Feasible iff no behaviour of the sync automaton satisfies ¬φ.

    With ``fair_witness`` the counterexample, if any, is one where every robot
    with a cyclic suffix keeps moving, which is what real robots do; if no
    such behaviour exists the unrestricted counterexample is returned."""
    t0 = time.perf_counter()
    a = build_sync_automaton(r, plan, labels, literal=literal)
    neg = negated_automaton(phi)
    prod = Product(a.to_buchi(), neg, paper_faithful=paper_faithful)
    empty, lasso = is_empty(prod)
    if empty:
        return Feasibility(True, None, len(prod._succ), time.perf_counter() - t0)
    if fair_witness:
        fair = Product(a.to_buchi(a.fairness_sets()), neg)
        fe, fl = is_empty(fair)
        if not fe:
            lasso = fl
    wit = _witness(a, lasso)
    return Feasibility(False, wit, len(prod._succ), time.perf_counter() - t0)


def _witness(a: SyncAutomaton, lasso: Lasso) -> Witness:
    def proj(q):
        # strip degeneralization counters and the automaton component
        while isinstance(q, tuple) and len(q) == 2 and isinstance(q[0], tuple):
            q = q[0]
        return q
    stem = [proj(v) for v in lasso.stem]
    cycle = [proj(v) for v in lasso.cycle]
    word = LassoWord(tuple(a.obs[q] for q in stem), tuple(a.obs[q] for q in cycle))
    return Witness(stem, cycle, word, [a.cells(q) for q in stem], [a.cells(q) for q in cycle])


class FeasibilityOracle:
    """Memoized feasibility tests with call accounting."""

    def __init__(self, phi: Formula, r: TeamRun, labels=None, paper_faithful=False, literal=False,
                 memoize=True, per_call_log: list | None = None):
        self.phi, self.r, self.labels = phi, r, labels
        self.paper_faithful, self.literal, self.memoize = paper_faithful, literal, memoize
        self.cache: dict = {}
        self.calls = 0
        self.log = per_call_log if per_call_log is not None else []

    def __call__(self, plan: SyncPlan) -> bool:
        if self.memoize and plan in self.cache:
            return self.cache[plan]
        res = test_feasibility(self.phi, self.r, plan, self.labels, self.paper_faithful, self.literal)
        self.calls += 1
        self.log.append((plan, res.feasible, res.seconds))
        self.cache[plan] = res.feasible
        return res.feasible


@dataclass
class SearchResult:
    plan: SyncPlan
    calls: int
    log: list
    seconds: float


def find_sync_moments(phi: Formula, r: TeamRun, labels=None, paper_faithful: bool = False,
                      literal: bool = False, strict_pseudocode: bool = False) -> SearchResult:
    """Greedy reduction: scan moments from the end of the run towards the
    front, committing a moment once the plan made of the committed moments
    plus every later position is feasible.  Each scanned moment is tried weak,
    then strong, before moving to the previous one.

    ``strict_pseudocode`` decrements the moment after a failed weak trial, so
    the strong trial happens one position earlier; if that variant exhausts
    its loops the full strong plan is returned."""
    t0 = time.perf_counter()
    test = FeasibilityOracle(phi, r, labels, paper_faithful, literal, memoize=not strict_pseudocode)
    l = r.l
    for synch_type in (WEAK, STRONG):
        S: dict = {}
        lower, moment = 1, l
        while moment >= lower:
            if test(SyncPlan(S)):
                return SearchResult(SyncPlan(S), test.calls, test.log, time.perf_counter() - t0)
            committed = False
            for trial in (WEAK, STRONG):
                if strict_pseudocode and moment < lower:
                    break
                tau = {j: synch_type for j in range(moment + 1, l + 1)}
                tau.update(S)
                tau[moment] = trial
                if test(SyncPlan(tau)):
                    S[moment] = trial
                    lower, moment = moment, l
                    committed = True
                    break
                if strict_pseudocode:
                    moment -= 1
            if not committed and not strict_pseudocode:
                moment -= 1
    plan = SyncPlan.full_strong(r)
    return SearchResult(plan, test.calls, test.log, time.perf_counter() - t0)


def find_optimal_sync(phi: Formula, r: TeamRun, labels=None, cost: Callable[[SyncPlan], float] | None = None,
                      paper_faithful: bool = False, literal: bool = False, max_l: int = 12) -> SearchResult:
    """Cheapest feasible plan by enumerating all 3^l assignments in cost order.
    Equal costs are ordered by the sorted (index, type) list."""
    if r.l > max_l:
        raise ValueError(f"run length {r.l} exceeds the enumeration guard {max_l}")
    cost = cost or SyncPlan.cost
    t0 = time.perf_counter()
    test = FeasibilityOracle(phi, r, labels, paper_faithful, literal)
    plans = [SyncPlan({j: t for j, t in zip(range(1, r.l + 1), combo) if t is not None})
             for combo in itertools.product((None, WEAK, STRONG), repeat=r.l)]
    plans.sort(key=lambda p: (cost(p), list(p.types.items())))
    for p in plans:
        if test(p):
            return SearchResult(p, test.calls, test.log, time.perf_counter() - t0)
    raise AssertionError("full strong synchronization must be feasible for a satisfying run")
