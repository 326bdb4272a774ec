"""Discrete-event execution of robot strategies, trace verification and a
brute-force explorer of asynchronous team behaviour."""
from __future__ import annotations

import heapq
import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .buchi import accepts_lasso, translate
from .ltl import Formula, LassoWord, eval_lasso
from .planner import TeamRun
from .strategy import (AWAITING_STRONG, AWAITING_WEAK, DWELLING, STOPPED, TRAVELING, RobotStrategy,
                       compile_strategies)
from .syncreduce import STRONG, WEAK, SyncPlan, _labeler, _segments, beta_at, project_runs


class SimulationError(RuntimeError):
    pass


class Deadlock(SimulationError):
    def __init__(self, waiting: dict):
        super().__init__(f"deadlock; waiting robots and tags: {waiting}")
        self.waiting = waiting


class HorizonExhausted(SimulationError):
    pass


class NoLasso(SimulationError):
    pass


# --------------------------------------------------------------------------
# timing sources

class RandomTiming:
    """Uniform traversal durations on a 10^-6 grid, one stream per robot."""
    exact = False

    def __init__(self, seed: int = 0, low: float = 0.5, high: float = 1.5):
        if not 0 < low <= high:
            raise ValueError("durations must be positive")
        self.seed = seed
        self.lo, self.hi = round(low * 10**6), round(high * 10**6)
        self._rngs: dict = {}

    def next(self, robot: int) -> Fraction:
        rng = self._rngs.get(robot)
        if rng is None:
            rng = self._rngs[robot] = random.Random(f"{self.seed}:{robot}")
        return Fraction(rng.randint(self.lo, self.hi), 10**6)

    def position(self, robot: int):
        return None


class ScheduleTiming:
    """Pinned durations: per robot an initial list followed by a cyclic list."""
    exact = True

    def __init__(self, schedule: Mapping[int, tuple[Sequence, Sequence]]):
        self.schedule = {r: ([Fraction(x) for x in a], [Fraction(x) for x in b]) for r, (a, b) in schedule.items()}
        for init, cyc in self.schedule.values():
            if any(x <= 0 for x in init + cyc):
                raise ValueError("durations must be positive")
        self.used: dict = {}

    def next(self, robot: int) -> Fraction:
        init, cyc = self.schedule.get(robot, ([], []))
        u = self.used.get(robot, 0)
        self.used[robot] = u + 1
        if u < len(init):
            return init[u]
        if not cyc:
            raise SimulationError(f"schedule for robot {robot} ran out")
        return cyc[(u - len(init)) % len(cyc)]

    def position(self, robot: int):
        init, cyc = self.schedule.get(robot, ([], []))
        u = self.used.get(robot, 0)
        if u < len(init):
            return ("init", u)
        return ("cyc", (u - len(init)) % len(cyc)) if cyc else ("end",)

    @classmethod
    def from_json(cls, doc) -> "ScheduleTiming":
        return cls({int(r): (v.get("initial", []), v.get("cyclic", [])) for r, v in doc.items()})

    def to_json(self) -> dict:
        return {str(r): {"initial": [str(x) for x in a], "cyclic": [str(x) for x in b]}
                for r, (a, b) in sorted(self.schedule.items())}


# --------------------------------------------------------------------------
# traces

@dataclass
class TraceEvent:
    t: Fraction
    robot: int
    kind: str
    cell: str
    tag: tuple | None = None

    def to_json(self) -> dict:
        return {"t": str(self.t), "robot": self.robot, "kind": self.kind, "cell": self.cell,
                "tag": None if self.tag is None else list(self.tag)}


@dataclass
class ExecutionTrace:
    events: list
    configs: list          # cell tuple after each configuration change, starting with the initial one
    times: list            # instant of each configuration
    letters: list          # observation of each configuration
    lasso: tuple | None    # (stem length, cycle length) over configs

    def word(self) -> LassoWord:
        if self.lasso is None:
            raise NoLasso("trace has no detected lasso")
        a, c = self.lasso
        return LassoWord(tuple(self.letters[:a]), tuple(self.letters[a:a + c]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in self.events)

    def summary(self, phi: Formula | None = None) -> dict:
        d = {"lasso_found": self.lasso is not None}
        if self.lasso is not None:
            w = self.word().collapsed()
            d["word_stem"] = [sorted(a) for a in w.stem]
            d["word_cycle"] = [sorted(a) for a in w.cycle]
            if phi is not None:
                d["verdict"] = verify_trace(self, phi)
        return d


# --------------------------------------------------------------------------
# simulation

_KIND_ORDER = {"arrived": 0, "ready": 1}


def event_budget(strategies: Sequence[RobotStrategy], iterations: int) -> int:
    """Generous event count for the prefix plus ``iterations`` suffix passes."""
    n = len(strategies)
    per_pass = sum(s.run.l for s in strategies) + 2 * n * n * max(1, max(len(s.queue) for s in strategies))
    return (iterations + 1) * per_pass + 100


def simulate(strategies: Sequence[RobotStrategy], labels=None, timing=None, horizon: int = 20,
             delay: Fraction | int = 0) -> ExecutionTrace:
    """Run all strategies until the joint state repeats.

    ``horizon`` is the number of suffix iterations to allow before giving up;
    ``delay`` is the message delivery latency."""
    if horizon < 1:
        raise ValueError("horizon must cover at least one suffix iteration")
    lab = _labeler(labels)
    timing = timing if timing is not None else RandomTiming(0)
    delay = Fraction(delay)
    if delay < 0:
        raise ValueError("delay must be non-negative")
    budget = event_budget(strategies, horizon)
    strat = {s.robot: s for s in strategies}
    heap: list = []
    seq = itertools.count()
    now = Fraction(0)
    events: list[TraceEvent] = []
    pending_arrival: dict = {}

    def schedule(t, robot, kind, payload=None):
        heapq.heappush(heap, (t, robot, _KIND_ORDER[kind], next(seq), kind, payload))

    def perform(robot, actions):
        for act in actions:
            k = act[0]
            if k == "move":
                d = timing.next(robot)
                pending_arrival[robot] = now + d
                schedule(now + d, robot, "arrived")
            elif k == "cross":
                events.append(TraceEvent(now, robot, "cross", act[2]))
            elif k == "broadcast":
                events.append(TraceEvent(now, robot, "broadcast", strat[robot].cell, act[1]))
                for other in strat:
                    if other != robot:
                        schedule(now + delay, other, "ready", (robot, act[1]))
            elif k == "stop":
                events.append(TraceEvent(now, robot, "stop", act[1]))
            elif k == "dwell":
                pass

    def config():
        return tuple(strat[r].cell for r in sorted(strat))

    configs = [config()]
    times = [now]
    letters = [frozenset().union(*(lab(c) for c in configs[0]))]
    for r in sorted(strat):
        strat[r], acts = strat[r].step(("start",))
        perform(r, acts)

    seen: dict = {}
    lasso = None
    processed = 0
    while True:
        key = _joint_key(strat, heap, now, timing, pending_arrival)
        if key in seen:
            m1 = seen[key]
            m2 = len(configs)
            lasso = (m1, m2 - m1) if m2 > m1 else (m1 - 1, 1)
            break
        seen[key] = len(configs)
        if not heap:
            waiting = {r: s.waiting for r, s in strat.items() if s.waiting is not None}
            if waiting:
                raise Deadlock(waiting)
            lasso = (len(configs) - 1, 1)
            break
        now = heap[0][0]
        while heap and heap[0][0] == now:
            t, robot, _, _, kind, payload = heapq.heappop(heap)
            processed += 1
            if kind == "arrived":
                pending_arrival.pop(robot, None)
                strat[robot], acts = strat[robot].step(("arrived",))
            else:
                strat[robot], acts = strat[robot].step(("ready", payload[0], payload[1]))
            perform(robot, acts)
        c = config()
        if c != configs[-1]:
            configs.append(c)
            times.append(now)
            letters.append(frozenset().union(*(lab(x) for x in c)))
        if processed > budget:
            raise HorizonExhausted(f"no repeated joint state within {horizon} suffix iterations")
    return ExecutionTrace(events, configs, times, letters, lasso)


def _joint_key(strat: dict, heap: list, now: Fraction, timing, pending_arrival: dict):
    """Discrete joint state.  Suffix rounds are taken relative to the lowest
    round in play; pending events enter by their order (and, for pinned
    schedules, by their exact offsets)."""
    live = {e.tag for s in strat.values() for e in s.queue}
    rounds = [rd for s in strat.values() for s0, rd in s.rounds if s0 in live]
    rounds += [t[0][2] for s in strat.values() for t in s.received]
    rounds += [p[1][2] for *_, kind, p in heap if kind == "ready"]
    base = min(rounds) if rounds else 0

    def norm_tag(tag):
        return None if tag is None else (tag[0], tag[1], tag[2] - base)

    robots = tuple(
        (s.j, s.mode, s.remaining, tuple(e.tag for e in s.queue), norm_tag(s.waiting),
         tuple(sorted((s0, rd - base) for s0, rd in s.rounds if s0 in live)),
         tuple(sorted((norm_tag(t), r) for t, r in s.received)))
        for _, s in sorted(strat.items()))
    times = sorted({t for t, *_ in heap})
    rank = {t: i for i, t in enumerate(times)}
    pend = tuple(sorted(
        (rank[t] if not timing.exact else t - now, robot, kind,
         None if payload is None else (payload[0], norm_tag(payload[1])))
        for t, robot, _, _, kind, payload in heap))
    sched = tuple(timing.position(r) for r in sorted(strat)) if timing.exact else ()
    return robots, pend, sched


def verify_trace(trace: ExecutionTrace, phi: Formula) -> bool:
    """Truth of φ on the trace's lasso word, cross-checked by automaton membership."""
    w = trace.word().collapsed()
    verdict = eval_lasso(phi, w)
    if accepts_lasso(translate(phi), w) != verdict:
        raise AssertionError("automaton and direct semantics disagree on a trace word")
    return verdict


def witness_schedule(stem: Sequence[tuple], cycle: Sequence[tuple]) -> ScheduleTiming:
    """Durations that make the robots replay a lasso of index tuples: step m
    of the lasso happens at time m."""
    seq = list(stem) + list(cycle)
    n = len(seq[0])
    s0 = len(stem)
    L = len(cycle)
    sched = {}
    for i in range(n):
        moves = [m for m in range(1, len(seq) + 1) if (seq[m] if m < len(seq) else cycle[0])[i] != seq[m - 1][i]]
        cyc_moves = [m for m in moves if m > s0]
        init_moves = [m for m in moves if m <= s0]
        if not cyc_moves:
            sched[i + 1] = ([Fraction(b - a) for a, b in zip([0] + init_moves, init_moves)], [])
            continue
        first = cyc_moves[0]
        init = [Fraction(b - a) for a, b in zip([0] + init_moves, init_moves + [first])]
        cyc = [Fraction(b - a) for a, b in zip(cyc_moves, cyc_moves[1:] + [first + L])]
        sched[i + 1] = (init, cyc)
    return ScheduleTiming(sched)


# --------------------------------------------------------------------------
# brute-force exploration of the asynchronous semantics

@dataclass
class Interleavings:
    reachable: set
    lassos: list  # (stem, cycle) lists of index tuples


def enumerate_interleavings(r: TeamRun, plan: SyncPlan, bound: int = 8, guard: int = 10**4) -> Interleavings:
    """Explore runs where each step advances a non-empty set of robots along
    their own runs, with explicit memory of which synchronization the team is
    heading for.  Returns the reachable index tuples and every lasso whose
    stem plus cycle spans at most ``bound`` robot moves (cycles may revisit
    states), stutter-collapsed and deduplicated."""
    runs, betas = project_runs(r)
    size = 1
    for run in runs:
        size *= run.l
    if size > guard:
        raise ValueError(f"{size} index tuples exceed the guard {guard}")
    segs = _segments(r, plan)
    suffix = [s for s in plan.moments if s >= r.k]
    n = len(runs)
    # segment index to return to after the wrap segment
    loop_to = len(plan.types) - len(suffix) + 1 if suffix else None

    def paths(m):
        a, b, _ = segs[m]
        if b is None:
            return None
        out = []
        for beta in betas:
            p = []
            for j in range(a, b + 1):
                x = beta_at(beta, r, j)
                if not p or p[-1] != x:
                    p.append(x)
            out.append(p)
        return out

    P = [paths(m) for m in range(len(segs))]

    def succ(state):
        m, pos = state
        out = []
        if P[m] is None:
            # free motion: pos holds the current indices
            movers = [i for i in range(n) if runs[i].next(pos[i]) != pos[i]]
            for k in range(1, len(movers) + 1):
                for sub in itertools.combinations(movers, k):
                    q = list(pos)
                    for i in sub:
                        q[i] = runs[i].next(q[i])
                    out.append((m, tuple(q)))
            if not movers:
                out.append(state)
            return out
        paths_m = P[m]
        movers = [i for i in range(n) if pos[i] < len(paths_m[i]) - 1]
        if movers:
            for k in range(1, len(movers) + 1):
                for sub in itertools.combinations(movers, k):
                    q = list(pos)
                    for i in sub:
                        q[i] += 1
                    out.append((m, tuple(q)))
            return out
        # synchronization reached
        _, b, typ = segs[m]
        nm = m + 1 if m + 1 < len(segs) else loop_to
        # a weak hand-off keeps the index tuple and only switches memory
        return [(nm, _start(nm))]

    def _start(m):
        if P[m] is None:
            a = segs[m][0]
            return tuple(beta_at(beta, r, a) for beta in betas)
        return tuple(0 for _ in range(n))

    def index(state):
        m, pos = state
        if P[m] is None:
            return pos
        return tuple(P[m][i][pos[i]] for i in range(n))

    init = (0, _start(0))
    seen = {init}
    stack = [init]
    graph = {}
    while stack:
        v = stack.pop()
        out = succ(v)
        graph[v] = out
        for w in out:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    reach = {index(v) for v in seen}

    lassos = []

    def squash(seq):
        return [x for i, x in enumerate(seq) if i == 0 or x != seq[i - 1]]

    found = set()

    def dfs(path, steps):
        for w in graph[path[-1]]:
            for k in (i for i, v in enumerate(path) if v == w):
                stem, cyc = [index(v) for v in path[:k]], [index(v) for v in path[k:]]
                cyc = squash(cyc)
                if len(cyc) > 1 and cyc[-1] == cyc[0]:
                    cyc.pop()
                stem = squash(stem)
                if stem and stem[-1] == cyc[0]:
                    stem.pop()
                key = (tuple(stem), tuple(cyc))
                if key not in found:
                    found.add(key)
                    lassos.append((stem, cyc))
            moved = index(w) != index(path[-1])
            if steps + moved < bound and (moved or w not in path):
                path.append(w)
                dfs(path, steps + moved)
                path.pop()

    dfs([init], 0)
    return Interleavings(reach, lassos)
