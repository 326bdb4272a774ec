"""Per-robot control and communication strategies.

Each robot follows its own collapsed run and keeps a queue of the
synchronizations it takes part in.  At a queue head it dwells in its cell and
broadcasts readiness until every peer is ready; for a strong synchronization
it then drives to the border of its next cell, stops, broadcasts again and
crosses once everyone is at their border.  Robots that do not move at a
strong moment synchronize twice without leaving their cell.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from .planner import TeamRun
from .syncreduce import STRONG, WEAK, IndividualRun, SyncPlan, _segments, beta_at, project_runs

TRAVELING = "traveling"
DWELLING = "dwelling"
AWAITING_WEAK = "awaiting-weak"
AWAITING_STRONG = "awaiting-strong-at-border"
STOPPED = "stopped-at-border"


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class QueueEntry:
    tag: int             # synchronization index s along the team run
    moment: int          # β_i(s), index along the robot's own run
    type: str
    suffix: bool         # suffix entries rotate, prefix entries are consumed
    advance: bool        # for strong moments: the robot changes cell at s -> s+1
    steps_after: int | None  # own moves until the next entry (None: free motion)

    def to_json(self) -> dict:
        return {"tag": self.tag, "moment": self.moment, "type": self.type, "suffix": self.suffix,
                "advance": self.advance, "steps_after": self.steps_after}


def _path_steps(r: TeamRun, beta, a: int, b: int | None) -> int | None:
    if b is None:
        return None
    steps, prev = 0, None
    for j in range(a, b + 1):
        x = beta_at(beta, r, j)
        if prev is not None and x != prev:
            steps += 1
        prev = x
    return steps


def build_queues(r: TeamRun, plan: SyncPlan, betas: Sequence | None = None) -> tuple[list[list[QueueEntry]], list]:
    """Queue memories in ascending synchronization order, and the number of
    own moves each robot makes before its first queue entry."""
    if betas is None:
        _, betas = project_runs(r)
    segs = _segments(r, plan)
    queues, initial = [], []
    for beta in betas:
        q = []
        for m, (s, t) in enumerate(plan.types.items()):
            a, b, _ = segs[m + 1]
            q.append(QueueEntry(
                tag=s, moment=beta_at(beta, r, s), type=t, suffix=s >= r.k,
                advance=t == STRONG and beta_at(beta, r, s + 1) != beta_at(beta, r, s),
                steps_after=_path_steps(r, beta, a, b)))
        queues.append(q)
        a, b, _ = segs[0]
        initial.append(_path_steps(r, beta, a, b))
    return queues, initial


@dataclass(frozen=True)
class RobotStrategy:
    robot: int
    n: int
    run: IndividualRun
    queue: tuple                 # QueueEntry, head first
    initial_steps: int | None
    j: int = 1
    mode: str = DWELLING
    remaining: int | None = None  # own moves left before the head entry
    waiting: tuple | None = None  # tag awaited: (s, phase, round)
    rounds: tuple = ()            # ((s, completed count), ...)
    received: frozenset = frozenset()  # {(tag, robot)}
    started: bool = False

    @property
    def cell(self) -> str:
        return self.run.cell(self.j)

    def round_of(self, s: int) -> int:
        return dict(self.rounds).get(s, 0)

    def to_json(self, beta=None) -> dict:
        d = {
            "robot": self.robot,
            "run": list(self.run.states), "k": self.run.k, "l": self.run.l,
            "queue": [e.to_json() for e in self.queue],
            "initial_steps": self.initial_steps,
        }
        if beta is not None:
            d["beta"] = list(beta)
        return d

    # ------------------------------------------------------------------

    def step(self, event: tuple) -> tuple["RobotStrategy", list]:
        """Handle one local event and return the new state and the actions
        to perform: ("move", cell), ("cross", src, dst), ("broadcast", tag),
        ("stop", cell) and ("dwell", cell)."""
        if not isinstance(event, tuple) or not event:
            raise ProtocolError(f"malformed event {event!r}")
        kind = event[0]
        if kind == "start":
            if self.started:
                raise ProtocolError("robot started twice")
            st = replace(self, started=True, remaining=self.initial_steps)
            return st._decide([])
        if not self.started:
            raise ProtocolError(f"event {kind!r} before start")
        if kind == "tick":
            return self, []
        if kind == "arrived":
            return self._arrived()
        if kind == "ready":
            if len(event) != 3:
                raise ProtocolError(f"malformed event {event!r}")
            return self._ready(event[1], tuple(event[2]))
        raise ProtocolError(f"unknown event kind {kind!r}")

    def _decide(self, actions: list) -> tuple["RobotStrategy", list]:
        """Pick the next activity while standing inside a cell."""
        st = self
        if st.queue and st.remaining == 0:
            head = st.queue[0]
            if st.j != head.moment:
                raise ProtocolError(f"robot {st.robot} at index {st.j}, expected {head.moment}")
            tag = (head.tag, WEAK, st.round_of(head.tag))
            st = replace(st, mode=AWAITING_WEAK, waiting=tag)
            actions.append(("broadcast", tag))
            actions.append(("dwell", st.cell))
            return st._check_complete(actions)
        if st.remaining is None and st.run.stationary and st.j == st.run.l:
            actions.append(("dwell", st.cell))
            return replace(st, mode=DWELLING, waiting=None), actions
        if st.remaining is not None and st.remaining < 0:
            raise ProtocolError("step count went negative")
        actions.append(("move", st.run.cell(st.run.next(st.j))))
        return replace(st, mode=TRAVELING, waiting=None), actions

    def _arrived(self):
        if self.mode == AWAITING_STRONG:
            head = self.queue[0]
            tag = (head.tag, STRONG, self.round_of(head.tag))
            st = replace(self, mode=STOPPED, waiting=tag)
            actions = [("stop", self.cell), ("broadcast", tag)]
            return st._check_complete(actions)
        if self.mode != TRAVELING:
            raise ProtocolError(f"arrival while {self.mode}")
        nxt = self.run.next(self.j)
        actions = [("cross", self.cell, self.run.cell(nxt))]
        rem = None if self.remaining is None else self.remaining - 1
        return replace(self, j=nxt, remaining=rem)._decide(actions)

    def _ready(self, sender: int, tag: tuple):
        s, phase, rnd = tag
        entry = next((e for e in self.queue if e.tag == s), None)
        if entry is None or phase not in (WEAK, STRONG) or (phase == STRONG and entry.type != STRONG):
            raise ProtocolError(f"robot {self.robot} got readiness for unknown tag {tag}")
        if rnd < self.round_of(s) or not (1 <= sender <= self.n):
            raise ProtocolError(f"robot {self.robot} got stale readiness {tag} from {sender}")
        st = replace(self, received=self.received | {(tag, sender)})
        return st._check_complete([])

    def _check_complete(self, actions: list):
        tag = self.waiting
        if tag is None:
            return self, actions
        got = {r for t, r in self.received if t == tag} | {self.robot}
        if len(got) < self.n:
            return self, actions
        received = frozenset(x for x in self.received if x[0] != tag)
        st = replace(self, received=received, waiting=None)
        head = st.queue[0]
        s, phase, rnd = tag
        if phase == WEAK and head.type == STRONG:
            if head.advance:
                actions.append(("move", st.run.cell(st.run.next(st.j))))
                return replace(st, mode=AWAITING_STRONG), actions
            tag2 = (s, STRONG, rnd)
            st = replace(st, mode=DWELLING, waiting=tag2)
            actions.append(("broadcast", tag2))
            return st._check_complete(actions)
        # the synchronization is complete
        if phase == STRONG and head.advance:
            nxt = st.run.next(st.j)
            actions.append(("cross", st.cell, st.run.cell(nxt)))
            st = replace(st, j=nxt)
        rounds = dict(st.rounds)
        rounds[s] = rnd + 1
        queue = st.queue[1:] + ((head,) if head.suffix else ())
        st = replace(st, queue=queue, rounds=tuple(sorted(rounds.items())), remaining=head.steps_after)
        return st._decide(actions)


def compile_strategies(r: TeamRun, plan: SyncPlan) -> list[RobotStrategy]:
    runs, betas = project_runs(r)
    queues, initial = build_queues(r, plan, betas)
    return [RobotStrategy(robot=i + 1, n=r.n, run=run, queue=tuple(q), initial_steps=init)
            for i, (run, q, init) in enumerate(zip(runs, queues, initial))]


def export_strategies(r: TeamRun, plan: SyncPlan) -> list[dict]:
    _, betas = project_runs(r)
    return [s.to_json(b) for s, b in zip(compile_strategies(r, plan), betas)]


def load_strategies(docs: Sequence[dict]) -> list[RobotStrategy]:
    n = len(docs)
    out = []
    for d in docs:
        run = IndividualRun(d["robot"], tuple(d["run"]), d["k"], d["l"])
        q = tuple(QueueEntry(**e) for e in d["queue"])
        out.append(RobotStrategy(robot=d["robot"], n=n, run=run, queue=q, initial_steps=d["initial_steps"]))
    return out
