"""Finite abstractions: one transition system per robot and their weighted
synchronous team product."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Sequence

from .env import Partition, adjacency as _adjacency, natural_key


@dataclass(frozen=True)
class TransitionSystem:
    states: tuple
    initial: object
    succ: dict            # state -> tuple of successors (self-loop included)
    props: frozenset
    obs: dict             # state -> region name, or None for free space

    def __post_init__(self):
        if self.initial not in self.succ:
            raise ValueError(f"initial state {self.initial!r} is not a state")

    def observe(self, q) -> frozenset:
        o = self.obs[q]
        return frozenset() if o is None else frozenset([o])

    def to_dot(self, name: str = "T") -> str:
        lines = [f"graph {name} {{"]
        for q in self.states:
            o = self.obs[q] or "∅"
            shape = "doublecircle" if q == self.initial else "circle"
            lines.append(f'  "{q}" [shape={shape}, xlabel="{o}"];')
        for q in self.states:
            for t in self.succ[q]:
                if natural_key(str(q)) <= natural_key(str(t)):
                    lines.append(f'  "{q}" -- "{t}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_robot_ts(p: Partition, adj: dict | None, start: str) -> TransitionSystem:
    if adj is None:
        adj = _adjacency(p)
    ids = p.cell_ids
    if start not in ids:
        raise ValueError(f"unknown start cell {start!r}")
    succ = {c: tuple([c] + sorted(adj[c], key=natural_key)) for c in ids}
    return TransitionSystem(tuple(ids), start, succ, p.props, {c: p.region_of(c) for c in ids})


@dataclass
class TeamSystem:
    """Synchronous product of robot systems, expanded on demand."""
    systems: tuple
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.systems = tuple(self.systems)
        if not self.systems:
            raise ValueError("empty team")
        first = self.systems[0]
        for ts in self.systems[1:]:
            if set(ts.states) != set(first.states) or ts.props != first.props:
                raise ValueError("robot systems must share cells and propositions")

    @property
    def n(self) -> int:
        return len(self.systems)

    @property
    def initial(self) -> tuple:
        return tuple(ts.initial for ts in self.systems)

    @property
    def props(self) -> frozenset:
        return self.systems[0].props

    def num_states(self) -> int:
        return len(self.systems[0].states) ** self.n

    def successors(self, q: tuple) -> tuple:
        out = self._cache.get(q)
        if out is None:
            out = tuple(itertools.product(*(ts.succ[c] for ts, c in zip(self.systems, q))))
            with self._lock:
                self._cache[q] = out
        return out

    def observe(self, q: tuple) -> frozenset:
        """Regions occupied by the team; free space contributes nothing."""
        return frozenset(ts.obs[c] for ts, c in zip(self.systems, q) if ts.obs[c] is not None)

    def is_transition(self, a: tuple, b: tuple) -> bool:
        return all(y in ts.succ[x] for ts, x, y in zip(self.systems, a, b))

    @staticmethod
    def weight(a: Sequence, b: Sequence) -> int:
        return sum(1 for x, y in zip(a, b) if x != y)


def product_team(systems: Sequence[TransitionSystem]) -> TeamSystem:
    return TeamSystem(tuple(systems))


def team_for(p: Partition, starts: Sequence[str] | None = None) -> TeamSystem:
    adj = _adjacency(p)
    starts = list(starts) if starts is not None else p.initial_cells()
    return product_team([build_robot_ts(p, adj, s) for s in starts])
