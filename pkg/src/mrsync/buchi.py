"""Büchi automata: tableau translation from LTL, degeneralization, products
with observed automata, emptiness with lasso witnesses and lasso membership.

Edges of an ordinary automaton carry symbolic guards (propositions that must
hold and propositions that must not), so an automaton for a formula over a
few propositions stays small however many regions the environment has.

An *observed* automaton labels states instead: the letter read when leaving
q is ``obs[q]`` and its edges are plain target lists.  The synchronization
automaton and products built from it are observed automata.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .ltl import (Always, And, Const, Eventually, Formula, LassoWord, Not, Or, Prop,
                  Release, Until, to_nnf)

State = Hashable


@dataclass(frozen=True)
class Guard:
    pos: frozenset = frozenset()
    neg: frozenset = frozenset()

    def matches(self, letter: frozenset) -> bool:
        return self.pos <= letter and not (self.neg & letter)

    def __str__(self):
        lits = sorted(self.pos) + ["!" + p for p in sorted(self.neg)]
        return " & ".join(lits) if lits else "true"


TRUE_GUARD = Guard()


@dataclass
class Buchi:
    """Generalized Büchi automaton.  A run is accepting when it visits every
    set in ``acceptance`` infinitely often; an empty list accepts every
    infinite run.  ``degeneralize`` yields an automaton with exactly one set."""
    states: list
    initial: list
    edges: dict                      # q -> [(Guard, t)], or q -> [t] when observed
    acceptance: list
    props: frozenset = frozenset()
    obs: dict | None = None          # q -> frozenset, for observed automata

    def successors(self, q) -> list:
        if self.obs is not None:
            return self.edges.get(q, [])
        return [t for _, t in self.edges.get(q, ())]

    def guarded(self, q) -> list:
        if self.obs is not None:
            return [(TRUE_GUARD, t) for t in self.edges.get(q, ())]
        return list(self.edges.get(q, ()))

    def moves(self, q, letter: frozenset) -> Iterator:
        """Successors of ``q`` when reading ``letter``."""
        if self.obs is not None:
            if self.obs[q] == letter:
                yield from self.successors(q)
            return
        for g, t in self.edges.get(q, ()):
            if g.matches(letter):
                yield t

    @property
    def is_degeneralized(self) -> bool:
        return len(self.acceptance) == 1

    def num_transitions(self) -> int:
        return sum(len(v) for v in self.edges.values())

    def reachable(self) -> "Buchi":
        keep = explore(self.initial, self.successors)
        states = [q for q in self.states if q in keep]
        return Buchi(states, list(self.initial), {q: list(self.edges.get(q, ())) for q in states},
                     [frozenset(q for q in states if q in s) for s in self.acceptance], self.props,
                     None if self.obs is None else {q: self.obs[q] for q in states})

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        ids = {q: i for i, q in enumerate(self.states)}
        trans = []
        for q in self.states:
            for g, t in self.guarded(q):
                d = {"src": ids[q], "dst": ids[t]}
                if self.obs is None:
                    d.update(pos=sorted(g.pos), neg=sorted(g.neg))
                trans.append(d)
        out = {
            "states": [_name(q) for q in self.states],
            "initial": [ids[q] for q in self.initial],
            "props": sorted(self.props),
            "transitions": trans,
            "acceptance": [[ids[q] for q in self.states if q in s] for s in self.acceptance],
        }
        if self.obs is not None:
            out["obs"] = [sorted(self.obs[q]) for q in self.states]
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "Buchi":
        n = len(doc["states"])
        edges: dict = {i: [] for i in range(n)}
        obs = None
        if "obs" in doc:
            obs = {i: frozenset(o) for i, o in enumerate(doc["obs"])}
        for t in doc["transitions"]:
            if obs is not None:
                edges[t["src"]].append(t["dst"])
            else:
                g = Guard(frozenset(t.get("pos", ())), frozenset(t.get("neg", ())))
                edges[t["src"]].append((g, t["dst"]))
        return cls(list(range(n)), list(doc["initial"]), edges,
                   [frozenset(s) for s in doc["acceptance"]], frozenset(doc.get("props", ())), obs)

    def to_dot(self, name: str = "B", gray: Iterable = ()) -> str:
        """Graphviz text.  Members of an acceptance set get a double circle and
        with several sets each set gets its own line style, used on the edges
        leaving its members."""
        styles = ["solid", "dashed", "dotted", "bold"]
        gray = set(gray)
        ids = {q: i for i, q in enumerate(self.states)}
        lines = [f"digraph {name} {{", "  rankdir=LR;", "  __init [shape=point];"]
        for q in self.states:
            member = [k for k, s in enumerate(self.acceptance) if q in s]
            attrs = [f"shape={'doublecircle' if member else 'circle'}"]
            label = _name(q)
            if self.obs is not None:
                label += "\\n{" + ",".join(sorted(self.obs[q])) + "}"
            attrs.append(f'label="{label}"')
            if q in gray:
                attrs += ["color=gray", "fontcolor=gray"]
            lines.append(f"  n{ids[q]} [{', '.join(attrs)}];")
        for q in self.initial:
            lines.append(f"  __init -> n{ids[q]};")
        for q in self.states:
            member = [k for k, s in enumerate(self.acceptance) if q in s]
            style = styles[member[0] % len(styles)] if member and len(self.acceptance) > 1 else "solid"
            for g, t in self.guarded(q):
                lab = "" if self.obs is not None else f', label="{g}"'
                lines.append(f"  n{ids[q]} -> n{ids[t]} [style={style}{lab}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _name(q) -> str:
    if isinstance(q, tuple):
        return "(" + ",".join(_name(x) for x in q) + ")"
    return str(q)


def dump_json(b: Buchi) -> str:
    return json.dumps(b.to_json(), sort_keys=True)


def observed(states: Sequence, initial: Sequence, succ: dict, acceptance: Sequence, obs: dict,
             props: Iterable[str] = ()) -> Buchi:
    return Buchi(list(states), list(initial), {q: list(succ.get(q, ())) for q in states},
                 [frozenset(s) for s in acceptance], frozenset(props), dict(obs))


# --------------------------------------------------------------------------
# graph search

def explore(initial: Iterable, succ: Callable[[State], Iterable]) -> dict:
    """Reachable subgraph as an insertion-ordered adjacency dict."""
    graph: dict = {}
    queue = deque()
    for q in initial:
        if q not in graph:
            graph[q] = None
            queue.append(q)
    while queue:
        q = queue.popleft()
        out = list(dict.fromkeys(succ(q)))
        graph[q] = out
        for t in out:
            if t not in graph:
                graph[t] = None
                queue.append(t)
    return graph


def find_accepting_scc(initial: Iterable, succ: Callable, acceptance: Sequence):
    """On-the-fly iterative Tarjan.  Stops at the first completed strongly
    connected component that has a cycle and meets every acceptance set.

    Returns ``(graph, component)`` where ``graph`` holds the explored
    adjacency lists; ``component`` is None if there is no such component."""
    graph: dict = {}
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    counter = 0

    def visit(v):
        nonlocal counter
        index[v] = low[v] = counter
        counter += 1
        stack.append(v)
        on_stack.add(v)
        out = graph.get(v)
        if out is None:
            out = graph[v] = list(dict.fromkeys(succ(v)))
        return iter(out)

    for root in initial:
        if root in index:
            continue
        work = [(root, visit(root))]
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    work.append((w, visit(w)))
                    pushed = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if pushed:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) == 1 and v not in graph[v]:
                    continue
                if all(any(x in f for x in comp) for f in acceptance):
                    comp.sort(key=index.__getitem__)
                    return graph, comp
    return graph, None


def bfs_path(graph: dict, src, is_target: Callable, allowed=None, min_one_edge=False) -> list | None:
    """Shortest path ``[src, ..., target]`` inside ``allowed``.  With
    ``min_one_edge`` the path has at least one edge, so ``src`` can be its own
    target through a cycle."""
    if not min_one_edge and is_target(src):
        return [src]
    parent: dict = {} if min_one_edge else {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for w in graph.get(v) or ():
            if w in parent or (allowed is not None and w not in allowed):
                continue
            parent[w] = v
            if is_target(w):
                path = [w]
                u = v
                while u != src:
                    path.append(u)
                    u = parent[u]
                path.append(src)
                return path[::-1]
            queue.append(w)
    return None


@dataclass
class Lasso:
    stem: list
    cycle: list  # cycle[-1] has an edge back to cycle[0]


def _lasso_through(graph: dict, initial: Iterable, comp: list, acceptance: Sequence) -> Lasso:
    root = comp[0]
    members = set(comp)
    stem = None
    for q0 in initial:
        p = bfs_path(graph, q0, lambda v: v == root)
        if p is not None and (stem is None or len(p) < len(stem)):
            stem = p
    path = [root]
    cur = root
    for f in acceptance:
        if any(v in f for v in path):
            continue
        p = bfs_path(graph, cur, lambda v, f=f: v in f, members)
        path.extend(p[1:])
        cur = p[-1]
    p = bfs_path(graph, cur, lambda v: v == root, members, min_one_edge=True)
    path.extend(p[1:])
    return Lasso(stem[:-1], path[:-1])


class _Lifted:
    """A state set of one product component, seen as a set of product states."""

    def __init__(self, idx: int, members):
        self.idx, self.members = idx, members

    def __contains__(self, v):
        return v[self.idx] in self.members


class _Both:
    def __init__(self, fa, fb):
        self.fa, self.fb = fa, fb

    def __contains__(self, v):
        return v[0] in self.fa and v[1] in self.fb


# --------------------------------------------------------------------------
# emptiness and membership

def is_empty(b) -> tuple[bool, Lasso | None]:
    """Whether no accepting run exists; otherwise an accepting state lasso."""
    graph, comp = find_accepting_scc(b.initial, b.successors, b.acceptance)
    if comp is None:
        return True, None
    return False, _lasso_through(graph, b.initial, comp, b.acceptance)


def accepts_lasso(b, w: LassoWord) -> bool:
    init = [(0, q) for q in b.initial]

    def succ(node):
        i, q = node
        j = w.successor(i)
        return [(j, t) for t in b.moves(q, w.letter(i))]

    _, comp = find_accepting_scc(init, succ, [_Lifted(1, f) for f in b.acceptance])
    return comp is not None


def lasso_word(b, lasso: Lasso) -> LassoWord:
    """Word read along a state lasso of an observed automaton."""
    return LassoWord(tuple(b.obs[q] for q in lasso.stem), tuple(b.obs[q] for q in lasso.cycle))


def accepts_run(b, lasso: Lasso) -> bool:
    """Whether a state lasso is an accepting run of ``b``."""
    seq = lasso.stem + lasso.cycle
    if not seq or seq[0] not in b.initial:
        return False
    for a, c in zip(seq, seq[1:] + [lasso.cycle[0]]):
        if c not in b.successors(a):
            return False
    return all(any(q in f for q in lasso.cycle) for f in b.acceptance)


# --------------------------------------------------------------------------
# degeneralization and products

def degeneralize(b: Buchi) -> Buchi:
    """Counter construction.  State ``(q, i)`` waits for acceptance set i; the
    counter moves on when leaving a state of that set."""
    m = len(b.acceptance)
    if m == 1:
        return b
    if m == 0:
        return Buchi(list(b.states), list(b.initial), dict(b.edges), [frozenset(b.states)], b.props, b.obs)
    sets = b.acceptance
    init = [(q, 0) for q in b.initial]
    edges: dict = {}
    queue = deque(init)
    order = list(dict.fromkeys(init))
    seen = set(order)
    while queue:
        v = queue.popleft()
        q, i = v
        j = (i + 1) % m if q in sets[i] else i
        if b.obs is not None:
            out = [(t, j) for t in b.edges.get(q, ())]
            targets = out
        else:
            out = [(g, (t, j)) for g, t in b.edges.get(q, ())]
            targets = [t for _, t in out]
        edges[v] = out
        for t in targets:
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    acc = frozenset(v for v in order if v[1] == 0 and v[0] in sets[0])
    obs = None if b.obs is None else {v: b.obs[v[0]] for v in order}
    return Buchi(order, init, edges, [acc], b.props, obs)


class _ObsView:
    def __init__(self, obs):
        self.obs = obs

    def __getitem__(self, v):
        return self.obs[v[0]]


class Product:
    """Lazily expanded product of an observed automaton with a guarded one.
    Quacks like an observed :class:`Buchi` for the search functions."""

    def __init__(self, a: Buchi, b: Buchi, paper_faithful: bool = False):
        if a.obs is None:
            raise ValueError("left operand must be an observed automaton")
        if paper_faithful:
            a, b = degeneralize(a), degeneralize(b)
            self.acceptance = [_Both(a.acceptance[0], b.acceptance[0])]
        else:
            self.acceptance = [_Lifted(0, f) for f in a.acceptance] + [_Lifted(1, f) for f in b.acceptance]
        self.a, self.b = a, b
        self.initial = [(q, s) for q in a.initial for s in b.initial]
        self.obs = _ObsView(a.obs)
        self.props = a.props | b.props
        self._succ: dict = {}
        # b moves depend only on (b state, letter)
        self._bmoves: dict = {}

    def successors(self, v) -> list:
        out = self._succ.get(v)
        if out is None:
            q, s = v
            key = (s, self.a.obs[q])
            nb = self._bmoves.get(key)
            if nb is None:
                nb = self._bmoves[key] = [t for g, t in self.b.edges.get(s, ()) if g.matches(key[1])]
            out = self._succ[v] = [(q2, s2) for q2 in self.a.successors(q) for s2 in nb] if nb else []
        return out

    def moves(self, v, letter):
        if self.obs[v] == letter:
            yield from self.successors(v)

    def materialize(self) -> Buchi:
        graph = explore(self.initial, self.successors)
        states = list(graph)
        return Buchi(states, list(self.initial), graph, [frozenset(v for v in states if v in f) for f in self.acceptance],
                     self.props, {v: self.obs[v] for v in states})


def product_with_observed(a: Buchi, b: Buchi, paper_faithful: bool = False) -> Buchi:
    """Synchronous product of an observed automaton ``a`` with a guarded
    automaton ``b``; the observation of the source ``a``-state drives ``b``.

    Default acceptance is the exact intersection (one set per input set).
    ``paper_faithful`` degeneralizes both sides and keeps the single set
    F_a x F_b, which misses runs visiting the two sets at different times.
    """
    return Product(a, b, paper_faithful).materialize()


# --------------------------------------------------------------------------
# tableau translation

def _is_literal(f: Formula) -> bool:
    return isinstance(f, (Prop, Const)) or (isinstance(f, Not) and isinstance(f.arg, Prop))


def _contradicts(lit: Formula, old: frozenset) -> bool:
    if lit == Const(False):
        return True
    if isinstance(lit, Prop):
        return Not(lit) in old
    if isinstance(lit, Not):
        return lit.arg in old
    return False


def translate(f: Formula) -> Buchi:
    """Generalized Büchi automaton for ``f`` by on-the-fly tableau expansion.

    Node labels are moved onto incoming edges: entering a node reads a letter
    satisfying the node's literals.  There is one acceptance set per until or
    eventually subformula, or a single all-states set if there are none.
    """
    f = to_nnf(f)
    INIT = 0
    node_key: dict = {}          # (old, next) -> id
    incoming: dict = {}          # id -> set of ids
    old_of: dict = {}
    next_of: dict = {}
    counter = [0]

    # work items: (incoming ids, old, new list, next)
    work = [(frozenset([INIT]), frozenset(), (f,), frozenset())]
    while work:
        inc, old, new, nxt = work.pop()
        if not new:
            key = (old, nxt)
            nid = node_key.get(key)
            if nid is not None:
                incoming[nid] |= inc
                continue
            counter[0] += 1
            nid = counter[0]
            node_key[key] = nid
            incoming[nid] = set(inc)
            old_of[nid] = old
            next_of[nid] = nxt
            work.append((frozenset([nid]), frozenset(), tuple(nxt), frozenset()))
            continue
        eta, rest = new[0], new[1:]
        if eta in old:
            work.append((inc, old, rest, nxt))
            continue
        if _is_literal(eta):
            if _contradicts(eta, old):
                continue
            work.append((inc, old | {eta}, rest, nxt))
            continue
        old2 = old | {eta}

        def add(items, base=rest):
            return tuple(x for x in items if x not in old2) + base

        if isinstance(eta, And):
            work.append((inc, old2, add((eta.left, eta.right)), nxt))
        elif isinstance(eta, Or):
            work.append((inc, old2, add((eta.right,)), nxt))
            work.append((inc, old2, add((eta.left,)), nxt))
        elif isinstance(eta, Until):
            work.append((inc, old2, add((eta.right,)), nxt))
            work.append((inc, old2, add((eta.left,)), nxt | {eta}))
        elif isinstance(eta, Release):
            work.append((inc, old2, add((eta.left, eta.right)), nxt))
            work.append((inc, old2, add((eta.right,)), nxt | {eta}))
        elif isinstance(eta, Eventually):
            work.append((inc, old2, add((eta.arg,)), nxt))
            work.append((inc, old2, rest, nxt | {eta}))
        elif isinstance(eta, Always):
            work.append((inc, old2, add((eta.arg,)), nxt | {eta}))
        else:  # pragma: no cover
            raise TypeError(eta)

    nodes = sorted(incoming)
    states = [INIT] + nodes
    edges: dict = {q: [] for q in states}
    for n in nodes:
        lits = old_of[n]
        g = Guard(frozenset(x.name for x in lits if isinstance(x, Prop)),
                  frozenset(x.arg.name for x in lits if isinstance(x, Not)))
        for src in sorted(incoming[n]):
            edges[src].append((g, n))

    untils = list(dict.fromkeys(g for g in f.subformulas() if isinstance(g, (Until, Eventually))))
    acceptance = []
    for u in untils:
        rhs = u.right if isinstance(u, Until) else u.arg
        acceptance.append(frozenset(n for n in nodes if u not in old_of[n] or rhs in old_of[n]))
    if not acceptance:
        acceptance = [frozenset(nodes)]
    return Buchi(states, [INIT], edges, acceptance, f.props())
