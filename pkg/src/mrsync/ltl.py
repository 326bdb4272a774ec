"""LTL without the next operator: syntax tree, parser, negation normal form
and exact evaluation on ultimately periodic words.

Grammar (loosest binding first)::

    formula  := implies
    implies  := or ( '->' implies )?
    or       := and ( ('||' | '|') and )*
    and      := until ( ('&&' | '&') until )*
    until    := unary ( ('U' | 'R') until )?
    unary    := ('!' | 'G' | '[]' | 'F' | '<>') unary | atom
    atom     := 'true' | 'false' | identifier | '(' formula ')'

Unicode spellings (¬ □ ◇ ∧ ∨ →) are accepted as well.  ``X`` is rejected
with :class:`NextOperatorError`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

Letter = frozenset  # a set of proposition names


class LTLSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class NextOperatorError(LTLSyntaxError):
    """The formula uses X, which is outside the stutter-invariant fragment."""


# --------------------------------------------------------------------------
# syntax tree

class Formula:
    __slots__ = ()

    def children(self) -> tuple["Formula", ...]:
        return ()

    def subformulas(self) -> Iterator["Formula"]:
        """Post-order traversal (children before parents), with repeats."""
        for c in self.children():
            yield from c.subformulas()
        yield self

    def props(self) -> frozenset[str]:
        return frozenset(f.name for f in self.subformulas() if isinstance(f, Prop))

    def size(self) -> int:
        return sum(1 for _ in self.subformulas())

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True, slots=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True, slots=True)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Until(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Release(Formula):
    """Dual of until; only produced by :func:`to_nnf`."""
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Eventually(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class Always(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


TRUE = Const(True)
FALSE = Const(False)


def implies(a: Formula, b: Formula) -> Formula:
    return Or(Not(a), b)


def conjunction(fs: Iterable[Formula]) -> Formula:
    out = None
    for f in fs:
        out = f if out is None else And(out, f)
    return TRUE if out is None else out


_PREC = {Or: 1, And: 2, Until: 3, Release: 3}
_BINOP = {And: "&&", Or: "||", Until: "U", Release: "R"}


def to_string(f: Formula, parent: int = 0) -> str:
    """Render in the ASCII syntax accepted by :func:`parse`."""
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, (Not, Eventually, Always)):
        op = {Not: "!", Eventually: "F ", Always: "G "}[type(f)]
        return op + to_string(f.arg, 4)
    prec = _PREC[type(f)]
    # until and release are right associative; everything else left associative
    lp, rp = (prec + 1, prec) if isinstance(f, (Until, Release)) else (prec, prec + 1)
    s = f"{to_string(f.left, lp)} {_BINOP[type(f)]} {to_string(f.right, rp)}"
    return f"({s})" if prec < parent else s


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<op>&&|\|\||->|\[\]|<>|[!~&|()¬□◇∧∨→])|(?P<id>[A-Za-z_][A-Za-z0-9_]*))"
)
_UNICODE = {"¬": "!", "~": "!", "□": "G", "◇": "F", "∧": "&&", "&": "&&",
            "∨": "||", "|": "||", "→": "->", "[]": "G", "<>": "F"}
_KEYWORDS = {"G", "F", "U", "R", "X", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LTLSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start("op") if m.group("op") else m.start("id")
        if m.group("op"):
            out.append(("op", _UNICODE.get(m.group("op"), m.group("op")), start))
        else:
            word = m.group("id")
            out.append(("op" if word in _KEYWORDS else "id", word, start))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value: str | None = None):
        kind, val, pos = self.toks[self.i]
        if value is not None and val != value:
            raise LTLSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)
        self.i += 1
        return kind, val, pos

    def parse(self) -> Formula:
        f = self.implies()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise LTLSyntaxError(f"unexpected {val!r}", pos)
        return f

    def implies(self):
        left = self.disj()
        if self.peek()[1] == "->":
            self.take()
            return implies(left, self.implies())
        return left

    def disj(self):
        f = self.conj()
        while self.peek()[1] == "||":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.until()
        while self.peek()[1] == "&&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self):
        left = self.unary()
        op = self.peek()[1]
        if op in ("U", "R"):
            self.take()
            return (Until if op == "U" else Release)(left, self.until())
        return left

    def unary(self):
        kind, val, pos = self.peek()
        if kind == "op" and val == "X":
            raise NextOperatorError("the next operator X is not allowed in LTL without next", pos)
        if kind == "op" and val in ("!", "G", "F"):
            self.take()
            arg = self.unary()
            return {"!": Not, "G": Always, "F": Eventually}[val](arg)
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "id":
            return Prop(val)
        if val == "true":
            return TRUE
        if val == "false":
            return FALSE
        if val == "(":
            f = self.implies()
            self.take(")")
            return f
        raise LTLSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str) -> Formula:
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# negation normal form

def to_nnf(f: Formula) -> Formula:
    """Push negations down to propositions.  Release appears for negated until."""
    if isinstance(f, (Const, Prop)):
        return f
    if isinstance(f, Not):
        return _negate(f.arg)
    if isinstance(f, (Eventually, Always)):
        return type(f)(to_nnf(f.arg))
    return type(f)(to_nnf(f.left), to_nnf(f.right))


def _negate(f: Formula) -> Formula:
    if isinstance(f, Const):
        return Const(not f.value)
    if isinstance(f, Prop):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.arg)
    if isinstance(f, And):
        return Or(_negate(f.left), _negate(f.right))
    if isinstance(f, Or):
        return And(_negate(f.left), _negate(f.right))
    if isinstance(f, Until):
        return Release(_negate(f.left), _negate(f.right))
    if isinstance(f, Release):
        return Until(_negate(f.left), _negate(f.right))
    if isinstance(f, Eventually):
        return Always(_negate(f.arg))
    if isinstance(f, Always):
        return Eventually(_negate(f.arg))
    raise TypeError(f)


def is_nnf(f: Formula) -> bool:
    return all(not isinstance(g, Not) or isinstance(g.arg, Prop) for g in f.subformulas())


# --------------------------------------------------------------------------
# lasso words and evaluation

@dataclass(frozen=True)
class LassoWord:
    """The infinite word ``stem cycle cycle cycle ...``."""
    stem: tuple[frozenset, ...]
    cycle: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("a lasso word needs a non-empty cycle")
        object.__setattr__(self, "stem", tuple(frozenset(a) for a in self.stem))
        object.__setattr__(self, "cycle", tuple(frozenset(a) for a in self.cycle))

    @classmethod
    def of(cls, stem: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> "LassoWord":
        return cls(tuple(frozenset(a) for a in stem), tuple(frozenset(a) for a in cycle))

    def __len__(self):
        return len(self.stem) + len(self.cycle)

    def letter(self, i: int) -> frozenset:
        if i < len(self.stem):
            return self.stem[i]
        return self.cycle[(i - len(self.stem)) % len(self.cycle)]

    def successor(self, i: int) -> int:
        """Next position in the finite representation (cycle wraps)."""
        return i + 1 if i + 1 < len(self) else len(self.stem)

    def collapsed(self) -> "LassoWord":
        """Remove finite stutter; the result denotes a stutter-equivalent word."""
        cycle = [a for i, a in enumerate(self.cycle) if i == 0 or a != self.cycle[i - 1]]
        while len(cycle) > 1 and cycle[-1] == cycle[0]:
            cycle.pop()
        stem = [a for i, a in enumerate(self.stem) if i == 0 or a != self.stem[i - 1]]
        while stem and stem[-1] == cycle[0]:
            stem.pop()
        return LassoWord(tuple(stem), tuple(cycle))


def eval_lasso(f: Formula, w: LassoWord) -> bool:
    """Truth of ``f`` at the first position of ``w``."""
    return _Evaluator(w).value(f)[0]


class _Evaluator:
    def __init__(self, w: LassoWord):
        self.w = w
        self.n = len(w)
        self.nxt = [w.successor(i) for i in range(self.n)]
        self.memo: dict[Formula, list[bool]] = {}

    def value(self, f: Formula) -> list[bool]:
        v = self.memo.get(f)
        if v is None:
            v = self.memo[f] = self._compute(f)
        return v

    def _compute(self, f: Formula) -> list[bool]:
        n, w = self.n, self.w
        if isinstance(f, Const):
            return [f.value] * n
        if isinstance(f, Prop):
            return [f.name in w.letter(i) for i in range(n)]
        if isinstance(f, Not):
            return [not x for x in self.value(f.arg)]
        if isinstance(f, And):
            a, b = self.value(f.left), self.value(f.right)
            return [x and y for x, y in zip(a, b)]
        if isinstance(f, Or):
            a, b = self.value(f.left), self.value(f.right)
            return [x or y for x, y in zip(a, b)]
        if isinstance(f, Until):
            return self._fix(self.value(f.left), self.value(f.right), least=True)
        if isinstance(f, Eventually):
            return self._fix([True] * n, self.value(f.arg), least=True)
        if isinstance(f, Release):
            return self._fix(self.value(f.left), self.value(f.right), least=False)
        if isinstance(f, Always):
            return self._fix([False] * n, self.value(f.arg), least=False)
        raise TypeError(f)

    def _fix(self, a: list[bool], b: list[bool], least: bool) -> list[bool]:
        # until:   v = b or (a and v[next]),   least fixpoint
        # release: v = b and (a or v[next]),   greatest fixpoint
        n, nxt = self.n, self.nxt
        v = [not least] * n
        # every position has a unique successor, so n sweeps reach the fixpoint
        for _ in range(n + 1):
            changed = False
            for i in range(n - 1, -1, -1):
                if least:
                    new = b[i] or (a[i] and v[nxt[i]])
                else:
                    new = b[i] and (a[i] or v[nxt[i]])
                if new != v[i]:
                    v[i] = new
                    changed = True
            if not changed:
                break
        return v
