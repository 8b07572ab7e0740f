"""Syntactically co-safe temporal logic over finite traces.

Formulas are immutable trees built from ``T`` (true), named propositions,
``!``, ``&``, ``|``, ``X`` (next), ``U`` (until) and ``F`` (eventually).
The co-safe fragment keeps negation directly above propositions only, which
is what lets a finite prefix witness satisfaction and the automaton
translation stay sound.

Conventions (documented because they matter at trace boundaries):
  * ``X f`` at the last trace position is false.
  * ``a U b`` needs its witness inside the trace.
  * The empty trace satisfies only formulas that reduce to ``T`` through
    conjunction/disjunction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional


class FormulaSyntaxError(ValueError):
    """Raised by parse() with the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownProposition(ValueError):
    def __init__(self, name: str, offset: int = -1):
        super().__init__(f"unknown proposition {name!r}")
        self.name = name
        self.offset = offset


class NotCoSafe(ValueError):
    """Raised when negation cannot be pushed down to propositions.

    ``path`` is the tuple of child indices from the root to the offending
    subtree (0 = unary child / left, 1 = right).
    """

    def __init__(self, path: tuple, subtree: "Formula"):
        super().__init__(f"not co-safe at path {path}: {subtree}")
        self.path = path
        self.subtree = subtree


class AlphabetMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SkillRef:
    """Structured skill descriptor carried by an atomic proposition.

    ``robot`` is None when any robot may emit the proposition; ``obj`` and
    ``target`` narrow the match the same way.
    """

    skill: str
    robot: Optional[str] = None
    obj: Optional[str] = None
    target: Optional[str] = None


@dataclass(frozen=True)
class Prop:
    name: str
    kind: str = "atomic"  # "atomic" | "composite"
    skill: Optional[SkillRef] = None
    child: Optional[str] = None  # composite props name the spec node they complete

    def __post_init__(self):
        if not self.name:
            raise ValueError("proposition name must be nonempty")
        if self.kind not in ("atomic", "composite"):
            raise ValueError(f"bad prop kind {self.kind!r}")
        if self.kind == "composite" and self.child is None:
            raise ValueError(f"composite prop {self.name!r} needs a child spec id")


class Alphabet:
    """Immutable name -> Prop table; prop names are unique."""

    def __init__(self, props: Iterable[Prop]):
        table = {}
        for p in props:
            if p.name in table:
                raise ValueError(f"duplicate proposition {p.name!r}")
            table[p.name] = p
        self._table = table

    @classmethod
    def of_names(cls, *names: str) -> "Alphabet":
        return cls(Prop(n) for n in names)

    def __contains__(self, name: str) -> bool:
        return name in self._table

    def __getitem__(self, name: str) -> Prop:
        try:
            return self._table[name]
        except KeyError:
            raise UnknownProposition(name) from None

    def __iter__(self) -> Iterator[Prop]:
        return iter(self._table.values())

    def __len__(self) -> int:
        return len(self._table)

    @property
    def names(self) -> frozenset:
        return frozenset(self._table)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self._table == other._table

    def __repr__(self):
        return f"Alphabet({sorted(self._table)})"


# --- formula tree ---------------------------------------------------------

class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    prop: Prop


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula


TOP = Top()


def atoms_of(f: Formula) -> frozenset:
    """Names of all propositions mentioned in f."""
    out = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            out.add(node.prop.name)
        elif isinstance(node, (Not, Next, Eventually)):
            stack.append(node.arg)
        elif isinstance(node, (And, Or, Until)):
            stack.append(node.left)
            stack.append(node.right)
    return frozenset(out)


# --- printing -------------------------------------------------------------

_PREC = {Or: 1, And: 2, Until: 3, Not: 4, Next: 4, Eventually: 4, Atom: 5, Top: 5}


def format_formula(f: Formula) -> str:
    """Concrete syntax; parse(format_formula(f)) is structurally f."""

    def wrap(child: Formula, parent_prec: int, tight: bool) -> str:
        text = format_formula(child)
        prec = _PREC[type(child)]
        if prec < parent_prec or (tight and prec == parent_prec):
            return f"({text})"
        return text

    if isinstance(f, Top):
        return "T"
    if isinstance(f, Atom):
        return f.prop.name
    if isinstance(f, Not):
        return "!" + wrap(f.arg, 4, False)
    if isinstance(f, Next):
        return "X " + wrap(f.arg, 4, False)
    if isinstance(f, Eventually):
        return "F " + wrap(f.arg, 4, False)
    if isinstance(f, Until):
        # right-associative: left child at equal precedence needs parens
        return f"{wrap(f.left, 3, True)} U {wrap(f.right, 3, False)}"
    if isinstance(f, And):
        return f"{wrap(f.left, 2, False)} & {wrap(f.right, 2, True)}"
    if isinstance(f, Or):
        return f"{wrap(f.left, 1, False)} | {wrap(f.right, 1, True)}"
    raise TypeError(f"not a formula: {f!r}")


# --- parsing --------------------------------------------------------------

_OPERATOR_WORDS = {"T", "X", "U", "F"}


def _tokenize(text: str):
    tokens = []  # (kind, value, offset)
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "()!&|":
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in _OPERATOR_WORDS else "ident"
            tokens.append((kind, word, i))
            i = j
            continue
        raise FormulaSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    """Precedence: ! / X / F bind tightest, then U, then &, then |."""

    def __init__(self, tokens, alphabet: Alphabet):
        self.tokens = tokens
        self.pos = 0
        self.alphabet = alphabet

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        f = self.or_expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise FormulaSyntaxError(f"unexpected {value!r}", offset)
        return f

    def or_expr(self) -> Formula:
        f = self.and_expr()
        while self.peek()[0] == "|":
            self.take()
            f = Or(f, self.and_expr())
        return f

    def and_expr(self) -> Formula:
        f = self.until_expr()
        while self.peek()[0] == "&":
            self.take()
            f = And(f, self.until_expr())
        return f

    def until_expr(self) -> Formula:
        f = self.unary_expr()
        if self.peek()[0] == "U":
            self.take()
            return Until(f, self.until_expr())  # right-associative
        return f

    def unary_expr(self) -> Formula:
        kind, value, offset = self.peek()
        if kind == "!":
            self.take()
            return Not(self.unary_expr())
        if kind == "X":
            self.take()
            return Next(self.unary_expr())
        if kind == "F":
            self.take()
            return Eventually(self.unary_expr())
        if kind == "T":
            self.take()
            return TOP
        if kind == "ident":
            self.take()
            if value not in self.alphabet:
                raise UnknownProposition(value, offset)
            return Atom(self.alphabet[value])
        if kind == "(":
            self.take()
            f = self.or_expr()
            k, v, off = self.take()
            if k != ")":
                raise FormulaSyntaxError("expected ')'", off)
            return f
        raise FormulaSyntaxError(f"expected a formula, got {value or 'end of input'!r}", offset)


def parse(text: str, alphabet: Alphabet) -> Formula:
    return _Parser(_tokenize(text), alphabet).parse()


# --- positive normal form -------------------------------------------------

def normalize_co_safe(f: Formula) -> Formula:
    """Push negations down to propositions; reject what falls outside the
    co-safe fragment (negated X, U, F, or T)."""

    def push(node: Formula, negated: bool, path: tuple) -> Formula:
        if isinstance(node, Not):
            return push(node.arg, not negated, path + (0,))
        if isinstance(node, Atom):
            return Not(node) if negated else node
        if isinstance(node, Top):
            if negated:
                raise NotCoSafe(path, Not(node))
            return node
        if isinstance(node, And):
            left = push(node.left, negated, path + (0,))
            right = push(node.right, negated, path + (1,))
            return Or(left, right) if negated else And(left, right)
        if isinstance(node, Or):
            left = push(node.left, negated, path + (0,))
            right = push(node.right, negated, path + (1,))
            return And(left, right) if negated else Or(left, right)
        if isinstance(node, (Next, Until, Eventually)):
            if negated:
                raise NotCoSafe(path, Not(node))
            if isinstance(node, Next):
                return Next(push(node.arg, False, path + (0,)))
            if isinstance(node, Eventually):
                return Eventually(push(node.arg, False, path + (0,)))
            return Until(push(node.left, False, path + (0,)),
                         push(node.right, False, path + (1,)))
        raise TypeError(f"not a formula: {node!r}")

    return push(f, False, ())


def is_normalized(f: Formula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.arg, Atom)
    if isinstance(f, (Top, Atom)):
        return True
    if isinstance(f, (Next, Eventually)):
        return is_normalized(f.arg)
    if isinstance(f, (And, Or, Until)):
        return is_normalized(f.left) and is_normalized(f.right)
    return False


# --- traces and semantics -------------------------------------------------

@dataclass(frozen=True)
class Trace:
    """Finite sequence of proposition sets (names of props true per step)."""

    steps: tuple

    @classmethod
    def of(cls, *steps: Iterable[str]) -> "Trace":
        return cls(tuple(frozenset(s) for s in steps))

    def __len__(self) -> int:
        return len(self.steps)

    def check_alphabet(self, alphabet: Alphabet) -> "Trace":
        for i, step in enumerate(self.steps):
            extra = step - alphabet.names
            if extra:
                raise AlphabetMismatch(f"step {i} mentions {sorted(extra)}")
        return self


def evaluate(f: Formula, trace: Trace, alphabet: Optional[Alphabet] = None) -> bool:
    """Finite-trace satisfaction at position 0."""
    if alphabet is not None:
        trace.check_alphabet(alphabet)
        extra = atoms_of(f) - alphabet.names
        if extra:
            raise AlphabetMismatch(f"formula mentions {sorted(extra)}")
    steps = trace.steps
    n = len(steps)

    def sat(node: Formula, i: int) -> bool:
        if isinstance(node, Top):
            return True
        if i >= n:
            return _empty_sat(node, False)
        if isinstance(node, Atom):
            return node.prop.name in steps[i]
        if isinstance(node, Not):
            return not sat(node.arg, i)
        if isinstance(node, And):
            return sat(node.left, i) and sat(node.right, i)
        if isinstance(node, Or):
            return sat(node.left, i) or sat(node.right, i)
        if isinstance(node, Next):
            return i + 1 < n and sat(node.arg, i + 1)
        if isinstance(node, Eventually):
            return any(sat(node.arg, j) for j in range(i, n))
        if isinstance(node, Until):
            for j in range(i, n):
                if sat(node.right, j):
                    return True
                if not sat(node.left, j):
                    return False
            return False
        raise TypeError(f"not a formula: {node!r}")

    return sat(f, 0)


def _empty_sat(f: Formula, negated: bool) -> bool:
    """Empty-trace satisfaction: the T-closure under &, | and negation
    pushing.  Propositions fail either way (there is no position to read);
    temporal operators fail positively and hold negated (no position can
    witness or violate them)."""
    if isinstance(f, Top):
        return not negated
    if isinstance(f, Not):
        return _empty_sat(f.arg, not negated)
    if isinstance(f, And):
        if negated:
            return _empty_sat(f.left, True) or _empty_sat(f.right, True)
        return _empty_sat(f.left, False) and _empty_sat(f.right, False)
    if isinstance(f, Or):
        if negated:
            return _empty_sat(f.left, True) and _empty_sat(f.right, True)
        return _empty_sat(f.left, False) or _empty_sat(f.right, False)
    if isinstance(f, Atom):
        return False
    return negated  # Next / Until / Eventually


def accepts_empty(f: Formula) -> bool:
    """Whether the empty trace satisfies f (the T-closure rule)."""
    return _empty_sat(f, False)


# --- canonical JSON form ---------------------------------------------------

def formula_to_json(f: Formula) -> dict:
    if isinstance(f, Top):
        return {"op": "true"}
    if isinstance(f, Atom):
        return {"op": "prop", "name": f.prop.name}
    if isinstance(f, Not):
        return {"op": "not", "arg": formula_to_json(f.arg)}
    if isinstance(f, Next):
        return {"op": "next", "arg": formula_to_json(f.arg)}
    if isinstance(f, Eventually):
        return {"op": "eventually", "arg": formula_to_json(f.arg)}
    if isinstance(f, And):
        return {"op": "and", "left": formula_to_json(f.left), "right": formula_to_json(f.right)}
    if isinstance(f, Or):
        return {"op": "or", "left": formula_to_json(f.left), "right": formula_to_json(f.right)}
    if isinstance(f, Until):
        return {"op": "until", "left": formula_to_json(f.left), "right": formula_to_json(f.right)}
    raise TypeError(f"not a formula: {f!r}")


def formula_from_json(data: dict, alphabet: Alphabet) -> Formula:
    op = data.get("op")
    if op == "true":
        return TOP
    if op == "prop":
        return Atom(alphabet[data["name"]])
    if op == "not":
        return Not(formula_from_json(data["arg"], alphabet))
    if op == "next":
        return Next(formula_from_json(data["arg"], alphabet))
    if op == "eventually":
        return Eventually(formula_from_json(data["arg"], alphabet))
    binary = {"and": And, "or": Or, "until": Until}
    if op in binary:
        return binary[op](formula_from_json(data["left"], alphabet),
                          formula_from_json(data["right"], alphabet))
    raise ValueError(f"bad formula json node: {data!r}")


def prop_to_json(p: Prop) -> dict:
    out = {"name": p.name, "kind": p.kind}
    if p.skill is not None:
        out["skill"] = {k: v for k, v in
                        [("skill", p.skill.skill), ("robot", p.skill.robot),
                         ("obj", p.skill.obj), ("target", p.skill.target)]
                        if v is not None}
    if p.child is not None:
        out["child"] = p.child
    return out


def prop_from_json(data: dict) -> Prop:
    skill = None
    if "skill" in data:
        s = data["skill"]
        skill = SkillRef(s["skill"], s.get("robot"), s.get("obj"), s.get("target"))
    return Prop(data["name"], data.get("kind", "atomic"), skill, data.get("child"))
