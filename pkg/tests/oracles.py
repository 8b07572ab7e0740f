"""Independent oracles shared by the test modules.

The semantic evaluator here works over the whole bounded trace universe with
numpy, independent of the automaton path; it is itself cross-checked against
the plain recursive evaluator on random samples.
"""

from __future__ import annotations

import random
from typing import Dict, List, Sequence, Tuple

import numpy as np

from fleetplan.ltl import (
    TOP,
    Alphabet,
    And,
    Atom,
    Eventually,
    Formula,
    Next,
    Not,
    Or,
    Top,
    Trace,
    Until,
)


def all_symbols(names: Sequence[str]) -> List[frozenset]:
    names = sorted(names)
    return [frozenset(n for i, n in enumerate(names) if mask >> i & 1)
            for mask in range(1 << len(names))]


class TraceUniverse:
    """All traces up to max_len over a small alphabet, indexed for
    vectorized semantics."""

    def __init__(self, names: Sequence[str], max_len: int):
        self.names = sorted(names)
        self.symbols = all_symbols(self.names)
        self.traces: List[Tuple[int, ...]] = [()]
        by_len = [[()]]
        for length in range(1, max_len + 1):
            layer = [prev + (s,) for prev in by_len[-1]
                     for s in range(len(self.symbols))]
            by_len.append(layer)
            self.traces.extend(layer)
        self.index: Dict[Tuple[int, ...], int] = {
            t: i for i, t in enumerate(self.traces)}
        self.lengths = np.array([len(t) for t in self.traces])
        # index of t[1:] for nonempty traces
        self.suffix = np.array([self.index[t[1:]] if t else 0 for t in self.traces])
        self.first_has = {
            name: np.array([bool(t) and name in self.symbols[t[0]]
                            for t in self.traces])
            for name in self.names}

    def to_trace(self, t: Tuple[int, ...]) -> Trace:
        return Trace(tuple(self.symbols[s] for s in t))

    def satisfying(self, f: Formula) -> set:
        vec = self.sat_vector(f)
        return {self.to_trace(t) for t, ok in zip(self.traces, vec) if ok}

    def sat_vector(self, f: Formula) -> np.ndarray:
        nonempty = self.lengths >= 1
        if isinstance(f, Top):
            return np.ones(len(self.traces), dtype=bool)
        if isinstance(f, Atom):
            return self.first_has[f.prop.name].copy()
        if isinstance(f, Not):
            return nonempty & ~self.sat_vector(f.arg)
        if isinstance(f, And):
            return self.sat_vector(f.left) & self.sat_vector(f.right)
        if isinstance(f, Or):
            return self.sat_vector(f.left) | self.sat_vector(f.right)
        if isinstance(f, Next):
            arg = self.sat_vector(f.arg)
            return (self.lengths >= 2) & arg[self.suffix]
        if isinstance(f, (Until, Eventually)):
            if isinstance(f, Eventually):
                left = np.ones(len(self.traces), dtype=bool)
                right = self.sat_vector(f.arg)
            else:
                left = self.sat_vector(f.left)
                right = self.sat_vector(f.right)
            out = np.zeros(len(self.traces), dtype=bool)
            # layer by length: a suffix is strictly shorter, so earlier layers
            # are already final
            order = np.argsort(self.lengths, kind="stable")
            for i in order:
                if self.lengths[i] == 0:
                    continue
                out[i] = right[i] or (left[i] and out[self.suffix[i]])
            return out
        raise TypeError(f"not a formula: {f!r}")


def random_co_safe(rng: random.Random, alphabet: Alphabet, depth: int = 4) -> Formula:
    """Random formula already in positive normal form."""
    props = list(alphabet)
    if depth == 0 or rng.random() < 0.25:
        roll = rng.random()
        if roll < 0.62:
            return Atom(rng.choice(props))
        if roll < 0.92:
            return Not(Atom(rng.choice(props)))
        return TOP
    op = rng.choices(["and", "or", "until", "eventually", "next"],
                     weights=[24, 24, 18, 24, 10])[0]
    if op == "and":
        return And(random_co_safe(rng, alphabet, depth - 1),
                   random_co_safe(rng, alphabet, depth - 1))
    if op == "or":
        return Or(random_co_safe(rng, alphabet, depth - 1),
                  random_co_safe(rng, alphabet, depth - 1))
    if op == "until":
        return Until(random_co_safe(rng, alphabet, depth - 1),
                     random_co_safe(rng, alphabet, depth - 1))
    if op == "eventually":
        return Eventually(random_co_safe(rng, alphabet, depth - 1))
    return Next(random_co_safe(rng, alphabet, depth - 1))


def enumerate_traces(names: Sequence[str], max_len: int):
    symbols = all_symbols(names)
    def walk(prefix, length):
        yield Trace(prefix)
        if length == max_len:
            return
        for s in symbols:
            yield from walk(prefix + (s,), length + 1)
    yield from walk((), 0)
