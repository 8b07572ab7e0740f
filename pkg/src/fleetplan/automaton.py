"""Compilation of co-safe finite-trace formulas to NFAs with symbolic guards.

States are canonical residual formulas: the successor of a state under a
symbol is what remains to be satisfied after reading that symbol.  Guards
are conjunctions of literals over the alphabet rather than explicit symbol
subsets, so the automaton stays small while the alphabet grows with
robots x objects.

The decomposition set marks states where a task trace may be cut and
resumed by another agent: such a state must carry an idle self-loop (a
self-transition satisfied by the all-false symbol), so that doing nothing
at the seam cannot violate progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .ltl import (
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
    accepts_empty,
    atoms_of,
    format_formula,
    is_normalized,
    normalize_co_safe,
)


class NotPruned(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class GuardLiteral:
    prop: str
    polarity: bool

    def __str__(self):
        return self.prop if self.polarity else "!" + self.prop


@dataclass(frozen=True)
class Guard:
    """Conjunction of literals; the empty conjunction is true."""

    literals: FrozenSet[GuardLiteral] = frozenset()

    def __post_init__(self):
        props = [lit.prop for lit in self.literals]
        if len(props) != len(set(props)):
            raise ValueError(f"guard repeats a proposition: {self}")

    @classmethod
    def true(cls) -> "Guard":
        return cls()

    @classmethod
    def positive(cls, prop: str) -> "Guard":
        return cls(frozenset({GuardLiteral(prop, True)}))

    @classmethod
    def negative(cls, prop: str) -> "Guard":
        return cls(frozenset({GuardLiteral(prop, False)}))

    def conjoin(self, other: "Guard") -> Optional["Guard"]:
        """Conjunction, or None when the two guards contradict."""
        merged: Dict[str, bool] = {lit.prop: lit.polarity for lit in self.literals}
        for lit in other.literals:
            if merged.get(lit.prop, lit.polarity) != lit.polarity:
                return None
            merged[lit.prop] = lit.polarity
        return Guard(frozenset(GuardLiteral(p, pol) for p, pol in merged.items()))

    def satisfied_by(self, symbol: FrozenSet[str]) -> bool:
        return all((lit.prop in symbol) == lit.polarity for lit in self.literals)

    @property
    def idle_satisfiable(self) -> bool:
        """True when the all-false symbol satisfies this guard."""
        return all(not lit.polarity for lit in self.literals)

    def props(self) -> FrozenSet[str]:
        return frozenset(lit.prop for lit in self.literals)

    def __str__(self):
        if not self.literals:
            return "T"
        return " & ".join(str(lit) for lit in sorted(self.literals, key=lambda l: (l.prop, not l.polarity)))


Transition = Tuple[int, Guard, int]

_NONEMPTY = Eventually(TOP)  # satisfied by every nonempty trace, not by the empty one


def _flatten(f: Formula, cls) -> List[Formula]:
    if isinstance(f, cls):
        return _flatten(f.left, cls) + _flatten(f.right, cls)
    return [f]


def _rebuild(parts: List[Formula], cls) -> Formula:
    out = parts[0]
    for p in parts[1:]:
        out = cls(out, p)
    return out


def canonical(f: Formula) -> Formula:
    """Order-insensitive canonical form used for state identity.

    Flattens &/| chains, drops redundant T conjuncts and the nonempty
    marker next to conjuncts that already reject the empty trace.
    """
    if isinstance(f, (Top, Atom, Not)):
        return f
    if isinstance(f, Next):
        return Next(canonical(f.arg))
    if isinstance(f, Eventually):
        return Eventually(canonical(f.arg))
    if isinstance(f, Until):
        return Until(canonical(f.left), canonical(f.right))
    if isinstance(f, And):
        parts = []
        for part in _flatten(f, And):
            c = canonical(part)
            if isinstance(c, Top):
                continue
            parts.extend(p for p in _flatten(c, And) if not isinstance(p, Top))
        seen, uniq = set(), []
        for p in parts:
            key = format_formula(p)
            if key not in seen:
                seen.add(key)
                uniq.append(p)
        # T-nonempty is implied by any conjunct the empty trace fails
        if _NONEMPTY in uniq and any(p != _NONEMPTY and not accepts_empty(p) for p in uniq):
            uniq.remove(_NONEMPTY)
        if not uniq:
            return TOP
        uniq.sort(key=format_formula)
        return _rebuild(uniq, And)
    if isinstance(f, Or):
        parts = []
        for part in _flatten(f, Or):
            c = canonical(part)
            if isinstance(c, Top):
                return TOP
            parts.extend(_flatten(c, Or))
        seen, uniq = set(), []
        for p in parts:
            key = format_formula(p)
            if key not in seen:
                seen.add(key)
                uniq.append(p)
        uniq.sort(key=format_formula)
        return _rebuild(uniq, Or)
    raise TypeError(f"not a formula: {f!r}")


def _derivatives(f: Formula) -> List[Tuple[Guard, Formula]]:
    """(guard, residual) pairs: reading one symbol that satisfies the guard
    leaves the residual to be satisfied by the remaining suffix."""
    if isinstance(f, Top):
        return [(Guard.true(), TOP)]
    if isinstance(f, Atom):
        return [(Guard.positive(f.prop.name), TOP)]
    if isinstance(f, Not):
        if not isinstance(f.arg, Atom):
            raise ValueError(f"negation above a non-proposition: {f}")
        return [(Guard.negative(f.arg.prop.name), TOP)]
    if isinstance(f, Next):
        # a successor position must exist, hence the nonempty marker
        return [(Guard.true(), canonical(And(f.arg, _NONEMPTY)))]
    if isinstance(f, Eventually):
        out = list(_derivatives(f.arg))
        out.append((Guard.true(), f))
        return out
    if isinstance(f, Until):
        out = list(_derivatives(f.right))
        for guard, residual in _derivatives(f.left):
            out.append((guard, canonical(And(residual, f))))
        return out
    if isinstance(f, And):
        out = []
        for g1, r1 in _derivatives(f.left):
            for g2, r2 in _derivatives(f.right):
                g = g1.conjoin(g2)
                if g is not None:
                    out.append((g, canonical(And(r1, r2))))
        return out
    if isinstance(f, Or):
        return list(_derivatives(f.left)) + list(_derivatives(f.right))
    raise TypeError(f"not a formula: {f!r}")


class Nfa:
    """NFA over proposition-set symbols; immutable after construction."""

    def __init__(self, alphabet: Alphabet, n_states: int, initial: Iterable[int],
                 accepting: Iterable[int], transitions: Iterable[Transition],
                 decomposition: Iterable[int] = (), labels: Optional[Tuple[str, ...]] = None):
        self.alphabet = alphabet
        self.n_states = n_states
        self.initial = frozenset(initial)
        self.accepting = frozenset(accepting)
        self.transitions = tuple(transitions)
        self.decomposition = frozenset(decomposition)
        self.labels = labels if labels is not None else tuple(str(i) for i in range(n_states))
        states = range(n_states)
        for src, guard, dst in self.transitions:
            if src not in states or dst not in states:
                raise ValueError(f"transition endpoint outside states: {(src, dst)}")
            extra = guard.props() - alphabet.names
            if extra:
                raise ValueError(f"guard mentions non-alphabet props {sorted(extra)}")
        for name, group in (("initial", self.initial), ("accepting", self.accepting),
                            ("decomposition", self.decomposition)):
            if not group <= set(states):
                raise ValueError(f"{name} states outside Q")
        self._out: List[List[Tuple[Guard, int]]] = [[] for _ in states]
        self._into: List[List[Tuple[Guard, int]]] = [[] for _ in states]
        for src, guard, dst in self.transitions:
            self._out[src].append((guard, dst))
            self._into[dst].append((guard, src))

    def successors(self, state: int) -> List[Tuple[Guard, int]]:
        return self._out[state]

    def step(self, frontier: FrozenSet[int], symbol: FrozenSet[str]) -> FrozenSet[int]:
        out = set()
        for q in frontier:
            for guard, dst in self._out[q]:
                if guard.satisfied_by(symbol):
                    out.add(dst)
        return frozenset(out)

    def accepts(self, trace: Trace) -> bool:
        frontier = self.initial
        for symbol in trace.steps:
            if not frontier:
                return False
            frontier = self.step(frontier, symbol)
        return bool(frontier & self.accepting)

    def reachable(self) -> FrozenSet[int]:
        seen = set(self.initial)
        stack = list(self.initial)
        while stack:
            q = stack.pop()
            for _, dst in self._out[q]:
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        return frozenset(seen)

    def coreachable(self) -> FrozenSet[int]:
        seen = set(self.accepting)
        stack = list(self.accepting)
        while stack:
            q = stack.pop()
            for _, src in self._into[q]:
                if src not in seen:
                    seen.add(src)
                    stack.append(src)
        return frozenset(seen)

    def pruned(self) -> "Nfa":
        """Restrict to useful states (reachable and co-reachable); the
        initial states are always kept so the structure stays well-formed."""
        keep = sorted((self.reachable() & self.coreachable()) | self.initial)
        remap = {old: new for new, old in enumerate(keep)}
        kept = set(keep)
        transitions = [(remap[s], g, remap[d]) for s, g, d in self.transitions
                       if s in kept and d in kept]
        return Nfa(self.alphabet, len(keep),
                   [remap[q] for q in self.initial],
                   [remap[q] for q in self.accepting if q in kept],
                   transitions,
                   decomposition=(),
                   labels=tuple(self.labels[q] for q in keep))

    def is_pruned(self) -> bool:
        useful = (self.reachable() & self.coreachable()) | self.initial
        return useful == frozenset(range(self.n_states))

    def accepting_distances(self) -> List[float]:
        """Minimum number of transitions from each state to an accepting
        state (inf when none is reachable)."""
        dist = [float("inf")] * self.n_states
        frontier = list(self.accepting)
        for q in frontier:
            dist[q] = 0
        while frontier:
            nxt = []
            for q in frontier:
                for _, src in self._into[q]:
                    if dist[src] > dist[q] + 1:
                        dist[src] = dist[q] + 1
                        nxt.append(src)
            frontier = nxt
        return dist

    def to_json(self) -> dict:
        return {
            "alphabet": sorted(self.alphabet.names),
            "n_states": self.n_states,
            "initial": sorted(self.initial),
            "accepting": sorted(self.accepting),
            "decomposition": sorted(self.decomposition),
            "labels": list(self.labels),
            "transitions": [
                {"src": s, "dst": d,
                 "guard": [{"prop": lit.prop, "polarity": lit.polarity}
                           for lit in sorted(g.literals, key=lambda l: l.prop)]}
                for s, g, d in self.transitions
            ],
        }

    def to_dot(self) -> str:
        lines = ["digraph nfa {", "  rankdir=LR;"]
        for q in range(self.n_states):
            shape = "doublecircle" if q in self.accepting else "circle"
            style = ', style="bold"' if q in self.decomposition else ""
            lines.append(f'  q{q} [shape={shape}, label="{q}: {self.labels[q]}"{style}];')
        for q in self.initial:
            lines.append(f'  start{q} [shape=point]; start{q} -> q{q};')
        for s, g, d in self.transitions:
            lines.append(f'  q{s} -> q{d} [label="{g}"];')
        lines.append("}")
        return "\n".join(lines)


def to_nfa(f: Formula, alphabet: Alphabet, prune: bool = True) -> Nfa:
    """Compile a co-safe formula; the result accepts exactly the finite
    traces satisfying it.  Decomposition states are computed, not supplied."""
    if not is_normalized(f):
        f = normalize_co_safe(f)
    extra = atoms_of(f) - alphabet.names
    if extra:
        raise ValueError(f"formula mentions non-alphabet props {sorted(extra)}")

    start = canonical(f)
    index: Dict[str, int] = {format_formula(start): 0}
    formulas: List[Formula] = [start]
    transitions: List[Transition] = []
    queue = [0]
    while queue:
        src = queue.pop(0)
        seen_here = set()
        for guard, residual in _derivatives(formulas[src]):
            key = format_formula(residual)
            if key not in index:
                index[key] = len(formulas)
                formulas.append(residual)
                queue.append(index[key])
            edge = (guard, index[key])
            if edge not in seen_here:
                seen_here.add(edge)
                transitions.append((src, guard, index[key]))

    accepting = [i for i, g in enumerate(formulas) if accepts_empty(g)]
    nfa = Nfa(alphabet, len(formulas), [0], accepting, transitions,
              labels=tuple(format_formula(g) for g in formulas))
    if prune:
        nfa = nfa.pruned()
    return Nfa(nfa.alphabet, nfa.n_states, nfa.initial, nfa.accepting,
               nfa.transitions, decomposition=decomposition_set(nfa), labels=nfa.labels)


def decomposition_set(nfa: Nfa) -> FrozenSet[int]:
    """States where a trace may be cut and handed over: useful states with
    an idle self-loop, so a fresh agent may do nothing without violating
    progress."""
    if not nfa.is_pruned():
        raise NotPruned("decomposition set needs a pruned automaton")
    useful = nfa.reachable() & nfa.coreachable()
    out = set()
    for src, guard, dst in nfa.transitions:
        if src == dst and src in useful and guard.idle_satisfiable:
            out.add(src)
    return frozenset(out)


def all_symbols(alphabet: Alphabet) -> List[FrozenSet[str]]:
    names = sorted(alphabet.names)
    if len(names) > 4:
        raise TooLarge(f"alphabet of {len(names)} props is over the enumeration bound")
    out = []
    for mask in range(1 << len(names)):
        out.append(frozenset(n for i, n in enumerate(names) if mask >> i & 1))
    return out


def enumerate_language(nfa: Nfa, max_len: int) -> set:
    """Exact accepted-trace set up to max_len; exhaustive, so bounded to
    alphabets of <= 4 props and max_len <= 5."""
    if max_len > 5:
        raise TooLarge(f"max_len {max_len} over the enumeration bound")
    symbols = all_symbols(nfa.alphabet)
    accepted = set()

    def walk(prefix: tuple, frontier: FrozenSet[int]):
        if frontier & nfa.accepting:
            accepted.add(Trace(prefix))
        if len(prefix) == max_len or not frontier:
            return
        for symbol in symbols:
            walk(prefix + (symbol,), nfa.step(frontier, symbol))

    walk((), nfa.initial)
    return accepted
