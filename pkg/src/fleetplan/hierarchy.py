"""Hierarchical specifications: levels of flat formulas where higher levels
treat lower ones as completion propositions.

A node at level k < K may mention only done-props of level k+1 nodes; atomic
skill propositions live at the lowest level only; every non-root node has
exactly one parent.  Completion is event-based: each completed node emits one
done-prop step that its parent's automaton consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from .automaton import Nfa, to_nfa
from .ltl import (
    Alphabet,
    Formula,
    Prop,
    Trace,
    atoms_of,
    formula_from_json,
    formula_to_json,
    normalize_co_safe,
    prop_from_json,
    prop_to_json,
)


class UnknownNode(KeyError):
    pass


class AlreadyDone(ValueError):
    pass


def done_prop_name(node_name: str) -> str:
    return f"done_{node_name}"


@dataclass(frozen=True)
class SpecNode:
    name: str
    level: int  # 1-based, root at level 1
    index: int  # 1-based position within the level
    formula: Formula
    alphabet: Alphabet
    children: Tuple[str, ...]  # names of the nodes this formula composes
    nfa: Nfa

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class Violation:
    rule: str
    node: str
    message: str


class HierSpec:
    """Validated-on-demand hierarchy; immutable once built."""

    def __init__(self, nodes: Mapping[str, SpecNode], root: str):
        self.nodes = dict(nodes)
        self.root = root
        self.parent: Dict[str, str] = {}
        for node in self.nodes.values():
            for child in node.children:
                self.parent[child] = node.name
        self.leaves: Tuple[str, ...] = tuple(
            sorted(n.name for n in self.nodes.values() if n.is_leaf))
        self.depth = max((n.level for n in self.nodes.values()), default=0)

    def __getitem__(self, name: str) -> SpecNode:
        try:
            return self.nodes[name]
        except KeyError:
            raise UnknownNode(name) from None

    def ancestors(self, name: str) -> List[str]:
        out = []
        while name in self.parent:
            name = self.parent[name]
            out.append(name)
        return out

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {
                    "name": n.name,
                    "level": n.level,
                    "index": n.index,
                    "formula": formula_to_json(n.formula),
                    "alphabet": [prop_to_json(p) for p in n.alphabet],
                    "children": list(n.children),
                }
                for n in sorted(self.nodes.values(), key=lambda n: (n.level, n.index))
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "HierSpec":
        nodes = {}
        for entry in data["nodes"]:
            alphabet = Alphabet(prop_from_json(p) for p in entry["alphabet"])
            formula = normalize_co_safe(formula_from_json(entry["formula"], alphabet))
            nodes[entry["name"]] = SpecNode(
                name=entry["name"],
                level=entry["level"],
                index=entry["index"],
                formula=formula,
                alphabet=alphabet,
                children=tuple(entry["children"]),
                nfa=to_nfa(formula, alphabet),
            )
        return cls(nodes, data["root"])


def build_spec(root_name: str, formulas: Mapping[str, Formula],
               leaf_alphabets: Mapping[str, Alphabet],
               levels: Optional[Mapping[str, int]] = None) -> HierSpec:
    """Assemble a HierSpec from formulas.

    Composite nodes are those whose formula mentions done-props of other
    given nodes; their alphabets are derived.  ``levels`` may pin levels
    explicitly, otherwise they are computed from the child graph.
    """
    children: Dict[str, Tuple[str, ...]] = {}
    for name, formula in formulas.items():
        mentioned = atoms_of(formula)
        kids = tuple(sorted(other for other in formulas
                            if other != name and done_prop_name(other) in mentioned))
        children[name] = kids

    def level_of(name: str, seen=()) -> int:
        if levels is not None and name in levels:
            return levels[name]
        if name in seen:
            raise ValueError(f"hierarchy cycle through {name!r}")
        if not children[name]:
            return 1
        return 1 + max(level_of(k, seen + (name,)) for k in children[name])

    heights = {name: level_of(name) for name in formulas}
    depth = max(heights.values())
    nodes = {}
    index_per_level: Dict[int, int] = {}
    for name in formulas:
        level = depth - heights[name] + 1 if levels is None else levels[name]
        index_per_level[level] = index_per_level.get(level, 0) + 1
        if children[name]:
            alphabet = Alphabet(
                Prop(done_prop_name(k), kind="composite", child=k) for k in children[name])
        else:
            alphabet = leaf_alphabets[name]
        formula = normalize_co_safe(formulas[name])
        nodes[name] = SpecNode(
            name=name,
            level=level,
            index=index_per_level[level],
            formula=formula,
            alphabet=alphabet,
            children=children[name],
            nfa=to_nfa(formula, alphabet),
        )
    return HierSpec(nodes, root_name)


def validate(spec: HierSpec) -> List[Violation]:
    """All hierarchy-rule violations, not just the first."""
    out: List[Violation] = []
    depth = spec.depth
    by_name = spec.nodes

    if spec.root not in by_name:
        return [Violation("root", spec.root, "root node missing")]
    if by_name[spec.root].level != 1:
        out.append(Violation("root", spec.root, "root must sit at level 1"))
    roots = [n.name for n in by_name.values() if n.level == 1]
    for name in roots:
        if name != spec.root:
            out.append(Violation("forest", name, "level-1 node other than the root"))

    parents: Dict[str, List[str]] = {}
    for node in by_name.values():
        for child in node.children:
            parents.setdefault(child, []).append(node.name)
            if child not in by_name:
                out.append(Violation("edges", node.name, f"unknown child {child!r}"))
            elif by_name[child].level != node.level + 1:
                out.append(Violation(
                    "level-structure", node.name,
                    f"child {child!r} is at level {by_name[child].level}, expected {node.level + 1}"))

    for node in by_name.values():
        # composition rule: non-lowest levels mention only done-props of their children
        if node.level < depth:
            for prop in node.alphabet:
                if prop.kind != "composite":
                    out.append(Violation(
                        "atomic-placement", node.name,
                        f"atomic prop {prop.name!r} above the lowest level"))
            if node.is_leaf:
                out.append(Violation(
                    "level-structure", node.name,
                    f"leaf at level {node.level} but the hierarchy is {depth} deep"))
        else:
            for prop in node.alphabet:
                if prop.kind == "composite":
                    out.append(Violation(
                        "atomic-placement", node.name,
                        "composite prop at the lowest level"))
        # single-parent rule
        if node.name != spec.root:
            ps = parents.get(node.name, [])
            if len(ps) == 0:
                out.append(Violation("single-parent", node.name, "node included in no formula"))
            elif len(ps) > 1:
                out.append(Violation(
                    "single-parent", node.name,
                    f"node included in {len(ps)} formulas: {sorted(ps)}"))
    return out


# --- completion tracking ---------------------------------------------------

@dataclass(frozen=True)
class CompletionState:
    """Which nodes are done and where every composite automaton stands.

    Frontiers are stored as a sorted tuple so the state is hashable and can
    key memo tables.
    """

    done: FrozenSet[str]
    frontiers: Tuple[Tuple[str, FrozenSet[int]], ...]

    def frontier(self, name: str) -> FrozenSet[int]:
        for key, value in self.frontiers:
            if key == name:
                return value
        raise UnknownNode(name)

    def with_frontier(self, name: str, value: FrozenSet[int]) -> "CompletionState":
        updated = tuple((k, value if k == name else v) for k, v in self.frontiers)
        return CompletionState(self.done, updated)


def initial_completion(spec: HierSpec) -> CompletionState:
    frontiers = tuple(
        (name, spec[name].nfa.initial)
        for name in sorted(spec.nodes)
        if not spec[name].is_leaf)
    return CompletionState(frozenset(), frontiers)


def is_root_done(spec: HierSpec, cs: CompletionState) -> bool:
    return spec.root in cs.done


def advance(spec: HierSpec, cs: CompletionState, leaf: str) -> CompletionState:
    """Mark a leaf done and cascade completion events up the hierarchy."""
    node = spec[leaf]
    if not node.is_leaf:
        raise ValueError(f"{leaf!r} is not a leaf")
    if leaf in cs.done:
        raise AlreadyDone(leaf)
    done = set(cs.done)
    out = cs
    current = leaf
    done.add(leaf)
    while current in spec.parent:
        parent = spec.parent[current]
        if parent in done:
            break
        pnode = spec[parent]
        symbol = frozenset({done_prop_name(current)})
        frontier = pnode.nfa.step(out.frontier(parent), symbol)
        out = out.with_frontier(parent, frontier)
        if frontier & pnode.nfa.accepting:
            done.add(parent)
            current = parent
        else:
            break
    return CompletionState(frozenset(done), out.frontiers)


def _dead_ancestor(spec: HierSpec, cs: CompletionState, leaf: str) -> bool:
    for name in spec.ancestors(leaf):
        if name not in cs.done and not cs.frontier(name):
            return True
    return False


def mission_completable(spec: HierSpec, cs: CompletionState,
                        _memo: Optional[dict] = None) -> bool:
    """Whether some completion order of the remaining leaves finishes the
    root without killing any composite automaton."""
    if _memo is None:
        _memo = {}
    if is_root_done(spec, cs):
        return True
    key = cs
    if key in _memo:
        return _memo[key]
    _memo[key] = False  # cycle guard; states only shrink so cycles cannot help
    for leaf in spec.leaves:
        if leaf in cs.done:
            continue
        nxt = advance(spec, cs, leaf)
        if _dead_ancestor(spec, nxt, leaf):
            continue
        if mission_completable(spec, nxt, _memo):
            _memo[key] = True
            return True
    return False


def eligible_leaves(spec: HierSpec, cs: CompletionState) -> FrozenSet[str]:
    """Leaves that may be completed next without stranding the mission."""
    if is_root_done(spec, cs):
        return frozenset()
    memo: dict = {}
    out = set()
    for leaf in spec.leaves:
        if leaf in cs.done:
            continue
        nxt = advance(spec, cs, leaf)
        if _dead_ancestor(spec, nxt, leaf):
            continue
        if mission_completable(spec, nxt, memo):
            out.add(leaf)
    return frozenset(out)


def completion_trace(order: Iterable[str]) -> Trace:
    """Event trace of a completion order: one done-prop per step."""
    return Trace(tuple(frozenset({done_prop_name(name)}) for name in order))
