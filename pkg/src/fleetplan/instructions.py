"""Deterministic instruction-to-hierarchy translator over a small grammar,
plus an optional remote translator client.

Grammar (case-insensitive, articles optional):

    clause  := "give" <person> <object>  |  "give" <object> "to" <person>
             | "put" <object> "on"|"at" <location>
    command := clause (("and" | "then") clause)*

"and" joins clauses order-free; "then" sequences everything before it ahead
of everything after it.  Each clause becomes one leaf of a two-level
hierarchy; leaves get fresh names so repeated goals stay distinct.
"""

from __future__ import annotations

import itertools
import json
import re
import urllib.request
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import skills
from .automaton import to_nfa
from .hierarchy import (
    CompletionState,
    HierSpec,
    SpecNode,
    build_spec,
    done_prop_name,
    initial_completion,
    validate,
)
from .ltl import (
    TOP,
    Alphabet,
    And,
    Atom,
    Eventually,
    Formula,
    Prop,
)
from .skills import deliver_prop, pick_prop, place_prop


class EmptyInstruction(ValueError):
    pass


class UnresolvedSymbol(ValueError):
    def __init__(self, symbol: str):
        super().__init__(f"nothing in the scene matches {symbol!r}")
        self.symbol = symbol


class IdCollision(ValueError):
    pass


class BadInstruction(ValueError):
    pass


@dataclass(frozen=True)
class Clause:
    verb: str   # "give" | "put"
    obj: str
    target: str  # person for give, location for put


@dataclass(frozen=True)
class Instruction:
    raw: str
    groups: Tuple[Tuple[Clause, ...], ...]  # sequential groups of order-free clauses


_ARTICLES = {"the", "please"}  # "a"/"an" stay: they may name a person


def _words(text: str) -> List[str]:
    return [w for w in re.findall(r"[a-zA-Z_0-9]+", text.lower()) if w not in _ARTICLES]


def parse_instruction(text: str) -> Instruction:
    words = _words(text)
    if not words:
        raise EmptyInstruction("no clauses found")
    groups: List[List[Clause]] = [[]]
    clause: List[str] = []

    def close_clause():
        if not clause:
            return
        if clause[0] == "give":
            rest = clause[1:]
            if "to" in rest:  # "give <object..> to <person>"
                split = rest.index("to")
                obj, person = rest[:split], rest[split + 1:]
                if not obj or not person:
                    raise BadInstruction(f"cannot read clause {' '.join(clause)!r}")
                groups[-1].append(Clause("give", "_".join(obj), "_".join(person)))
            else:  # "give <person> <object..>"
                if len(rest) < 2:
                    raise BadInstruction(f"cannot read clause {' '.join(clause)!r}")
                groups[-1].append(Clause("give", "_".join(rest[1:]), rest[0]))
        elif clause[0] == "put":
            rest = clause[1:]
            for sep in ("on", "at", "onto"):
                if sep in rest:
                    split = rest.index(sep)
                    obj, loc = rest[:split], rest[split + 1:]
                    if obj and loc:
                        groups[-1].append(Clause("put", "_".join(obj), "_".join(loc)))
                        break
            else:
                raise BadInstruction(f"cannot read clause {' '.join(clause)!r}")
        else:
            raise BadInstruction(f"unknown verb {clause[0]!r}")
        clause.clear()

    for word in words:
        if word == "and":
            close_clause()
        elif word == "then":
            close_clause()
            if groups[-1]:
                groups.append([])
        else:
            clause.append(word)
    close_clause()
    groups = [g for g in groups if g]
    if not groups:
        raise EmptyInstruction("no clauses found")
    return Instruction(text, tuple(tuple(g) for g in groups))


@dataclass(frozen=True)
class SceneSymbols:
    """World identifiers an instruction can resolve against."""

    objects: Tuple[str, ...]
    humans: Tuple[str, ...]
    locations: Tuple[str, ...] = ()

    def resolve(self, label: str, pool: Sequence[str]) -> str:
        exact = [x for x in pool if x.lower() == label.lower()]
        if exact:
            return exact[0]
        raise UnresolvedSymbol(label)


class NameSource:
    """Fresh node names, scoped per run so logs are reproducible."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)

    def leaf(self) -> str:
        return f"task{next(self._counter)}"

    def mission(self) -> str:
        return f"mission{next(self._counter)}"

    def lift(self, child: str) -> str:
        return f"lift_{child}_{next(self._counter)}"


_default_names = NameSource()


def _leaf_for(clause: Clause, symbols: SceneSymbols,
              names: NameSource) -> Tuple[str, Formula, Alphabet]:
    if clause.verb == "give":
        obj = symbols.resolve(clause.obj, symbols.objects)
        person = symbols.resolve(clause.target, symbols.humans)
        props = [pick_prop(obj), deliver_prop(person, obj)]
    else:
        obj = symbols.resolve(clause.obj, symbols.objects)
        loc = symbols.resolve(clause.target, symbols.locations)
        props = [pick_prop(obj), place_prop(obj, loc)]
    alphabet = Alphabet(props)
    # fetch it, then finish it: F(acquire & F accomplish)
    formula = Eventually(And(Atom(props[0]), Eventually(Atom(props[1]))))
    return names.leaf(), formula, alphabet


def _root_formula(groups: Sequence[Sequence[str]], done: Dict[str, Prop]) -> Formula:
    """Order-free within a group; consecutive groups strictly ordered.

    Pure chains compile to the nested form F(d1 & F(d2 & ...)); the general
    mix adds one coverage term per leaf plus one ordering term per
    consecutive pair.
    """
    if all(len(g) == 1 for g in groups):
        chain: Formula = Eventually(Atom(done[groups[-1][0]]))
        for (name,) in reversed(list(groups)[:-1]):
            chain = Eventually(And(Atom(done[name]), chain))
        return chain
    terms: List[Formula] = []
    for group in groups:
        for name in group:
            terms.append(Eventually(Atom(done[name])))
    for before, after in zip(groups, groups[1:]):
        for x in before:
            for y in after:
                terms.append(Eventually(And(Atom(done[x]),
                                            Eventually(Atom(done[y])))))
    out = terms[0]
    for term in terms[1:]:
        out = And(out, term)
    return out


def translate(instr: Instruction, symbols: SceneSymbols,
              root_name: Optional[str] = None,
              names: Optional[NameSource] = None) -> HierSpec:
    """Two-level hierarchy: one leaf per clause, a root over done-props."""
    names = names or _default_names
    if root_name is None:
        root_name = names.mission()
    leaf_groups: List[List[str]] = []
    formulas: Dict[str, Formula] = {}
    alphabets: Dict[str, Alphabet] = {}
    for group in instr.groups:
        group_names = []
        for clause in group:
            name, formula, alphabet = _leaf_for(clause, symbols, names)
            formulas[name] = formula
            alphabets[name] = alphabet
            group_names.append(name)
        leaf_groups.append(group_names)
    done = {name: Prop(done_prop_name(name), kind="composite", child=name)
            for name in formulas}
    root = _root_formula(leaf_groups, done)
    spec = build_spec(root_name, {root_name: root, **formulas}, alphabets,
                      levels={root_name: 1, **{n: 2 for n in formulas}})
    problems = validate(spec)
    if problems:
        raise BadInstruction(f"translated hierarchy is invalid: {problems}")
    return spec


def translate_text(text: str, symbols: SceneSymbols,
                   names: Optional[NameSource] = None) -> HierSpec:
    return translate(parse_instruction(text), symbols, names=names)


def _passthrough_node(name: str, child: str, level: int) -> "SpecNode":
    prop = Prop(done_prop_name(child), kind="composite", child=child)
    alphabet = Alphabet([prop])
    formula = Eventually(Atom(prop))
    return SpecNode(name=name, level=level, index=1, formula=formula,
                    alphabet=alphabet, children=(child,),
                    nfa=to_nfa(formula, alphabet))


def _pad_to_depth(spec: HierSpec, target: int, names: NameSource) -> HierSpec:
    """Inserts pass-through parents above the root until the hierarchy is
    ``target`` levels deep, keeping leaves on the lowest level."""
    if spec.depth == target:
        return spec
    shift = target - spec.depth
    nodes = {
        node.name: SpecNode(name=node.name, level=node.level + shift,
                            index=node.index, formula=node.formula,
                            alphabet=node.alphabet, children=node.children,
                            nfa=node.nfa)
        for node in spec.nodes.values()
    }
    child = spec.root
    root = spec.root
    for level in range(shift, 0, -1):
        name = names.lift(child)
        nodes[name] = _passthrough_node(name, child, level)
        child = name
        root = name
    return HierSpec(nodes, root)


def merge(existing: HierSpec, new: HierSpec, completion: CompletionState,
          names: Optional[NameSource] = None) -> Tuple[HierSpec, CompletionState]:
    """Joins the still-open obligations of a running mission with a new one.

    A finished (or empty) mission yields the new spec alone.  Otherwise a
    fresh super-root conjoins the two mission roots; every node keeps its
    name, formula and automaton (shallower trees get pass-through parents so
    leaves stay on one level), and the returned completion state carries all
    progress, so no internal ordering is ever re-derived.
    """
    names = names or _default_names
    overlap = set(existing.nodes) & set(new.nodes)
    if overlap:
        raise IdCollision(f"node names reused: {sorted(overlap)}")
    if existing.root in completion.done:
        return new, initial_completion(new)

    depth = max(existing.depth, new.depth)
    left = _pad_to_depth(existing, depth, names)
    right = _pad_to_depth(new, depth, names)

    super_name = names.mission()
    done_old = Prop(done_prop_name(left.root), kind="composite", child=left.root)
    done_new = Prop(done_prop_name(right.root), kind="composite", child=right.root)
    super_alphabet = Alphabet([done_old, done_new])
    super_formula = And(Eventually(Atom(done_old)), Eventually(Atom(done_new)))

    nodes: Dict[str, SpecNode] = {}
    for spec in (left, right):
        for node in spec.nodes.values():
            nodes[node.name] = SpecNode(
                name=node.name, level=node.level + 1, index=node.index,
                formula=node.formula, alphabet=node.alphabet,
                children=node.children, nfa=node.nfa)
    nodes[super_name] = SpecNode(
        name=super_name, level=1, index=1, formula=super_formula,
        alphabet=super_alphabet, children=(left.root, right.root),
        nfa=to_nfa(super_formula, super_alphabet))
    merged = HierSpec(nodes, super_name)

    frontiers = dict(completion.frontiers)
    for name in merged.nodes:
        node = merged[name]
        if not node.is_leaf and name not in frontiers:
            frontiers[name] = node.nfa.initial
    carried = CompletionState(completion.done,
                              tuple(sorted(frontiers.items())))
    return merged, carried


# --- remote translator (optional path) --------------------------------------

@dataclass
class TranslatorClient:
    """Single-request client for an external instruction translator.

    The remote service receives {"instruction", "symbols"} and must answer
    with the hierarchy JSON schema; anything that fails schema or hierarchy
    validation is rejected rather than planned.
    """

    endpoint: str
    timeout: float = 10.0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def translate(self, text: str, symbols: SceneSymbols) -> HierSpec:
        payload = json.dumps({
            "instruction": text,
            "symbols": {"objects": list(symbols.objects),
                        "humans": list(symbols.humans),
                        "locations": list(symbols.locations)},
        }).encode()
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            body = json.loads(response.read().decode())
        usage = body.get("usage", {})
        self.prompt_tokens += int(usage.get("prompt_tokens", 0))
        self.completion_tokens += int(usage.get("completion_tokens", 0))
        try:
            spec = HierSpec.from_json(body["spec"])
        except Exception as exc:
            raise BadInstruction(f"remote translation is not a valid hierarchy: {exc}")
        problems = validate(spec)
        if problems:
            raise BadInstruction(f"remote hierarchy fails validation: {problems}")
        return spec
