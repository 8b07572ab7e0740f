"""A* over the hierarchical team model.

The search returns a minimum-cost accepting edge path; the cost J is the sum
of every robot's action durations plus switch penalties.  A path is then
projected onto per-robot schedules with causal gates (per-leaf progress
chains, rendezvous joins, hierarchy eligibility), which yields the makespan.

Determinism: successor generation is sorted and heap ties break by insertion
order, so identical inputs produce identical plans.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .hierarchy import advance
from .team import Edge, TeamModel, TeamState


class Unsatisfiable(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SearchNode:
    """A team snapshot with its accumulated cost and the edge that led here."""

    state: TeamState
    g: float = 0.0
    parent: Optional["SearchNode"] = None
    edge: Optional[Edge] = None


@dataclass(frozen=True)
class PlanStep:
    edge: Edge
    robot: str
    start: float
    duration: float
    passive: bool = False  # the giver side of a joint handover slot


@dataclass(frozen=True)
class Plan:
    edges: Tuple[Edge, ...]
    steps: Tuple[PlanStep, ...]
    cost: float       # J, sum of edge costs
    makespan: float

    @property
    def per_robot(self) -> Dict[str, List[PlanStep]]:
        out: Dict[str, List[PlanStep]] = {}
        for step in self.steps:
            out.setdefault(step.robot, []).append(step)
        return out

    def same_edges(self, other: "Plan") -> bool:
        return self.edges == other.edges

    def to_json(self) -> dict:
        return {
            "cost": self.cost,
            "makespan": self.makespan,
            "edges": [e.to_json() for e in self.edges],
            "steps": [
                {"robot": s.robot, "start": round(s.start, 6),
                 "duration": round(s.duration, 6), "passive": s.passive,
                 "label": s.edge.label(), "leaf": s.edge.leaf,
                 "kind": s.edge.kind}
                for s in self.steps
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def plan(model: TeamModel, start: Optional[TeamState] = None) -> Plan:
    """Optimal accepting path by A* with an admissible automaton-distance
    heuristic; raises Unsatisfiable when no accepting path exists."""
    init = start if start is not None else model.initial_state()
    if model.is_goal(init):
        return build_schedule(model, (), init)

    counter = itertools.count()
    h0 = model.heuristic(init)
    if h0 == float("inf"):
        raise Unsatisfiable("a leaf automaton cannot reach acceptance")
    # entries carry their g so stale pops are skipped; a state reached again
    # with a lower g is re-expanded, which keeps the result optimal even if
    # the heuristic loses consistency in a corner case.  Ties on f prefer the
    # deeper state, which crosses equal-cost interleaving plateaus quickly;
    # the counter keeps the order deterministic.
    open_heap: List[Tuple[float, float, int, float, TeamState]] = [
        (h0, 0.0, next(counter), 0.0, init)]
    g_best: Dict[TeamState, float] = {init: 0.0}
    parent: Dict[TeamState, Tuple[TeamState, Edge]] = {}

    while open_heap:
        f, _, _, g, state = heapq.heappop(open_heap)
        if g > g_best.get(state, float("inf")):
            continue  # superseded entry
        if model.is_goal(state):
            edges = []
            cur = state
            while cur in parent:
                prev, edge = parent[cur]
                edges.append(edge)
                cur = prev
            edges.reverse()
            return build_schedule(model, tuple(edges), init)
        for edge, succ in model.successors(state):
            ng = g + edge.cost
            if ng < g_best.get(succ, float("inf")) - 1e-12:
                h = model.heuristic(succ)
                if h == float("inf"):
                    continue
                g_best[succ] = ng
                parent[succ] = (state, edge)
                heapq.heappush(open_heap, (ng + h, -ng, next(counter), ng, succ))
    raise Unsatisfiable("no accepting path through the team model")


def replan_suffix(model: TeamModel, current: TeamState) -> Plan:
    """Optimal plan for the remaining horizon from an observed team state;
    completed leaves are excluded through the completion state it carries."""
    return plan(model, start=current)


def brute_force_optimal(model: TeamModel, start: Optional[TeamState] = None,
                        depth_bound: int = 12) -> float:
    """Exhaustive minimum cost, for certifying the A* result on small models."""
    if len(model.order) > 2 or len(model.spec.leaves) > 2 or depth_bound > 14:
        raise TooLarge("brute force is limited to 2 robots, 2 leaves, depth 14")
    init = start if start is not None else model.initial_state()
    best = [float("inf")]
    seen: Dict[TeamState, float] = {}

    def dfs(state: TeamState, g: float, depth: int):
        if g >= best[0]:
            return
        if model.is_goal(state):
            best[0] = g
            return
        if depth == 0:
            return
        if seen.get(state, float("inf")) <= g:
            return
        seen[state] = g
        for edge, succ in model.successors(state):
            dfs(succ, g + edge.cost, depth - 1)

    dfs(init, 0.0, depth_bound)
    if best[0] == float("inf"):
        raise Unsatisfiable("no accepting path within the depth bound")
    return best[0]


# --- schedule projection ----------------------------------------------------

def build_schedule(model: TeamModel, edges: Tuple[Edge, ...],
                   start: TeamState) -> Plan:
    """Projects a serialized edge path onto per-robot timelines.

    Gates: a robot's edges are sequential; per-leaf automaton progress is
    sequential; a joint handover waits for both sides; entering a leaf waits
    until the hierarchy made it eligible (gate time found by scanning the
    completion events in time order).
    """
    robot_ready: Dict[str, float] = {
        rid: model.ready_hints.get(rid, 0.0) for rid in model.order}
    leaf_ready: Dict[str, float] = {}
    completions: List[Tuple[float, str]] = []  # (end time, completed leaf)
    steps: List[PlanStep] = []
    cost = 0.0

    def eligibility_gate(leaf: str) -> float:
        # replay recorded completions in time order and find the first point
        # at which the hierarchy admits this leaf
        cs = start.completion
        if leaf in model.eligible(cs):
            return 0.0
        for t, done_leaf in sorted(completions):
            cs = advance(model.spec, cs, done_leaf)
            if leaf in model.eligible(cs):
                return t
        return 0.0

    for edge in edges:
        cost += edge.cost
        if edge.kind == "action":
            leaf_gate = leaf_ready.get(edge.leaf, 0.0)
            begin = max(robot_ready[edge.robot], leaf_gate)
            if edge.action.kind == "handover_r2r":
                begin = max(begin, robot_ready.get(edge.partner, 0.0))
            end = begin + edge.cost
            steps.append(PlanStep(edge, edge.robot, begin, edge.cost))
            if edge.action.kind == "handover_r2r":
                steps.append(PlanStep(edge, edge.partner, begin, edge.cost, passive=True))
                robot_ready[edge.partner] = end
            robot_ready[edge.robot] = end
            leaf_ready[edge.leaf] = end
            if edge.completes:
                completions.append((end, edge.leaf))
        elif edge.kind in ("assign", "refocus", "release"):
            if edge.kind == "release":
                begin = robot_ready[edge.robot]
            else:
                target = edge.to_leaf if edge.kind == "refocus" else edge.leaf
                gate = eligibility_gate(target)
                begin = max(robot_ready[edge.robot], gate,
                            leaf_ready.get(target, 0.0) if edge.kind == "refocus" else gate)
            steps.append(PlanStep(edge, edge.robot, begin, 0.0))
            robot_ready[edge.robot] = begin
        elif edge.kind == "transfer":
            begin = max(robot_ready[edge.robot], robot_ready[edge.partner],
                        leaf_ready.get(edge.leaf, 0.0))
            steps.append(PlanStep(edge, edge.robot, begin, 0.0))
            robot_ready[edge.partner] = max(robot_ready[edge.partner], begin)
            leaf_ready[edge.leaf] = begin
        elif edge.kind == "rendezvous":
            begin = max(robot_ready[edge.robot], leaf_ready.get(edge.leaf, 0.0))
            steps.append(PlanStep(edge, edge.robot, begin, 0.0))
            # the receiver picks the leaf up no earlier than the giver parked
            robot_ready[edge.partner] = max(robot_ready[edge.partner], begin)
            leaf_ready[edge.leaf] = begin
        else:
            raise ValueError(f"unknown edge kind {edge.kind}")

    makespan = max([s.start + s.duration for s in steps], default=0.0)
    return Plan(tuple(edges), tuple(steps), cost, makespan)
