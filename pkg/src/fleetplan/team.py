"""The search space for simultaneous task allocation and planning.

Per leaf specification the model is the union over robots of (robot
transition system x leaf automaton); the hierarchy links those sub-spaces.
Four switch families connect them:

  * transfer    - sequential in-spec handoff of a leaf between robots at a
                  decomposition state (bidirectional, same automaton state);
  * rendezvous  - simultaneous in-spec transfer: the giver parks at the
                  rendezvous pose and stays frozen while the receiver takes
                  over and later fires the joint handover action;
  * refocus     - a robot moves between leaves at decomposition states while
                  keeping its physical state (bidirectional);
  * release     - a robot steps away from a leaf at a decomposition state,
                  leaving it paused; needed when it must free its hands to
                  receive for a different task;
  * assign      - a free robot takes up an eligible leaf; after completing a
                  leaf this is the progression step to the next one
                  (unidirectional).

States are full-team snapshots, hashable for closed-set dedup; expansion is
lazy through successors().  A model is read-only after construction and may
serve concurrent searches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from . import skills
from .geometry import NoOverlap, ReachSphere, inscribed_sphere, sample_and_score
from .hierarchy import (
    CompletionState,
    HierSpec,
    advance,
    eligible_leaves,
    initial_completion,
    is_root_done,
    mission_completable,
)
from .skills import Action


class NoCapableRobot(ValueError):
    def __init__(self, leaf: str, reason: str):
        super().__init__(f"leaf {leaf!r}: {reason}")
        self.leaf = leaf


class ActionDisabled(ValueError):
    pass


@dataclass(frozen=True)
class RobotSpec:
    id: str
    base: Tuple[float, float]
    reach: float
    weights: Mapping[str, float] = field(default_factory=lambda: dict(skills.DEFAULT_WEIGHTS))

    def weight(self, kind: str) -> float:
        return self.weights.get(kind, skills.DEFAULT_WEIGHTS[kind])


class RobotTS:
    """Discrete motion capabilities of one robot over the current world."""

    def __init__(self, spec: RobotSpec, graspable: FrozenSet[str]):
        self.spec = spec
        self.graspable = graspable

    @property
    def id(self) -> str:
        return self.spec.id

    def reach(self, point: Sequence[float]) -> bool:
        dx = point[0] - self.spec.base[0]
        dy = point[1] - self.spec.base[1]
        return dx * dx + dy * dy <= self.spec.reach ** 2

    def duration(self, kind: str, protocol_factor: float = 1.0) -> float:
        w = self.spec.weight(kind)
        if kind == skills.HANDOVER_R2R:
            w *= protocol_factor
        return w


@dataclass(frozen=True)
class WorldView:
    """The planner's belief of the physical world at plan time."""

    objects: Tuple[Tuple[str, Tuple[float, float], bool], ...]  # id, pos, graspable
    humans: Tuple[Tuple[str, Tuple[float, float]], ...]
    locations: Tuple[Tuple[str, Tuple[float, float]], ...] = ()

    def object_pos(self, obj: str) -> Tuple[float, float]:
        for oid, pos, _ in self.objects:
            if oid == obj:
                return pos
        raise KeyError(obj)

    def human_pos(self, human: str) -> Tuple[float, float]:
        for hid, pos in self.humans:
            if hid == human:
                return pos
        raise KeyError(human)

    def location_pos(self, loc: str) -> Tuple[float, float]:
        for lid, pos in self.locations:
            if lid == loc:
                return pos
        raise KeyError(loc)


def build_robot_ts(spec: RobotSpec, world: WorldView) -> RobotTS:
    graspable = frozenset(oid for oid, _, ok in world.objects if ok)
    return RobotTS(spec, graspable)


# --- team snapshots ---------------------------------------------------------

@dataclass(frozen=True)
class RobotPhys:
    payload: Optional[str] = None
    rendezvous_with: Optional[str] = None  # partner id while parked at the pose


@dataclass(frozen=True)
class ObjectPhys:
    holder: Optional[str]  # "robot:<id>" / "human:<id>" / None
    pos: Optional[Tuple[float, float]]  # None while held


@dataclass(frozen=True)
class TeamState:
    robots: Tuple[Tuple[str, RobotPhys], ...]             # sorted by robot id
    assignments: Tuple[Tuple[str, str], ...]              # (robot, leaf), sorted
    leaf_states: Tuple[Tuple[str, int, bool], ...]        # (leaf, q, started), sorted
    objects: Tuple[Tuple[str, ObjectPhys], ...]           # sorted by object id
    completion: CompletionState
    pending: FrozenSet[Tuple[str, str, str]]              # (giver, receiver, obj)

    def robot(self, rid: str) -> RobotPhys:
        for key, phys in self.robots:
            if key == rid:
                return phys
        raise KeyError(rid)

    def assignment(self, rid: str) -> Optional[str]:
        for robot, leaf in self.assignments:
            if robot == rid:
                return leaf
        return None

    def owner(self, leaf: str) -> Optional[str]:
        for robot, assigned in self.assignments:
            if assigned == leaf:
                return robot
        return None

    def leaf_state(self, leaf: str) -> Tuple[int, bool]:
        for name, q, started in self.leaf_states:
            if name == leaf:
                return q, started
        raise KeyError(leaf)

    def object(self, obj: str) -> ObjectPhys:
        for oid, phys in self.objects:
            if oid == obj:
                return phys
        raise KeyError(obj)

    def is_locked(self, rid: str) -> bool:
        """A giver frozen at the rendezvous pose until the joint transfer."""
        return any(giver == rid for giver, _, _ in self.pending)

    # --- functional updates ---

    def with_robot(self, rid: str, phys: RobotPhys) -> "TeamState":
        robots = tuple((k, phys if k == rid else v) for k, v in self.robots)
        return replace(self, robots=robots)

    def with_assignment(self, rid: str, leaf: Optional[str]) -> "TeamState":
        entries = [(r, l) for r, l in self.assignments if r != rid]
        if leaf is not None:
            entries.append((rid, leaf))
        return replace(self, assignments=tuple(sorted(entries)))

    def with_leaf(self, leaf: str, q: int, started: bool = True) -> "TeamState":
        entries = tuple((name, q if name == leaf else oq, started if name == leaf else fl)
                        for name, oq, fl in self.leaf_states)
        return replace(self, leaf_states=entries)

    def without_leaf(self, leaf: str) -> "TeamState":
        return replace(self, leaf_states=tuple(
            e for e in self.leaf_states if e[0] != leaf))

    def with_object(self, obj: str, phys: ObjectPhys) -> "TeamState":
        objects = tuple((k, phys if k == obj else v) for k, v in self.objects)
        return replace(self, objects=objects)


@dataclass(frozen=True)
class Edge:
    """One step of a team plan: a robot action or a switch transition."""

    kind: str                       # "action" | "transfer" | "rendezvous" | "refocus" | "assign"
    robot: str
    leaf: Optional[str] = None
    action: Optional[Action] = None
    partner: Optional[str] = None   # transfer/rendezvous receiver, refocus target leaf owner
    to_leaf: Optional[str] = None   # refocus destination
    q_from: Optional[int] = None
    q_to: Optional[int] = None
    cost: float = 0.0
    completes: bool = False         # action drove the leaf automaton into acceptance

    def label(self) -> str:
        if self.kind == "action":
            return self.action.label()
        if self.kind == "refocus":
            return f"{self.robot}:refocus:{self.leaf}->{self.to_leaf}"
        if self.kind in ("assign", "release"):
            return f"{self.robot}:{self.kind}:{self.leaf}"
        return f"{self.robot}:{self.kind}:{self.leaf}->{self.partner}"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "robot": self.robot, "leaf": self.leaf,
               "cost": self.cost, "completes": self.completes}
        if self.action is not None:
            out["action"] = {"kind": self.action.kind, "obj": self.action.obj,
                             "target": self.action.target}
        if self.partner is not None:
            out["partner"] = self.partner
        if self.to_leaf is not None:
            out["to_leaf"] = self.to_leaf
        if self.q_from is not None:
            out["q_from"] = self.q_from
            out["q_to"] = self.q_to
        return out


@dataclass(frozen=True)
class PlannerConfig:
    switch_penalty: float = 0.01        # transfer/rendezvous/refocus tie-break cost
    handover_protocol_factor: float = 1.5  # pre-pose + linear approach + retreat
    rendezvous_samples: int = 32
    rendezvous_seed: int = 7
    heuristic: str = "sum"              # "sum" | "max" | "none"


class RendezvousTable:
    """Cached handover poses per ordered robot pair (pure geometry)."""

    def __init__(self, robots: Sequence[RobotSpec], samples: int = 32, seed: int = 7):
        self._poses: Dict[Tuple[str, str], Tuple[float, float]] = {}
        specs = {r.id: r for r in robots}
        for giver in sorted(specs):
            for receiver in sorted(specs):
                if giver == receiver:
                    continue
                a, b = specs[giver], specs[receiver]
                sphere_a = ReachSphere((*a.base, 0.0), a.reach)
                sphere_b = ReachSphere((*b.base, 0.0), b.reach)
                try:
                    cands = sample_and_score(sphere_a, sphere_b,
                                             (*a.base, 0.0), (*b.base, 0.0),
                                             n=samples, seed=seed)
                except NoOverlap:
                    continue
                best = cands[0].position
                self._poses[(giver, receiver)] = (best[0], best[1])

    def pose(self, giver: str, receiver: str) -> Optional[Tuple[float, float]]:
        return self._poses.get((giver, receiver))


class TeamModel:
    """Lazily expanded hierarchical team model; read-only once built."""

    def __init__(self, spec: HierSpec, robots: Sequence[RobotSpec], world: WorldView,
                 config: PlannerConfig = PlannerConfig(),
                 rendezvous: Optional[RendezvousTable] = None,
                 ready_hints: Optional[Mapping[str, float]] = None):
        self.spec = spec
        self.config = config
        self.world = world
        self.robots: Dict[str, RobotTS] = {
            r.id: build_robot_ts(r, world) for r in robots}
        self.order = tuple(sorted(self.robots))
        # seconds until each robot finishes its current motion; biases search
        # tie-breaking and schedule projection toward actually-free robots
        self.ready_hints: Dict[str, float] = {
            rid: float((ready_hints or {}).get(rid, 0.0)) for rid in self.order}
        self.expansion_order = tuple(sorted(
            self.order, key=lambda rid: (self.ready_hints[rid], rid)))
        self.rendezvous = rendezvous or RendezvousTable(
            robots, config.rendezvous_samples, config.rendezvous_seed)
        self._eligible_cache: Dict[CompletionState, FrozenSet[str]] = {}
        self._completable_cache: Dict[CompletionState, bool] = {}
        self._check_capability()
        self._min_w = {
            kind: min(ts.duration(kind, config.handover_protocol_factor)
                      for ts in self.robots.values())
            for kind in (skills.PICK, skills.PLACE, skills.HANDOVER_R2H,
                         skills.HANDOVER_R2R, skills.MOVE_TO_RENDEZVOUS)}
        self.min_action_cost = min(self._min_w.values())
        self._distances = {
            leaf: spec[leaf].nfa.accepting_distances() for leaf in spec.leaves}
        self._hops = self._hop_distances()
        self._leaf_shape = {leaf: self._shape_of(leaf) for leaf in spec.leaves}

    def _hop_distances(self) -> Dict[Tuple[str, str], float]:
        """BFS over the workspace-overlap graph: how many robot-to-robot
        transfers separate two robots."""
        out: Dict[Tuple[str, str], float] = {}
        for src in self.order:
            dist = {src: 0.0}
            frontier = [src]
            while frontier:
                nxt = []
                for a in frontier:
                    for b in self.order:
                        if b not in dist and self.rendezvous.pose(a, b) is not None:
                            dist[b] = dist[a] + 1
                            nxt.append(b)
                frontier = nxt
            for b in self.order:
                out[(src, b)] = dist.get(b, float("inf"))
        return out

    def _shape_of(self, leaf: str) -> Optional[Tuple[str, str, str]]:
        """(object, final skill, final target) for plain fetch-and-finish
        leaves; None for anything more exotic."""
        props = list(self.spec[leaf].alphabet)
        if len(props) != 2:
            return None
        refs = sorted((p.skill for p in props), key=lambda r: r.skill != skills.PICK)
        first, last = refs
        if first.skill != skills.PICK or first.robot is not None:
            return None
        if last.skill not in (skills.HANDOVER_R2H, skills.PLACE) or last.robot is not None:
            return None
        if first.obj != last.obj or last.target is None:
            return None
        return (first.obj, last.skill, last.target)

    def _check_capability(self):
        if not self.robots:
            raise NoCapableRobot("*", "no robots in the team")
        known_objects = {oid for oid, _, _ in self.world.objects}
        known_humans = {hid for hid, _ in self.world.humans}
        known_locations = {lid for lid, _ in self.world.locations}
        for leaf in self.spec.leaves:
            for prop in self.spec[leaf].alphabet:
                ref = prop.skill
                if ref is None:
                    raise NoCapableRobot(leaf, f"prop {prop.name!r} has no skill descriptor")
                if ref.robot is not None and ref.robot not in self.robots:
                    raise NoCapableRobot(leaf, f"prop {prop.name!r} names unknown robot {ref.robot!r}")
                if ref.obj is not None and ref.obj not in known_objects:
                    raise NoCapableRobot(leaf, f"unknown object {ref.obj!r}")
                if ref.skill == skills.HANDOVER_R2H and ref.target not in known_humans:
                    raise NoCapableRobot(leaf, f"unknown human {ref.target!r}")
                if ref.skill == skills.PLACE and ref.target not in known_locations:
                    raise NoCapableRobot(leaf, f"unknown location {ref.target!r}")

    # --- leaf-scoped helpers ---

    def leaf_objects(self, leaf: str) -> FrozenSet[str]:
        return frozenset(p.skill.obj for p in self.spec[leaf].alphabet
                         if p.skill and p.skill.obj)

    def eligible(self, cs: CompletionState) -> FrozenSet[str]:
        if cs not in self._eligible_cache:
            self._eligible_cache[cs] = eligible_leaves(self.spec, cs)
        return self._eligible_cache[cs]

    def completable(self, cs: CompletionState) -> bool:
        if cs not in self._completable_cache:
            self._completable_cache[cs] = mission_completable(self.spec, cs)
        return self._completable_cache[cs]

    # --- states ---

    def initial_state(self, completion: Optional[CompletionState] = None) -> TeamState:
        cs = completion or initial_completion(self.spec)
        leaf_states = tuple(
            (leaf, min(self.spec[leaf].nfa.initial), False)
            for leaf in self.spec.leaves if leaf not in cs.done)
        objects = tuple(
            (oid, ObjectPhys(None, pos)) for oid, pos, _ in sorted(self.world.objects))
        robots = tuple((rid, RobotPhys()) for rid in self.order)
        return TeamState(robots=robots, assignments=(), leaf_states=leaf_states,
                         objects=objects, completion=cs, pending=frozenset())

    def is_goal(self, state: TeamState) -> bool:
        return is_root_done(self.spec, state.completion)

    def _geom_floor(self, state: TeamState, leaf: str, nfa_dist: float) -> float:
        """Transport lower bound for fetch-and-finish leaves: the object must
        end up in the hands of a robot that reaches the final target, and
        each workspace hop costs at least a transfer or a put-down/re-grasp."""
        shape = self._leaf_shape.get(leaf)
        if shape is None or nfa_dist <= 0:
            return 0.0
        obj, final_kind, target = shape
        op = state.object(obj)
        if final_kind == skills.HANDOVER_R2H:
            try:
                target_pos = self.world.human_pos(target)
            except KeyError:
                return 0.0
        else:
            try:
                target_pos = self.world.location_pos(target)
            except KeyError:
                return 0.0
        goal_robots = [r for r in self.order if self.robots[r].reach(target_pos)]
        if not goal_robots:
            return float("inf")
        eps = self.config.switch_penalty
        pick_cost = 0.0
        credit = 0.0
        if op.holder is not None and op.holder.startswith("robot:"):
            carrier = op.holder[6:]
            start_robots = [carrier]
            if state.robot(carrier).rendezvous_with is not None:
                # the approach move is already paid; keeps the bound
                # consistent across the move/switch/transfer edge triple
                credit += self._min_w[skills.MOVE_TO_RENDEZVOUS]
            if any(o == obj for _, _, o in state.pending):
                credit += eps
        elif op.pos is not None:
            pick_cost = self._min_w[skills.PICK]
            start_robots = [r for r in self.order if self.robots[r].reach(op.pos)]
            if not start_robots:
                return float("inf")
        else:
            return 0.0
        hops = min(self._hops[(s, g)] for s in start_robots for g in goal_robots)
        if hops == float("inf"):
            return float("inf")
        # each workspace hop pays the approach move, the switch penalty and
        # the joint transfer
        per_hop = (self._min_w[skills.MOVE_TO_RENDEZVOUS] + eps
                   + self._min_w[skills.HANDOVER_R2R])
        if self.world.locations:
            # a put-down/re-grasp through a shared surface may undercut a
            # direct transfer
            per_hop = min(per_hop, self._min_w[skills.PLACE] + self._min_w[skills.PICK])
        return max(0.0, pick_cost + hops * per_hop
                   + self._min_w[final_kind] - credit)

    def heuristic(self, state: TeamState) -> float:
        mode = self.config.heuristic
        if mode == "none":
            return 0.0
        total, worst = 0.0, 0.0
        for leaf, q, _ in state.leaf_states:
            d = self._distances[leaf][q]
            if d == float("inf"):
                return float("inf")
            floor = max(d * self.min_action_cost,
                        self._geom_floor(state, leaf, d))
            if floor == float("inf"):
                return float("inf")
            total += floor
            worst = max(worst, floor)
        return worst if mode == "max" else total

    # --- expansion ---

    def enabled_actions(self, state: TeamState, rid: str) -> List[Action]:
        """Physically enabled, leaf-relevant actions for an assigned robot."""
        leaf = state.assignment(rid)
        if leaf is None:
            return []
        ts = self.robots[rid]
        phys = state.robot(rid)
        relevant = self.leaf_objects(leaf)
        deliveries = [(p.skill.obj, p.skill.target) for p in self.spec[leaf].alphabet
                      if p.skill and p.skill.skill == skills.HANDOVER_R2H]
        out: List[Action] = []
        if phys.payload is None:
            for obj in sorted(relevant):
                op = state.object(obj)
                if op.holder is None and op.pos is not None and obj in ts.graspable \
                        and ts.reach(op.pos):
                    out.append(Action(skills.PICK, rid, obj=obj))
        else:
            # the payload may be mid-chain for another leaf, so place and
            # rendezvous moves are not restricted to leaf-relevant objects;
            # handing a human the wrong object strands it, so only matching
            # delivery props are offered
            obj = phys.payload
            for lid, pos in sorted(self.world.locations):
                if ts.reach(pos):
                    out.append(Action(skills.PLACE, rid, obj=obj, target=lid))
            for want_obj, hid in sorted(deliveries):
                if want_obj not in (None, obj):
                    continue
                if ts.reach(self.world.human_pos(hid)):
                    out.append(Action(skills.HANDOVER_R2H, rid, obj=obj, target=hid))
            if phys.rendezvous_with is None:
                for other in self.order:
                    if other != rid and self.rendezvous.pose(rid, other) is not None:
                        out.append(Action(skills.MOVE_TO_RENDEZVOUS, rid, obj=obj,
                                          target=other))
        # joint transfer completion: the receiver pulls from a frozen giver
        for giver, receiver, obj in sorted(state.pending):
            if receiver == rid and phys.payload is None:
                out.append(Action(skills.HANDOVER_R2R, rid, obj=obj, target=giver))
        out.sort(key=lambda a: (a.kind, a.obj or "", a.target or ""))
        return out

    def emission(self, leaf: str, action: Action) -> FrozenSet[str]:
        return frozenset(p.name for p in self.spec[leaf].alphabet
                         if skills.matches(p, action))

    def action_duration(self, rid: str, action: Action) -> float:
        return self.robots[rid].duration(action.kind, self.config.handover_protocol_factor)

    def apply_action_effects(self, state: TeamState, action: Action
                             ) -> List[Tuple[Edge, TeamState]]:
        """Successors of firing one enabled action: physical effects plus one
        branch per compatible automaton transition."""
        rid = action.robot
        leaf = state.assignment(rid)
        if leaf is None:
            raise ActionDisabled(f"{rid} is not working on any leaf")
        phys = state.robot(rid)
        q, _ = state.leaf_state(leaf)
        nfa = self.spec[leaf].nfa

        if action.kind == skills.IDLE:
            nxt = state
        elif action.kind == skills.PICK:
            op = state.object(action.obj)
            if phys.payload is not None or op.holder is not None or op.pos is None \
                    or not self.robots[rid].reach(op.pos) \
                    or action.obj not in self.robots[rid].graspable:
                raise ActionDisabled(f"pick {action.obj} disabled for {rid}")
            nxt = state.with_robot(rid, replace(phys, payload=action.obj))
            nxt = nxt.with_object(action.obj, ObjectPhys(f"robot:{rid}", None))
        elif action.kind == skills.PLACE:
            if phys.payload != action.obj:
                raise ActionDisabled(f"{rid} does not hold {action.obj}")
            pos = self.world.location_pos(action.target)
            if not self.robots[rid].reach(pos):
                raise ActionDisabled(f"location {action.target} out of reach of {rid}")
            nxt = state.with_robot(rid, RobotPhys())  # abandons any parked rendezvous
            nxt = nxt.with_object(action.obj, ObjectPhys(None, pos))
        elif action.kind == skills.HANDOVER_R2H:
            if phys.payload != action.obj:
                raise ActionDisabled(f"{rid} does not hold {action.obj}")
            if not self.robots[rid].reach(self.world.human_pos(action.target)):
                raise ActionDisabled(f"human {action.target} out of reach of {rid}")
            nxt = state.with_robot(rid, RobotPhys())
            nxt = nxt.with_object(action.obj, ObjectPhys(f"human:{action.target}", None))
        elif action.kind == skills.MOVE_TO_RENDEZVOUS:
            if phys.payload is None:
                raise ActionDisabled("move to rendezvous requires a payload")
            if self.rendezvous.pose(rid, action.target) is None:
                raise ActionDisabled(f"workspaces of {rid} and {action.target} do not overlap")
            nxt = state.with_robot(rid, replace(phys, rendezvous_with=action.target))
        elif action.kind == skills.HANDOVER_R2R:
            entry = (action.target, rid, action.obj)
            if entry not in state.pending:
                raise ActionDisabled(f"no pending rendezvous {entry}")
            if phys.payload is not None:
                raise ActionDisabled(f"receiver {rid} hands are full")
            nxt = state.with_robot(rid, replace(phys, payload=action.obj))
            nxt = nxt.with_robot(action.target,
                                 RobotPhys(payload=None, rendezvous_with=None))
            nxt = nxt.with_object(action.obj, ObjectPhys(f"robot:{rid}", None))
            nxt = replace(nxt, pending=state.pending - {entry})
        else:
            raise ActionDisabled(f"unknown action kind {action.kind}")

        symbol = self.emission(leaf, action)
        cost = self.action_duration(rid, action) if action.kind != skills.IDLE else 0.0
        out: List[Tuple[Edge, TeamState]] = []
        for guard, q2 in sorted(nfa.successors(q), key=lambda gq: gq[1]):
            if not guard.satisfied_by(symbol):
                continue
            completes = q2 in nfa.accepting
            edge = Edge("action", rid, leaf=leaf, action=action,
                        partner=action.target if action.kind == skills.HANDOVER_R2R else None,
                        q_from=q, q_to=q2, cost=cost, completes=completes)
            succ = nxt.with_leaf(leaf, q2, True)
            if completes:
                new_cs = advance(self.spec, state.completion, leaf)
                succ = replace(succ.without_leaf(leaf), completion=new_cs)
                succ = succ.with_assignment(rid, None)
                if not self.completable(new_cs) and not is_root_done(self.spec, new_cs):
                    continue  # completing now would strand the mission
            out.append((edge, succ))
        return out

    def switch_edges(self, state: TeamState, rid: str) -> List[Tuple[Edge, TeamState]]:
        out: List[Tuple[Edge, TeamState]] = []
        eps = self.config.switch_penalty
        leaf = state.assignment(rid)
        phys = state.robot(rid)
        eligible = self.eligible(state.completion)

        if leaf is not None:
            q, _ = state.leaf_state(leaf)
            nfa = self.spec[leaf].nfa
            at_decomp = q in nfa.decomposition
            if at_decomp:
                for other in self.order:
                    if other == rid or state.assignment(other) is not None \
                            or state.is_locked(other):
                        continue
                    # sequential in-spec handoff: same task progress, new robot
                    succ = state.with_assignment(rid, None).with_assignment(other, leaf)
                    if not self.enabled_actions(succ, other):
                        continue
                    out.append((Edge("transfer", rid, leaf=leaf, partner=other,
                                     q_from=q, q_to=q, cost=eps), succ))
                for target in sorted(l for l, _, _ in state.leaf_states if l != leaf):
                    if state.owner(target) is not None or target not in eligible:
                        continue
                    tq, tstarted = state.leaf_state(target)
                    tnfa = self.spec[target].nfa
                    if tstarted and tq not in tnfa.decomposition:
                        continue
                    succ = state.with_assignment(rid, target)
                    if not self.enabled_actions(succ, rid):
                        continue
                    out.append((Edge("refocus", rid, leaf=leaf, to_leaf=target,
                                     q_from=q, q_to=q, cost=eps), succ))
                # stepping away entirely, e.g. to free the hands for a
                # rendezvous on another robot's task
                out.append((Edge("release", rid, leaf=leaf, q_from=q, q_to=q,
                                 cost=eps), state.with_assignment(rid, None)))
            if phys.rendezvous_with is not None and phys.payload is not None:
                other = phys.rendezvous_with
                other_phys = state.robot(other)
                if state.assignment(other) is None and not state.is_locked(other) \
                        and other_phys.payload is None:
                    # simultaneous switch: receiver takes the leaf, giver freezes
                    entry = (rid, other, phys.payload)
                    succ = state.with_assignment(rid, None).with_assignment(other, leaf)
                    succ = replace(succ, pending=state.pending | {entry})
                    out.append((Edge("rendezvous", rid, leaf=leaf, partner=other,
                                     q_from=state.leaf_state(leaf)[0],
                                     q_to=state.leaf_state(leaf)[0], cost=eps), succ))
        else:
            if not state.is_locked(rid):
                for target in sorted(l for l, _, _ in state.leaf_states):
                    if state.owner(target) is not None or target not in eligible:
                        continue
                    tq, tstarted = state.leaf_state(target)
                    tnfa = self.spec[target].nfa
                    if tstarted and tq not in tnfa.decomposition:
                        continue
                    succ = state.with_assignment(rid, target)
                    # a robot only takes a leaf it can immediately act on;
                    # mid-chain entries happen through the switch families
                    if not self.enabled_actions(succ, rid):
                        continue
                    out.append((Edge("assign", rid, leaf=target, q_from=tq, q_to=tq,
                                     cost=0.0), succ))
        return out

    def successors(self, state: TeamState) -> List[Tuple[Edge, TeamState]]:
        out: List[Tuple[Edge, TeamState]] = []
        for rid in self.expansion_order:
            if state.is_locked(rid):
                continue
            for action in self.enabled_actions(state, rid):
                out.extend(self.apply_action_effects(state, action))
            out.extend(self.switch_edges(state, rid))
        return out

    # --- plan validation (executor-facing structural check) ---

    def validate_edge_sequence(self, edges: Sequence[Edge],
                               start: Optional[TeamState] = None) -> TeamState:
        """Replays an edge sequence through the model; raises ActionDisabled
        on any structurally impossible step (double-holds, out-of-reach
        skills, switch misuse)."""
        state = start or self.initial_state()
        for edge in edges:
            found = None
            if edge.kind == "action":
                for cand_edge, succ in self.apply_action_effects(state, edge.action):
                    if cand_edge.q_to == edge.q_to:
                        found = succ
                        break
            else:
                for cand_edge, succ in self.switch_edges(state, edge.robot):
                    if (cand_edge.kind, cand_edge.leaf, cand_edge.partner,
                            cand_edge.to_leaf) == (edge.kind, edge.leaf,
                                                   edge.partner, edge.to_leaf):
                        found = succ
                        break
            if found is None:
                raise ActionDisabled(f"edge not enabled: {edge.label()}")
            state = found
        return state

    def debug_neighborhood(self, state: TeamState, depth: int = 1) -> dict:
        """JSON dump of the expanded sub-graph around a state."""
        nodes, edges = {id(state): 0}, []
        frontier = [(state, 0)]
        labels = {0: "start"}
        counter = 1
        for _ in range(depth):
            nxt = []
            for st, sid in frontier:
                for edge, succ in self.successors(st):
                    labels[counter] = edge.label()
                    edges.append({"from": sid, "to": counter, "edge": edge.to_json()})
                    nxt.append((succ, counter))
                    counter += 1
            frontier = nxt
        return {"nodes": labels, "edges": edges}
