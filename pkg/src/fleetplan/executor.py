"""Receding-horizon execution: dispatches plan edges into the simulator and
keeps the plan optimal for the remaining horizon through three tiers.

  1. Progress-triggered refinement: every completed edge re-solves the
     remaining problem from the observed state; the swap is a no-op when the
     suffix did not change (and only counted as a replan when it did).
  2. Reactive safety: preconditions are re-checked against the live world at
     dispatch time, in-flight human handovers abort the moment their target
     leaves the workspace, and predicted intrusions into a busy workspace
     halt execution.  A halt stalls dispatch for the planning latency.
  3. Predictive adaptation: when the trajectory forecast says a human will
     settle in a different workspace, a speculative plan is prepared during
     execution and atomically taken over once the observation converges, so
     the switch costs no planning stall.

Speculative work is modeled deterministically: the plan is computed at its
trigger tick and becomes available after the configured planning latency of
simulated time, which keeps runs bit-reproducible under a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import skills
from .hierarchy import HierSpec, advance, initial_completion, is_root_done
from .instructions import NameSource, SceneSymbols, merge, translate_text
from .predict import ObservationBuffer, predict, workspace_transition
from .scenario import Scenario
from .search import Plan, Unsatisfiable, build_schedule, plan as solve
from .sim import Outcome, Simulator, fluency_metrics
from .skills import Action
from .team import (
    Edge,
    ObjectPhys,
    PlannerConfig,
    RendezvousTable,
    RobotPhys,
    TeamModel,
    TeamState,
)


@dataclass
class ExecConfig:
    reactive: bool = True
    predictor: bool = True
    parallel_geom: bool = True
    progress_replan: bool = True
    replay_only: bool = False        # dispatch the initial plan verbatim
    plan_latency: float = 0.5        # stall of a blocking replan, sim seconds
    slow_replan_latency: float = 3.0  # fallback replan without the reactive tier
    retry_limit: int = 3
    retry_backoff: float = 0.25
    geom_serial_delay: float = 0.4   # serial pose planning before a joint handover
    predict_horizon: int = 15
    obs_capacity: int = 10
    obs_interval: float = 0.1
    hysteresis: float = 0.1
    converge_ticks: int = 2
    fast_edge_secs: float = 2.0      # "high velocity" duration threshold
    intrusion_kinds: Tuple[str, ...] = (skills.PICK, skills.PLACE,
                                        skills.MOVE_TO_RENDEZVOUS, skills.HANDOVER_R2R)
    min_makespan_gain: float = 0.2   # smaller improvements do not justify a swap
    replan_cap: int = 3
    timeout_factor: float = 5.0


@dataclass
class RunResult:
    success: bool
    time_cost: float
    replans: int
    takeovers: int
    metrics: Dict[str, float]
    reason: str = ""
    events: List[dict] = field(default_factory=list)
    nominal_makespan: float = 0.0


@dataclass
class _Speculative:
    human: str
    to_robot: str
    plan: Plan
    ready_at: float
    affected: Optional[Edge]
    converge_count: int = 0
    revert_count: int = 0


class RhpEngine:
    def __init__(self, sim: Simulator, spec: Optional[HierSpec],
                 exec_config: Optional[ExecConfig] = None,
                 planner_config: Optional[PlannerConfig] = None,
                 tick: float = 0.05,
                 symbols: Optional[SceneSymbols] = None,
                 names: Optional[NameSource] = None):
        """``spec`` may be None for an idle session that waits for its first
        goal command."""
        self.sim = sim
        self.spec = spec
        self.cfg = exec_config or ExecConfig()
        self.pcfg = planner_config or PlannerConfig()
        self.tick_dt = tick
        self.symbols = symbols
        self.names = names or NameSource(1000)
        self.rendezvous = RendezvousTable(
            [r.spec for r in sim.robots.values()],
            self.pcfg.rendezvous_samples, self.pcfg.rendezvous_seed)

        # live hierarchy bookkeeping
        from .hierarchy import CompletionState
        self.cs = initial_completion(spec) if spec else CompletionState(frozenset(), ())
        self.leaf_q: Dict[str, int] = {} if spec is None else {
            leaf: min(spec[leaf].nfa.initial) for leaf in spec.leaves}
        self.leaf_started: Dict[str, bool] = {leaf: False for leaf in self.leaf_q}
        self.assignments: Dict[str, Optional[str]] = {
            rid: None for rid in sim.robots}
        self.pending: Set[Tuple[str, str, str]] = set()

        self.inflight: Dict[str, Edge] = {}
        self.queue: List[Edge] = []
        self.edge_earliest: Dict[int, float] = {}  # queue index -> not before
        self.retries: Dict[str, int] = {}

        self.events: List[dict] = []
        self.event_sink = None
        self.replans = 0
        self.takeovers = 0
        self.halted_until: Optional[float] = None
        self.halt_plan: Optional[Plan] = None
        self.pending_goal: Optional[Tuple[float, HierSpec]] = None
        self.pending_improve: Optional[float] = None
        self.speculative: Optional[_Speculative] = None
        self.failure_reason = ""
        self.finished: Optional[bool] = None

        self.buffers: Dict[str, ObservationBuffer] = {
            hid: ObservationBuffer(self.cfg.obs_capacity) for hid in sim.humans}
        self._last_obs = -1e9

        if spec is not None:
            self.model = self._build_model()
            initial = solve(self.model, self._team_state())
            self.nominal_makespan = initial.makespan
            self._install(initial)
            self._emit("plan-started", cost=initial.cost, makespan=initial.makespan,
                       edges=len(initial.edges))
        else:
            self.model = None
            self.plan = Plan((), (), 0.0, 0.0)
            self.nominal_makespan = 0.0

    # --- plumbing -----------------------------------------------------------

    def _emit(self, kind: str, **payload):
        event = {"t": round(self.sim.now, 6), "type": kind, **payload}
        self.events.append(event)
        if self.event_sink is not None:
            self.event_sink(event)

    def _sole_owner(self, pos: Tuple[float, float]) -> Optional[str]:
        inside = [rid for rid, base, reach in self._robot_disks()
                  if (pos[0] - base[0]) ** 2 + (pos[1] - base[1]) ** 2 <= reach ** 2]
        return inside[0] if len(inside) == 1 else None

    def _forecast_settling(self, hid: str
                           ) -> Optional[Tuple[Tuple[float, float], str]]:
        """(landing point, workspace owner) where a moving human is forecast
        to come under a different robot's sole reach; None when the forecast
        stays put.  Unlike the raw transition query this also fires when the
        walk starts inside an overlap region."""
        buf = self.buffers.get(hid)
        if buf is None or len(buf) < 2:
            return None
        try:
            forecast = predict(buf, self.cfg.predict_horizon)
        except Exception:
            return None
        current = self._sole_owner(self.sim.humans[hid].pos)
        for k, point in enumerate(forecast.positions):
            owner = self._sole_owner(point)
            if owner is not None and owner != current:
                landing = forecast.positions[min(k + 2, len(forecast.positions) - 1)]
                return landing, owner
        return None

    def _belief_view(self):
        """World view for replans: with the predictive tier on, a moving
        human is planned against their forecast landing point rather than a
        position they are about to leave."""
        view = self.sim.world_view()
        if not self.cfg.predictor or self.cfg.replay_only:
            return view
        overrides = {}
        for hid, human in self.sim.humans.items():
            if not human.waypoints:
                continue
            settling = self._forecast_settling(hid)
            if settling is not None:
                overrides[hid] = settling[0]
        if not overrides:
            return view
        humans = tuple((hid, overrides.get(hid, pos)) for hid, pos in view.humans)
        return replace(view, humans=humans)

    def _ready_hints(self) -> Dict[str, float]:
        return {rid: max(0.0, r.action_end - self.sim.now)
                for rid, r in self.sim.robots.items() if r.action is not None}

    def _build_model(self) -> TeamModel:
        return TeamModel(self.spec, [r.spec for r in self.sim.robots.values()],
                         self._belief_view(), self.pcfg, self.rendezvous,
                         ready_hints=self._ready_hints())

    def _team_state(self, project_inflight: bool = True,
                    skip: Optional[Edge] = None) -> TeamState:
        """The observed world projected into a planner start node.

        In-flight actions are assumed to finish (their effects applied)
        unless skipped as presumed-failed.
        """
        robots = []
        for rid in sorted(self.sim.robots):
            r = self.sim.robots[rid]
            robots.append((rid, RobotPhys(r.payload, r.rendezvous_with)))
        objects = []
        for oid in sorted(self.sim.objects):
            o = self.sim.objects[oid]
            holder = f"robot:{o.held_by}" if o.held_by else None
            objects.append((oid, ObjectPhys(holder, o.pos)))
        leaf_states = tuple(sorted(
            (leaf, q, self.leaf_started[leaf]) for leaf, q in self.leaf_q.items()))
        assignments = tuple(sorted(
            (rid, leaf) for rid, leaf in self.assignments.items() if leaf))
        state = TeamState(robots=tuple(robots), assignments=assignments,
                          leaf_states=leaf_states, objects=tuple(objects),
                          completion=self.cs, pending=frozenset(self.pending))
        if project_inflight:
            for rid in sorted(self.inflight):
                edge = self.inflight[rid]
                if skip is not None and edge is skip:
                    continue
                state = self._project_edge(state, edge)
        return state

    def _project_edge(self, state: TeamState, edge: Edge) -> TeamState:
        """Applies an action edge's expected effects without enabledness
        checks (the live world may already disagree with the old belief)."""
        action = edge.action
        rid = action.robot
        phys = state.robot(rid)
        if action.kind == skills.PICK:
            state = state.with_robot(rid, replace(phys, payload=action.obj))
            state = state.with_object(action.obj, ObjectPhys(f"robot:{rid}", None))
        elif action.kind == skills.PLACE:
            try:
                pos = self.model.world.location_pos(action.target)
            except KeyError:
                pos = self.sim.robots[rid].spec.base
            state = state.with_robot(rid, RobotPhys())
            state = state.with_object(action.obj, ObjectPhys(None, pos))
        elif action.kind == skills.HANDOVER_R2H:
            state = state.with_robot(rid, RobotPhys())
            state = state.with_object(
                action.obj, ObjectPhys(None, self.sim.humans[action.target].pos))
        elif action.kind == skills.HANDOVER_R2R:
            giver = action.target
            state = state.with_robot(rid, replace(state.robot(rid), payload=action.obj))
            state = state.with_robot(giver, RobotPhys())
            state = state.with_object(action.obj, ObjectPhys(f"robot:{rid}", None))
            state = replace(state, pending=state.pending - {(giver, rid, action.obj)})
        elif action.kind == skills.MOVE_TO_RENDEZVOUS:
            state = state.with_robot(rid, replace(phys, rendezvous_with=action.target))
        if edge.leaf is not None and edge.q_to is not None:
            try:
                state = state.with_leaf(edge.leaf, edge.q_to, True)
            except KeyError:
                pass
            if edge.completes and edge.leaf not in state.completion.done:
                new_cs = advance(self.spec, state.completion, edge.leaf)
                state = replace(state.without_leaf(edge.leaf), completion=new_cs)
                state = state.with_assignment(rid, None)
        return state

    def _install(self, new_plan: Plan, cause: str = ""):
        self.plan = new_plan
        self.queue = list(new_plan.edges)
        self.edge_earliest = {}
        self.retries = {}

    # --- replanning tiers -----------------------------------------------------

    def _remaining_edges(self) -> Tuple[Edge, ...]:
        return tuple(self.queue)

    def _progress_replan(self):
        """Re-optimizes the remaining horizon after an edge completes.

        The suffix is re-solved against the observed state.  When the
        incumbent suffix is no longer executable, the reactive tier halts
        and replaces it (execution stalls for the planning latency).  When
        it is still valid but a genuinely better suffix exists (cheaper, or
        same cost with a clearly smaller makespan), the improvement is
        adopted once the planning latency has elapsed, without stalling
        execution.  Equal-cost ties keep the incumbent so tie-flips do not
        masquerade as replanning.
        """
        if self.cfg.replay_only or not self.cfg.progress_replan:
            return
        if self.halted_until is not None:
            return  # the halt replan already reflects this progress
        if self.spec is None or is_root_done(self.spec, self.cs):
            return
        self.model = self._build_model()
        start = self._team_state()
        remaining = self._remaining_edges()
        if self.cfg.reactive:
            try:
                self.model.validate_edge_sequence(remaining, start)
            except Exception as exc:
                self._halt_and_replan(f"kinematic-infeasibility:{exc}",
                                      self.cfg.plan_latency)
                return
        try:
            fresh = solve(self.model, start)
        except Unsatisfiable:
            self._fail("mission became unsatisfiable after progress")
            return
        if fresh.edges == remaining:
            return
        try:
            incumbent = build_schedule(self.model, remaining, start)
        except Exception:
            incumbent = None
        improved = incumbent is None or fresh.cost < incumbent.cost - 1e-9 or (
            abs(fresh.cost - incumbent.cost) <= 1e-9
            and fresh.makespan < incumbent.makespan - self.cfg.min_makespan_gain)
        if improved and self.pending_improve is None:
            self.pending_improve = self.sim.now + self.cfg.plan_latency
            self._emit("replan-started", cause="progress")

    def _apply_improvement(self):
        """Adopts a better suffix computed in the background; no stall."""
        self.pending_improve = None
        if self.finished is not None or self.halted_until is not None:
            return
        self.model = self._build_model()
        start = self._team_state()
        try:
            fresh = solve(self.model, start)
        except Unsatisfiable:
            return
        if fresh.edges == self._remaining_edges():
            return
        self.replans += 1
        self._install(fresh, cause="progress")
        self._emit("replan-finished", cause="progress", latency=0.0,
                   cost=fresh.cost, makespan=fresh.makespan)

    def _halt_and_replan(self, cause: str, latency: float):
        self._emit("halt", cause=cause)
        self._emit("replan-started", cause=cause)
        self.model = self._build_model()
        try:
            fresh = solve(self.model, self._team_state())
        except Unsatisfiable:
            self._fail(f"no feasible plan after halt: {cause}")
            return
        self.replans += 1
        self.halted_until = self.sim.now + latency
        self.halt_plan = fresh
        self.speculative = None  # conservatively drop any speculative work
        self._emit("replan-finished", cause=cause, latency=latency,
                   cost=fresh.cost, makespan=fresh.makespan)

    def _fail(self, reason: str):
        if self.finished is None:
            self.failure_reason = reason
            self.finished = False
            self._emit("run-finished", success=False, reason=reason)

    # --- goal injection -------------------------------------------------------

    def _on_goal(self, text: str):
        if self.symbols is None:
            self.symbols = SceneSymbols(
                objects=tuple(sorted(self.sim.objects)),
                humans=tuple(sorted(self.sim.humans)),
                locations=tuple(sorted(self.sim.locations)))
        try:
            new_spec = translate_text(text, self.symbols, names=self.names)
        except Exception as exc:
            self._emit("goal-rejected", reason=str(exc), text=text)
            return
        self.pending_goal = (self.sim.now + self.cfg.plan_latency, new_spec)
        self._emit("goal-accepted", text=text, leaves=len(new_spec.leaves))

    def _apply_goal(self, new_spec: HierSpec):
        if self.spec is None:
            merged, carried = new_spec, initial_completion(new_spec)
        else:
            merged, carried = merge(self.spec, new_spec, self.cs, names=self.names)
        self.spec = merged
        self.cs = carried
        for leaf in merged.leaves:
            if leaf not in carried.done and leaf not in self.leaf_q:
                self.leaf_q[leaf] = min(merged[leaf].nfa.initial)
                self.leaf_started[leaf] = False
        self.model = self._build_model()
        try:
            fresh = solve(self.model, self._team_state())
        except Unsatisfiable:
            self._fail("merged mission is unsatisfiable")
            return
        self.replans += 1
        self._install(fresh, cause="goal")
        self._emit("goal-merged", root=merged.root, cost=fresh.cost,
                   makespan=fresh.makespan)

    # --- predictive tier --------------------------------------------------------

    def _observe_humans(self):
        if self.sim.now - self._last_obs + 1e-9 < self.cfg.obs_interval:
            return
        self._last_obs = self.sim.now
        for hid, human in self.sim.humans.items():
            buf = self.buffers[hid]
            try:
                buf.push(self.sim.now, human.pos)
            except ValueError:
                pass

    def _robot_disks(self):
        return [(rid, r.spec.base, r.spec.reach)
                for rid, r in sorted(self.sim.robots.items())]

    def _delivery_edges(self, human: str) -> List[Edge]:
        out = [e for e in self.queue
               if e.kind == "action" and e.action.kind == skills.HANDOVER_R2H
               and e.action.target == human]
        for edge in self.inflight.values():
            if edge.action.kind == skills.HANDOVER_R2H and edge.action.target == human:
                out.append(edge)
        return out

    def _predictive_adapt(self):
        if not self.cfg.predictor or self.cfg.replay_only:
            return
        if self.speculative is None:
            for hid in sorted(self.sim.humans):
                settling = self._forecast_settling(hid)
                if settling is None:
                    continue
                landing, to_robot = settling
                affected = None
                invalidated = False
                for edge in self._delivery_edges(hid):
                    robot = self.sim.robots[edge.action.robot]
                    if not robot.reach(landing):
                        invalidated = True
                        if edge in self.inflight.values():
                            affected = edge
                if not invalidated:
                    continue
                try:
                    spec_plan = self._solve_speculative(hid, landing, affected)
                except Unsatisfiable:
                    continue
                self.speculative = _Speculative(
                    human=hid, to_robot=to_robot, plan=spec_plan,
                    ready_at=self.sim.now + self.cfg.plan_latency,
                    affected=affected)
                self._emit("speculative-started", human=hid,
                           to_robot=to_robot,
                           ready_at=round(self.speculative.ready_at, 6))
                break
            return

    def _solve_speculative(self, human: str, landing: Tuple[float, float],
                           affected: Optional[Edge]) -> Plan:
        view = self.sim.world_view()
        humans = tuple((hid, landing if hid == human else pos)
                       for hid, pos in view.humans)
        view = replace(view, humans=humans)
        model = TeamModel(self.spec, [r.spec for r in self.sim.robots.values()],
                          view, self.pcfg, self.rendezvous)
        start = self._team_state(skip=affected)
        return solve(model, start)

    def _check_takeover(self):
        spec = self.speculative
        if spec is None:
            return
        human = self.sim.humans[spec.human]
        target = self.sim.robots[spec.to_robot]
        dx = human.pos[0] - target.spec.base[0]
        dy = human.pos[1] - target.spec.base[1]
        inside = (dx * dx + dy * dy) ** 0.5 <= target.spec.reach - self.cfg.hysteresis
        if inside:
            spec.converge_count += 1
            spec.revert_count = 0
        else:
            spec.converge_count = 0
            # stale when the human settles outside the destination workspace
            others = [r for rid, r in self.sim.robots.items() if rid != spec.to_robot]
            sole_elsewhere = any(
                ((human.pos[0] - r.spec.base[0]) ** 2 +
                 (human.pos[1] - r.spec.base[1]) ** 2) ** 0.5
                <= r.spec.reach - self.cfg.hysteresis for r in others)
            still = not self.sim.humans[spec.human].waypoints
            if sole_elsewhere and still:
                spec.revert_count += 1
                if spec.revert_count >= self.cfg.converge_ticks:
                    self._emit("speculative-discarded", human=spec.human)
                    self.speculative = None
            return
        if spec.converge_count >= self.cfg.converge_ticks and self.sim.now >= spec.ready_at:
            if spec.affected is not None:
                for rid, edge in list(self.inflight.items()):
                    if edge is spec.affected:
                        self.sim.abort_action(rid, "interrupted",
                                              "superseded by takeover")
                        self.inflight.pop(rid, None)
            self._install(spec.plan, cause="takeover")
            self.takeovers += 1
            self._emit("takeover", human=spec.human, to_robot=spec.to_robot,
                       latency=0.0, cost=spec.plan.cost)
            self.speculative = None

    # --- reactive tier ----------------------------------------------------------

    def _check_intrusions(self):
        if not self.cfg.reactive or self.cfg.replay_only:
            return
        disks = self._robot_disks()
        for rid, edge in list(self.inflight.items()):
            action = edge.action
            duration = self.sim.robots[rid].action_end - self.sim.robots[rid].action_start
            if action.kind not in self.cfg.intrusion_kinds:
                continue
            if duration >= self.cfg.fast_edge_secs:
                continue
            robot = self.sim.robots[rid]
            for hid in sorted(self.sim.humans):
                if hid == action.target:
                    continue
                buf = self.buffers[hid]
                if len(buf) < 2:
                    continue
                try:
                    forecast = predict(buf, self.cfg.predict_horizon)
                except Exception:
                    continue
                if any(robot.reach(p) for p in forecast.positions):
                    if robot.reach(self.sim.humans[hid].pos):
                        continue  # already inside: a present fact, not a forecast
                    self.inflight.pop(rid, None)
                    self.sim.abort_action(rid, "interrupted", f"intrusion risk from {hid}")
                    self._halt_and_replan(f"intrusion-risk:{hid}", self.cfg.plan_latency)
                    return

    # --- outcome handling ---------------------------------------------------------

    def _handle_outcome(self, outcome: Outcome):
        if outcome.status == "goal":
            if not self.cfg.replay_only:
                self._on_goal(outcome.detail)
            return
        rid = outcome.robot
        edge = self.inflight.pop(rid, None)
        if edge is None:
            return
        if outcome.status == "done":
            self._complete_edge(rid, edge, outcome)
            return
        self._emit("edge-failed", robot=rid, label=edge.label(),
                   status=outcome.status, detail=outcome.detail)
        if self.cfg.replay_only:
            self._fail(f"replay failed: {edge.label()} {outcome.status}")
            return
        if self.cfg.reactive:
            self._halt_and_replan(f"{outcome.status}:{edge.label()}",
                                  self.cfg.plan_latency)
            return
        # reactive tier off: blind retries, then one slow recovery replan
        key = edge.label()
        self.retries[key] = self.retries.get(key, 0) + 1
        if self.retries[key] <= self.cfg.retry_limit:
            self.queue.insert(0, edge)
            self.edge_earliest[id(self.queue[0])] = self.sim.now + self.cfg.retry_backoff
        else:
            self._halt_and_replan(f"retries-exhausted:{edge.label()}",
                                  self.cfg.slow_replan_latency)

    def _complete_edge(self, rid: str, edge: Edge, outcome: Outcome):
        action = edge.action
        if action.kind == skills.HANDOVER_R2R:
            self.pending.discard((action.target, rid, action.obj))
        if edge.leaf is not None and edge.leaf in self.leaf_q and edge.q_to is not None:
            self.leaf_q[edge.leaf] = edge.q_to
            self.leaf_started[edge.leaf] = True
        self._emit("edge-completed", robot=rid, label=edge.label(),
                   leaf=edge.leaf, completes=edge.completes)
        if edge.completes and edge.leaf in self.leaf_q:
            self.cs = advance(self.spec, self.cs, edge.leaf)
            self.leaf_q.pop(edge.leaf, None)
            self.leaf_started.pop(edge.leaf, None)
            self.assignments[rid] = None
            self._emit("leaf-completed", leaf=edge.leaf,
                       done=sorted(self.cs.done))
            if is_root_done(self.spec, self.cs):
                if self.pending_goal is None:
                    self.finished = True
                    self._emit("run-finished", success=True,
                               time=round(outcome.t, 6))
                return
        self._progress_replan()

    # --- dispatch ------------------------------------------------------------------

    def _preconditions_live(self, action: Action) -> Optional[str]:
        return self.sim.check_preconditions(action)

    def _gates_pass(self, edge: Edge) -> bool:
        if edge.leaf is not None and edge.kind in ("action", "transfer", "rendezvous"):
            if edge.leaf not in self.leaf_q or self.leaf_q[edge.leaf] != edge.q_from:
                return False
        if edge.kind == "action":
            if self.assignments.get(edge.robot) != edge.leaf:
                return False
            if edge.action.kind == skills.HANDOVER_R2R:
                giver = edge.action.target
                if (giver, edge.robot, edge.action.obj) not in self.pending:
                    return False
                if self.sim.robots[giver].rendezvous_with != edge.robot:
                    return False
        elif edge.kind == "assign":
            if self.assignments.get(edge.robot) is not None:
                return False
            if edge.leaf not in self.leaf_q:
                return False
            if edge.leaf in [l for l in self.assignments.values() if l]:
                return False
            if edge.leaf not in self.model.eligible(self.cs):
                return False
        elif edge.kind == "refocus":
            if self.assignments.get(edge.robot) != edge.leaf:
                return False
            if edge.to_leaf not in self.leaf_q:
                return False
            if edge.to_leaf not in self.model.eligible(self.cs):
                return False
        elif edge.kind == "release":
            if self.assignments.get(edge.robot) != edge.leaf:
                return False
        elif edge.kind == "transfer":
            if self.assignments.get(edge.robot) != edge.leaf:
                return False
            if self.assignments.get(edge.partner) is not None:
                return False
        elif edge.kind == "rendezvous":
            if self.assignments.get(edge.robot) != edge.leaf:
                return False
            if self.assignments.get(edge.partner) is not None:
                return False
            if self.sim.robots[edge.robot].rendezvous_with != edge.partner:
                return False
            if self.sim.robots[edge.partner].payload is not None:
                return False
        return True

    def _apply_switch(self, edge: Edge):
        if edge.kind == "assign":
            self.assignments[edge.robot] = edge.leaf
        elif edge.kind == "refocus":
            self.assignments[edge.robot] = edge.to_leaf
        elif edge.kind == "release":
            self.assignments[edge.robot] = None
        elif edge.kind == "transfer":
            self.assignments[edge.robot] = None
            self.assignments[edge.partner] = edge.leaf
        elif edge.kind == "rendezvous":
            self.assignments[edge.robot] = None
            self.assignments[edge.partner] = edge.leaf
            payload = self.sim.robots[edge.robot].payload
            self.pending.add((edge.robot, edge.partner, payload))
        self._emit("switch", switch=edge.kind, label=edge.label())

    def _locked(self, rid: str) -> bool:
        return any(giver == rid for giver, _, _ in self.pending)

    def _dispatch(self):
        if self.halted_until is not None:
            return
        progressed = True
        while progressed:
            progressed = False
            next_by_robot: Dict[str, int] = {}
            for i, edge in enumerate(self.queue):
                if edge.robot not in next_by_robot:
                    next_by_robot[edge.robot] = i
            for rid in sorted(self.sim.robots):
                if rid in self.inflight or self._locked(rid):
                    continue
                if rid not in next_by_robot:
                    continue
                index = next_by_robot[rid]
                edge = self.queue[index]
                earliest = self.edge_earliest.get(id(edge), 0.0)
                if self.sim.now < earliest:
                    continue
                if not self._gates_pass(edge):
                    continue
                if edge.kind != "action":
                    self.queue.pop(index)
                    self._apply_switch(edge)
                    progressed = True
                    break  # queue indices are stale now; rescan
                action = edge.action
                if action.kind == skills.HANDOVER_R2R and not self.cfg.parallel_geom:
                    key = id(edge)
                    if key not in self.edge_earliest:
                        # pose planning happens serially once both sides are ready
                        self.edge_earliest[key] = self.sim.now + self.cfg.geom_serial_delay
                        continue
                if self.cfg.reactive and not self.cfg.replay_only:
                    problem = self._preconditions_live(action)
                    if problem is not None:
                        self.queue.pop(index)
                        self._halt_and_replan(f"kinematic-infeasibility:{problem}",
                                              self.cfg.plan_latency)
                        return
                nominal = self.model.action_duration(rid, action)
                try:
                    self.sim.start_action(action, nominal,
                                          check=self.cfg.reactive and not self.cfg.replay_only)
                except Exception as exc:
                    self.queue.pop(index)
                    if self.cfg.replay_only:
                        self._fail(f"replay dispatch failed: {exc}")
                    else:
                        self._halt_and_replan(f"dispatch:{exc}", self.cfg.plan_latency)
                    return
                self.queue.pop(index)
                self.inflight[rid] = edge
                self._emit("edge-dispatched", robot=rid, label=edge.label(),
                           leaf=edge.leaf)
                progressed = True
                break  # queue indices are stale now; rescan

    # --- main loop --------------------------------------------------------------

    def tick(self):
        outcomes = self.sim.step(self.tick_dt)
        self._observe_humans()
        for outcome in outcomes:
            self._handle_outcome(outcome)
            if self.finished is not None:
                return
        if self.halted_until is not None and self.sim.now >= self.halted_until:
            self.halted_until = None
            if self.halt_plan is not None:
                self._install(self.halt_plan, cause="halt-resume")
                self.halt_plan = None
                self._emit("resume")
        if self.pending_goal is not None and self.sim.now >= self.pending_goal[0]:
            _, new_spec = self.pending_goal
            self.pending_goal = None
            self._apply_goal(new_spec)
        if self.pending_improve is not None and self.sim.now >= self.pending_improve:
            self._apply_improvement()
        if self.finished is not None:
            return
        self._predictive_adapt()
        self._check_takeover()
        self._check_intrusions()
        if self.replans > self.cfg.replan_cap and not self.cfg.replay_only:
            self._fail(f"replan count {self.replans} over the cap")
            return
        self._dispatch()

    def run(self, max_time: Optional[float] = None) -> RunResult:
        horizon = max_time if max_time is not None else max(
            self.cfg.timeout_factor * max(self.nominal_makespan, 1.0), 10.0)
        while self.finished is None and self.sim.now < horizon:
            self.tick()
        if self.finished is None:
            self._fail("timeout")
        t_end = self.sim.now if not self.finished else next(
            (e["t"] for e in reversed(self.events) if e["type"] == "run-finished"),
            self.sim.now)
        metrics = fluency_metrics(
            self.sim.log, t_end,
            robot_ids=sorted(self.sim.robots), human_ids=sorted(self.sim.humans))
        return RunResult(
            success=bool(self.finished),
            time_cost=round(t_end, 6),
            replans=self.replans,
            takeovers=self.takeovers,
            metrics=metrics,
            reason=self.failure_reason,
            events=self.events,
            nominal_makespan=self.nominal_makespan,
        )

    # --- console-facing snapshot --------------------------------------------------

    def snapshot(self) -> dict:
        sim = self.sim
        return {
            "t": round(sim.now, 6),
            "robots": [
                {"id": rid, "base": list(r.spec.base), "reach": r.spec.reach,
                 "payload": r.payload,
                 "action": r.action.label() if r.action else None,
                 "rendezvous_with": r.rendezvous_with,
                 "leaf": self.assignments.get(rid)}
                for rid, r in sorted(sim.robots.items())],
            "objects": [
                {"id": oid, "pos": list(o.pos) if o.pos else None,
                 "held_by": o.held_by, "delivered_to": o.delivered_to}
                for oid, o in sorted(sim.objects.items())],
            "humans": [
                {"id": hid, "pos": list(h.pos), "moving": bool(h.waypoints)}
                for hid, h in sorted(sim.humans.items())],
            "hierarchy": None if self.spec is None else {
                "root": self.spec.root,
                "done": sorted(self.cs.done),
                "eligible": sorted(self.model.eligible(self.cs)),
                "leaves": sorted(self.spec.leaves),
            },
            "plan": self.plan.to_json() if self.plan else None,
            "speculative": None if self.speculative is None else {
                "human": self.speculative.human,
                "to_robot": self.speculative.to_robot,
                "ready_at": round(self.speculative.ready_at, 6)},
            "halted": self.halted_until is not None,
            "replans": self.replans,
            "takeovers": self.takeovers,
            "finished": self.finished,
        }


def exec_config_from(overrides: Dict[str, object]) -> ExecConfig:
    known = {f for f in ExecConfig.__dataclass_fields__}
    return ExecConfig(**{k: v for k, v in overrides.items() if k in known})


def run_scenario(scn: Scenario, exec_config: Optional[ExecConfig] = None,
                 planner_config: Optional[PlannerConfig] = None,
                 seed: Optional[int] = None) -> RunResult:
    """Loads, plans and executes one scenario to completion or failure."""
    sim = scn.build_sim(seed=seed)
    symbols = SceneSymbols(objects=tuple(sorted(sim.objects)),
                           humans=tuple(sorted(sim.humans)),
                           locations=tuple(sorted(sim.locations)))
    names = NameSource(1)
    spec = scn.explicit_spec()
    if spec is None:
        if not scn.instruction:
            raise ValueError(f"scenario {scn.name} has neither instruction nor spec")
        spec = translate_text(scn.instruction, symbols, names=names)
    if exec_config is not None:
        cfg = exec_config
    elif scn.config:
        cfg = exec_config_from(scn.config)
    else:
        cfg = ExecConfig()
    engine = RhpEngine(sim, spec, cfg, planner_config, tick=scn.tick,
                       symbols=symbols, names=names)
    return engine.run()
