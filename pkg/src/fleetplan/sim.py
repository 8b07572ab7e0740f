"""Deterministic-seedable planar world: fixed-base robots, objects, humans on
waypoint scripts, injected dynamic events, noisy skill durations, and the
activity log behind the fluency metrics.

The simulator owns all mutable world state and advances single-threaded;
everything the planner sees is an immutable snapshot.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import skills
from .skills import Action
from .team import RobotSpec, WorldView

EVENT_KINDS = ("H-MOVE", "O-MOVE", "GOAL", "RES", "FAIL")


@dataclass(frozen=True)
class DynamicEvent:
    at: float
    kind: str  # Table-style abbreviations, see EVENT_KINDS
    human: Optional[str] = None
    waypoints: Tuple[Tuple[float, float], ...] = ()
    speed: Optional[float] = None
    obj: Optional[str] = None
    pos: Optional[Tuple[float, float]] = None
    text: Optional[str] = None      # GOAL instruction
    robot: Optional[str] = None     # FAIL target
    action_kind: Optional[str] = None
    duration: float = 0.0           # RES lock duration

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class SimObject:
    id: str
    label: str
    pos: Optional[Tuple[float, float]]
    graspable: bool = True
    held_by: Optional[str] = None
    delivered_to: Optional[str] = None
    locked_until: float = 0.0


@dataclass
class SimHuman:
    id: str
    pos: Tuple[float, float]
    waypoints: List[Tuple[float, float]] = field(default_factory=list)
    speed: float = 0.8
    walk_start: Optional[float] = None


@dataclass
class SimRobot:
    spec: RobotSpec
    payload: Optional[str] = None
    rendezvous_with: Optional[str] = None
    action: Optional[Action] = None
    action_start: float = 0.0
    action_end: float = 0.0
    action_blind: bool = False   # started without the precondition check
    action_meta: dict = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.spec.id

    def reach(self, point: Sequence[float]) -> bool:
        dx = point[0] - self.spec.base[0]
        dy = point[1] - self.spec.base[1]
        return dx * dx + dy * dy <= self.spec.reach ** 2


@dataclass(frozen=True)
class Outcome:
    t: float
    robot: Optional[str]
    action: Optional[Action]
    status: str  # "done" | "interrupted" | "failed_precondition" | "injected_failure" | "goal"
    detail: str = ""


@dataclass(frozen=True)
class Interval:
    agent: str       # "robot:<id>" or "human:<id>"
    start: float
    end: float
    what: str
    passive: bool = False


class PreconditionViolated(ValueError):
    pass


class Simulator:
    def __init__(self, robots: Sequence[RobotSpec], objects: Sequence[SimObject],
                 humans: Sequence[SimHuman],
                 locations: Optional[Mapping[str, Tuple[float, float]]] = None,
                 events: Sequence[DynamicEvent] = (), seed: int = 0,
                 duration_noise: float = 0.2):
        self.now = 0.0
        self.robots: Dict[str, SimRobot] = {r.id: SimRobot(r) for r in robots}
        self.objects: Dict[str, SimObject] = {o.id: o for o in objects}
        self.humans: Dict[str, SimHuman] = {h.id: h for h in humans}
        self.locations: Dict[str, Tuple[float, float]] = dict(locations or {})
        self.rng = random.Random(seed)
        self.duration_noise = duration_noise
        self._events: List[Tuple[float, int, DynamicEvent]] = []
        for i, ev in enumerate(sorted(events, key=lambda e: e.at)):
            heapq.heappush(self._events, (ev.at, i, ev))
        self.log: List[Interval] = []
        self._armed_failures: List[Tuple[str, str]] = []  # (robot, action kind)

    # --- snapshots ---

    def world_view(self) -> WorldView:
        objects = []
        for o in sorted(self.objects.values(), key=lambda o: o.id):
            pos = o.pos if o.pos is not None else self.robots[o.held_by].spec.base \
                if o.held_by in self.robots else (0.0, 0.0)
            graspable = o.graspable and self.now >= o.locked_until
            objects.append((o.id, pos, graspable))
        humans = tuple((h.id, h.pos) for h in sorted(self.humans.values(), key=lambda h: h.id))
        locations = tuple(sorted(self.locations.items()))
        return WorldView(tuple(objects), humans, locations)

    def sample_duration(self, nominal: float) -> float:
        if self.duration_noise <= 0:
            return nominal
        xi = self.rng.uniform(-self.duration_noise, self.duration_noise)
        return nominal * (1.0 + xi)

    # --- action lifecycle ---

    def check_preconditions(self, action: Action) -> Optional[str]:
        """Executor-side truth: None when the action can start now."""
        robot = self.robots[action.robot]
        if robot.action is not None:
            return "robot busy"
        if action.kind == skills.PICK:
            obj = self.objects[action.obj]
            if robot.payload is not None:
                return "hands full"
            if obj.held_by is not None or obj.pos is None:
                return f"{action.obj} not available"
            if not obj.graspable or self.now < obj.locked_until:
                return f"{action.obj} not graspable"
            if not robot.reach(obj.pos):
                return f"{action.obj} out of reach"
        elif action.kind == skills.PLACE:
            if robot.payload != action.obj:
                return f"not holding {action.obj}"
            if action.target not in self.locations or not robot.reach(self.locations[action.target]):
                return f"location {action.target} out of reach"
        elif action.kind == skills.HANDOVER_R2H:
            if robot.payload != action.obj:
                return f"not holding {action.obj}"
            human = self.humans.get(action.target)
            if human is None or not robot.reach(human.pos):
                return f"human {action.target} out of reach"
        elif action.kind == skills.HANDOVER_R2R:
            giver = self.robots.get(action.target)
            if giver is None or giver.payload != action.obj:
                return f"giver {action.target} not holding {action.obj}"
            if giver.rendezvous_with != action.robot:
                return f"giver {action.target} not at the rendezvous"
            if robot.payload is not None:
                return "receiver hands full"
        elif action.kind == skills.MOVE_TO_RENDEZVOUS:
            if robot.payload is None:
                return "nothing to hand over"
        return None

    def start_action(self, action: Action, nominal: float, check: bool = True) -> float:
        """Begins an action; returns the sampled duration.  With check=False
        the robot executes blind and an impossible action wastes its full
        duration before failing."""
        robot = self.robots[action.robot]
        problem = self.check_preconditions(action)
        if problem == "robot busy":
            raise PreconditionViolated(problem)
        if check and problem is not None:
            raise PreconditionViolated(problem)
        duration = self.sample_duration(nominal)
        robot.action = action
        robot.action_start = self.now
        robot.action_end = self.now + duration
        robot.action_blind = problem is not None
        return duration

    def abort_action(self, rid: str, status: str = "interrupted", detail: str = "") -> Optional[Outcome]:
        robot = self.robots[rid]
        if robot.action is None:
            return None
        action = robot.action
        self._log_activity(robot, self.now)
        robot.action = None
        return Outcome(self.now, rid, action, status, detail)

    def _log_activity(self, robot: SimRobot, end: float):
        action = robot.action
        self.log.append(Interval(f"robot:{robot.id}", robot.action_start, end,
                                 action.kind))
        if action.kind == skills.HANDOVER_R2R:
            self.log.append(Interval(f"robot:{action.target}", robot.action_start, end,
                                     action.kind, passive=True))
        if action.kind == skills.HANDOVER_R2H:
            self.log.append(Interval(f"human:{action.target}", robot.action_start, end,
                                     "receive"))

    def _complete(self, robot: SimRobot) -> Outcome:
        action = robot.action
        t = robot.action_end
        armed = (robot.id, action.kind) in self._armed_failures
        if armed:
            self._armed_failures.remove((robot.id, action.kind))
        self._log_activity(robot, t)
        robot.action = None
        if armed:
            if robot.payload is not None:
                dropped = self.objects[robot.payload]
                dropped.held_by = None
                dropped.pos = robot.spec.base
                robot.payload = None
            return Outcome(t, robot.id, action, "injected_failure")
        if robot.action_blind:
            # the stale-world motion completed against thin air
            return Outcome(t, robot.id, action, "failed_precondition",
                           self.check_preconditions_detail(action))
        if action.kind == skills.PICK:
            obj = self.objects[action.obj]
            obj.held_by = robot.id
            obj.pos = None
            robot.payload = action.obj
        elif action.kind == skills.PLACE:
            obj = self.objects[action.obj]
            obj.held_by = None
            obj.pos = self.locations[action.target]
            robot.payload = None
            robot.rendezvous_with = None
        elif action.kind == skills.HANDOVER_R2H:
            obj = self.objects[action.obj]
            obj.held_by = None
            obj.delivered_to = action.target
            obj.pos = self.humans[action.target].pos
            robot.payload = None
            robot.rendezvous_with = None
        elif action.kind == skills.HANDOVER_R2R:
            giver = self.robots[action.target]
            obj = self.objects[action.obj]
            giver.payload = None
            giver.rendezvous_with = None
            robot.payload = action.obj
            obj.held_by = robot.id
        elif action.kind == skills.MOVE_TO_RENDEZVOUS:
            robot.rendezvous_with = action.target
        return Outcome(t, robot.id, action, "done")

    def check_preconditions_detail(self, action: Action) -> str:
        robot = self.robots[action.robot]
        saved = robot.action
        robot.action = None
        detail = self.check_preconditions(action) or ""
        robot.action = saved
        return detail

    # --- world dynamics ---

    def _apply_event(self, ev: DynamicEvent, outcomes: List[Outcome]):
        if ev.kind == "H-MOVE":
            human = self.humans[ev.human]
            human.waypoints = list(ev.waypoints)
            if ev.speed:
                human.speed = ev.speed
        elif ev.kind == "O-MOVE":
            obj = self.objects[ev.obj]
            if obj.held_by is None and obj.delivered_to is None:
                obj.pos = ev.pos
        elif ev.kind == "RES":
            self.objects[ev.obj].locked_until = max(
                self.objects[ev.obj].locked_until, ev.at + ev.duration)
        elif ev.kind == "FAIL":
            robot = self.robots[ev.robot]
            if robot.action is not None and robot.action.kind == ev.action_kind:
                outcome = self.abort_action(ev.robot, "injected_failure", "injected")
                if robot.payload is not None:
                    dropped = self.objects[robot.payload]
                    dropped.held_by = None
                    dropped.pos = robot.spec.base
                    robot.payload = None
                if outcome:
                    outcomes.append(outcome)
            else:
                self._armed_failures.append((ev.robot, ev.action_kind))
        elif ev.kind == "GOAL":
            outcomes.append(Outcome(ev.at, None, None, "goal", ev.text or ""))

    def _move_humans(self, dt: float):
        for human in self.humans.values():
            remaining = human.speed * dt
            moved = False
            while human.waypoints and remaining > 1e-12:
                tx, ty = human.waypoints[0]
                dx, dy = tx - human.pos[0], ty - human.pos[1]
                dist = math.hypot(dx, dy)
                if dist <= remaining:
                    human.pos = (tx, ty)
                    human.waypoints.pop(0)
                    remaining -= dist
                    moved = moved or dist > 0
                else:
                    frac = remaining / dist
                    human.pos = (human.pos[0] + dx * frac, human.pos[1] + dy * frac)
                    remaining = 0.0
                    moved = True
            if moved and human.walk_start is None:
                human.walk_start = self.now - dt
            if not human.waypoints and human.walk_start is not None:
                self.log.append(Interval(f"human:{human.id}", human.walk_start,
                                         self.now, "walk"))
                human.walk_start = None

    def step(self, dt: float) -> List[Outcome]:
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.now += dt
        outcomes: List[Outcome] = []
        while self._events and self._events[0][0] <= self.now:
            _, _, ev = heapq.heappop(self._events)
            self._apply_event(ev, outcomes)
        self._move_humans(dt)
        for rid in sorted(self.robots):
            robot = self.robots[rid]
            if robot.action is None:
                continue
            action = robot.action
            # the physical rule: a human handover needs its target in reach
            # for the whole motion
            if action.kind == skills.HANDOVER_R2H and not robot.action_blind:
                human = self.humans.get(action.target)
                if human is None or not robot.reach(human.pos):
                    outcomes.append(self.abort_action(
                        rid, "interrupted", f"{action.target} left the workspace"))
                    continue
            if self.now >= robot.action_end:
                outcomes.append(self._complete(robot))
        return outcomes

    def idle_robots(self) -> List[str]:
        return [rid for rid in sorted(self.robots) if self.robots[rid].action is None]

    def delivered(self, obj: str) -> Optional[str]:
        return self.objects[obj].delivered_to


# --- fluency metrics --------------------------------------------------------

def _merge(intervals: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    out: List[Tuple[float, float]] = []
    for start, end in sorted(intervals):
        if out and start <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], end))
        else:
            out.append((start, end))
    return out


def fluency_metrics(log: Sequence[Interval], total: float,
                    robot_ids: Sequence[str], human_ids: Sequence[str]) -> dict:
    """H-IDLE / R-IDLE / C-ACT / F-DEL percentages per their footnote
    definitions; F-DEL may go negative under overlap."""
    if total <= 0:
        return {"h_idle": 0.0, "r_idle": 0.0, "c_act": 0.0, "f_del": 0.0}

    def active_share(agent: str) -> float:
        spans = _merge([(iv.start, min(iv.end, total)) for iv in log
                        if iv.agent == agent and iv.start < total])
        return sum(e - s for s, e in spans) / total

    r_idle = 100.0 * (1.0 - (sum(active_share(f"robot:{r}") for r in robot_ids)
                             / len(robot_ids))) if robot_ids else 0.0
    h_idle = 100.0 * (1.0 - (sum(active_share(f"human:{h}") for h in human_ids)
                             / len(human_ids))) if human_ids else 0.0

    # concurrent activity: share of time with >= 2 agents busy
    boundaries = []
    for iv in log:
        if iv.start < total:
            boundaries.append((iv.start, 1))
            boundaries.append((min(iv.end, total), -1))
    boundaries.sort()
    c_act = 0.0
    depth, last = 0, 0.0
    for t, delta in boundaries:
        if depth >= 2:
            c_act += t - last
        depth += delta
        last = t
    c_act = 100.0 * c_act / total

    # functional delay: signed gaps between one robot finishing and the next
    # robot starting
    robot_iv = sorted((iv.start, iv.end, iv.agent) for iv in log
                      if iv.agent.startswith("robot:"))
    f_del = 0.0
    for (s1, e1, a1), (s2, e2, a2) in zip(robot_iv, robot_iv[1:]):
        if a1 != a2:
            f_del += s2 - e1
    f_del = 100.0 * f_del / total

    return {"h_idle": round(h_idle, 3), "r_idle": round(r_idle, 3),
            "c_act": round(c_act, 3), "f_del": round(f_del, 3)}
