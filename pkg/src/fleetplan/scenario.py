"""Scenario files: the JSON contract between generators, the CLI, the
executor and the console."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .hierarchy import HierSpec
from .sim import DynamicEvent, SimHuman, SimObject, Simulator
from .team import RobotSpec


@dataclass
class ScenarioRobot:
    id: str
    base: Tuple[float, float]
    reach: float
    weights: Dict[str, float] = field(default_factory=dict)

    def to_spec(self) -> RobotSpec:
        weights = dict(RobotSpec("_", (0, 0), 1.0).weights)
        weights.update(self.weights)
        return RobotSpec(self.id, tuple(self.base), self.reach, weights)


@dataclass
class ScenarioObject:
    id: str
    pos: Tuple[float, float]
    label: str = ""
    graspable: bool = True


@dataclass
class ScenarioHuman:
    id: str
    pos: Tuple[float, float]
    waypoints: List[Tuple[float, float]] = field(default_factory=list)
    speed: float = 0.8


@dataclass
class Scenario:
    name: str
    robots: List[ScenarioRobot]
    objects: List[ScenarioObject] = field(default_factory=list)
    humans: List[ScenarioHuman] = field(default_factory=list)
    locations: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    events: List[DynamicEvent] = field(default_factory=list)
    instruction: Optional[str] = None
    spec_json: Optional[dict] = None  # explicit hierarchy instead of text
    seed: int = 0
    duration_noise: float = 0.2
    tick: float = 0.05
    config: Dict[str, object] = field(default_factory=dict)  # executor overrides

    def build_sim(self, seed: Optional[int] = None,
                  duration_noise: Optional[float] = None) -> Simulator:
        return Simulator(
            robots=[r.to_spec() for r in self.robots],
            objects=[SimObject(o.id, o.label or o.id, tuple(o.pos), o.graspable)
                     for o in self.objects],
            humans=[SimHuman(h.id, tuple(h.pos), [tuple(w) for w in h.waypoints],
                             h.speed) for h in self.humans],
            locations={k: tuple(v) for k, v in self.locations.items()},
            events=self.events,
            seed=self.seed if seed is None else seed,
            duration_noise=(self.duration_noise if duration_noise is None
                            else duration_noise),
        )

    def explicit_spec(self) -> Optional[HierSpec]:
        return HierSpec.from_json(self.spec_json) if self.spec_json else None

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "seed": self.seed,
            "duration_noise": self.duration_noise,
            "tick": self.tick,
            "robots": [{"id": r.id, "base": list(r.base), "reach": r.reach,
                        "weights": r.weights} for r in self.robots],
            "objects": [{"id": o.id, "pos": list(o.pos), "label": o.label,
                         "graspable": o.graspable} for o in self.objects],
            "humans": [{"id": h.id, "pos": list(h.pos),
                        "waypoints": [list(w) for w in h.waypoints],
                        "speed": h.speed} for h in self.humans],
            "locations": {k: list(v) for k, v in self.locations.items()},
            "events": [_event_to_json(e) for e in self.events],
            "config": self.config,
        }
        if self.instruction is not None:
            out["instruction"] = self.instruction
        if self.spec_json is not None:
            out["spec"] = self.spec_json
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        return cls(
            name=data.get("name", "scenario"),
            robots=[ScenarioRobot(r["id"], tuple(r["base"]), r["reach"],
                                  dict(r.get("weights", {})))
                    for r in data["robots"]],
            objects=[ScenarioObject(o["id"], tuple(o["pos"]), o.get("label", ""),
                                    o.get("graspable", True))
                     for o in data.get("objects", [])],
            humans=[ScenarioHuman(h["id"], tuple(h["pos"]),
                                  [tuple(w) for w in h.get("waypoints", [])],
                                  h.get("speed", 0.8))
                    for h in data.get("humans", [])],
            locations={k: tuple(v) for k, v in data.get("locations", {}).items()},
            events=[_event_from_json(e) for e in data.get("events", [])],
            instruction=data.get("instruction"),
            spec_json=data.get("spec"),
            seed=data.get("seed", 0),
            duration_noise=data.get("duration_noise", 0.2),
            tick=data.get("tick", 0.05),
            config=dict(data.get("config", {})),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(json.loads(Path(path).read_text()))


def _event_to_json(e: DynamicEvent) -> dict:
    out = {"at": e.at, "kind": e.kind}
    if e.human is not None:
        out["human"] = e.human
        out["waypoints"] = [list(w) for w in e.waypoints]
        if e.speed is not None:
            out["speed"] = e.speed
    if e.obj is not None:
        out["obj"] = e.obj
    if e.pos is not None:
        out["pos"] = list(e.pos)
    if e.text is not None:
        out["text"] = e.text
    if e.robot is not None:
        out["robot"] = e.robot
        out["action_kind"] = e.action_kind
    if e.duration:
        out["duration"] = e.duration
    return out


def _event_from_json(data: dict) -> DynamicEvent:
    return DynamicEvent(
        at=data["at"],
        kind=data["kind"],
        human=data.get("human"),
        waypoints=tuple(tuple(w) for w in data.get("waypoints", [])),
        speed=data.get("speed"),
        obj=data.get("obj"),
        pos=tuple(data["pos"]) if data.get("pos") else None,
        text=data.get("text"),
        robot=data.get("robot"),
        action_kind=data.get("action_kind"),
        duration=data.get("duration", 0.0),
    )
