"""Shared vocabulary for robot skills: action kinds, proposition builders,
default durations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ltl import Prop, SkillRef

PICK = "pick"
PLACE = "place"
HANDOVER_R2H = "handover_r2h"
HANDOVER_R2R = "handover_r2r"
MOVE_TO_RENDEZVOUS = "move_to_rendezvous"
IDLE = "idle"

ACTION_KINDS = (PICK, PLACE, HANDOVER_R2H, HANDOVER_R2R, MOVE_TO_RENDEZVOUS, IDLE)

DEFAULT_WEIGHTS = {
    PICK: 1.0,
    PLACE: 1.0,
    HANDOVER_R2H: 1.0,
    HANDOVER_R2R: 1.0,  # scaled by the approach/transfer/retreat protocol factor
    MOVE_TO_RENDEZVOUS: 1.0,
    IDLE: 0.0,
}


@dataclass(frozen=True)
class Action:
    """One discrete robot skill invocation.

    ``target`` is a location for place, a human for handover_r2h, the
    partner robot for move_to_rendezvous, and the giving robot for the
    joint handover_r2r (which the receiver executes).
    """

    kind: str
    robot: str
    obj: Optional[str] = None
    target: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")

    def label(self) -> str:
        parts = [self.kind]
        if self.obj:
            parts.append(self.obj)
        if self.target:
            parts.append(self.target)
        return f"{self.robot}:{'.'.join(parts)}"


def pick_prop(obj: str, robot: Optional[str] = None) -> Prop:
    name = f"pick_{obj}" if robot is None else f"pick_{robot}_{obj}"
    return Prop(name, skill=SkillRef(PICK, robot=robot, obj=obj))


def place_prop(obj: str, loc: str, robot: Optional[str] = None) -> Prop:
    name = f"place_{obj}_{loc}" if robot is None else f"place_{robot}_{obj}_{loc}"
    return Prop(name, skill=SkillRef(PLACE, robot=robot, obj=obj, target=loc))


def deliver_prop(human: str, obj: str, robot: Optional[str] = None) -> Prop:
    name = f"handover_{human}_{obj}" if robot is None else f"handover_{robot}_{human}_{obj}"
    return Prop(name, skill=SkillRef(HANDOVER_R2H, robot=robot, obj=obj, target=human))


def matches(prop: Prop, action: Action) -> bool:
    """A proposition fires when the action agrees with every bound field of
    its skill descriptor (unbound fields match anything)."""
    ref = prop.skill
    if ref is None or ref.skill != action.kind:
        return False
    for want, got in ((ref.robot, action.robot), (ref.obj, action.obj),
                      (ref.target, action.target)):
        if want is not None and want != got:
            return False
    return True
