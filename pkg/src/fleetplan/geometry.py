"""Handover pose geometry: reach-sphere intersection, candidate sampling and
scoring, the approach/retreat protocol, and human-comfort target selection.

Everything is pure; callers may fan sampling calls out across workers.
Positions are 3-vectors; the planar simulator passes z = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

Vec = Tuple[float, float, float]


class NoOverlap(ValueError):
    pass


class OutOfWorkspace(ValueError):
    pass


def _vec(p: Sequence[float]) -> np.ndarray:
    a = np.zeros(3)
    a[: len(p)] = p
    return a


@dataclass(frozen=True)
class ReachSphere:
    center: Vec
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("reach radius must be positive")

    def contains(self, point: Sequence[float], slack: float = 1e-9) -> bool:
        return float(np.linalg.norm(_vec(point) - _vec(self.center))) <= self.radius + slack


@dataclass(frozen=True)
class HandoverCandidate:
    position: Vec
    feasibility: float  # in (0, 1]; 1 at the inscribed-sphere center
    time_proxy: float   # max end-effector distance, meters
    approach: Vec       # unit vector, receiver base toward the pose
    score: float        # weighted rank key, lower is better


def inscribed_sphere(a: ReachSphere, b: ReachSphere) -> Tuple[Vec, float]:
    """Largest ball inside the intersection of two reach spheres.

    For overlapping spheres the lens spans [d - r_b, r_a] along the center
    axis; the ball sits at the midpoint with radius (r_a + r_b - d) / 2.
    When one sphere contains the other, the smaller sphere itself is the
    answer.
    """
    ca, cb = _vec(a.center), _vec(b.center)
    d = float(np.linalg.norm(cb - ca))
    if d >= a.radius + b.radius:
        raise NoOverlap(f"reach spheres {d:.3f} m apart with radii "
                        f"{a.radius:.3f}+{b.radius:.3f}")
    if d <= abs(a.radius - b.radius):
        # containment: the smaller sphere is inscribed as-is
        inner = a if a.radius <= b.radius else b
        return tuple(_vec(inner.center)), inner.radius
    u = (cb - ca) / d
    lo, hi = d - b.radius, a.radius
    center = ca + u * (lo + hi) / 2.0
    radius = (a.radius + b.radius - d) / 2.0
    return tuple(center), radius


def sample_and_score(a: ReachSphere, b: ReachSphere,
                     ee_a: Sequence[float], ee_b: Sequence[float],
                     n: int, seed: int, alpha: float = 0.5) -> List[HandoverCandidate]:
    """Uniform candidates inside the inscribed sphere, ranked by a weighted
    sum of the two criteria: closeness to the sphere center (feasibility)
    and the larger of the two end-effector distances (time proxy).
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    center, rho = inscribed_sphere(a, b)
    c = _vec(center)
    rng = np.random.RandomState(seed)
    points = []
    while len(points) < n:
        batch = rng.uniform(-rho, rho, size=(max(2 * (n - len(points)), 8), 3))
        keep = batch[np.linalg.norm(batch, axis=1) < rho]
        points.extend(c + row for row in keep)
    points = points[:n]

    pa, pb = _vec(ee_a), _vec(ee_b)
    base_b = _vec(b.center)
    raw = []
    for x in points:
        feas = 1.0 - float(np.linalg.norm(x - c)) / rho if rho > 0 else 1.0
        proxy = max(float(np.linalg.norm(x - pa)), float(np.linalg.norm(x - pb)))
        raw.append((x, feas, proxy))
    max_proxy = max(p for _, _, p in raw) or 1.0
    out = []
    for x, feas, proxy in raw:
        score = alpha * (1.0 - feas) + (1.0 - alpha) * (proxy / max_proxy)
        direction = x - base_b
        norm = float(np.linalg.norm(direction))
        approach = tuple(direction / norm) if norm > 1e-12 else (1.0, 0.0, 0.0)
        out.append(HandoverCandidate(tuple(x), feas, proxy, approach, score))
    out.sort(key=lambda cand: (cand.score, cand.position))
    return out


@dataclass(frozen=True)
class ApproachPlan:
    pre_pose: Vec
    approach: Vec
    retreat_offset: float


def approach_retreat(candidate: HandoverCandidate, clearance: float,
                     retreat: float = 0.05) -> ApproachPlan:
    """Pre-handover pose a clearance short of the pose along the approach
    vector; the giver retreats the configured offset after transfer."""
    if clearance <= 0:
        raise ValueError("clearance must be positive")
    pos = _vec(candidate.position)
    app = _vec(candidate.approach)
    pre = pos - clearance * app
    return ApproachPlan(tuple(pre), candidate.approach, retreat)


def r2h_target(human_pos: Sequence[float], robot_base: Sequence[float], reach: float,
               elbow_angle_deg: float = 105.0, shoulder_height: float = 1.35,
               upper_arm: float = 0.30, forearm: float = 0.30,
               edge_margin: float = 0.05) -> Vec:
    """Comfort-zone handover target: forearm raised between 90 and 120
    degrees, offset from the torso toward the serving robot.

    The planar target is projected back inside the robot's workspace when
    the human stands at its edge.
    """
    h = _vec(human_pos)
    base = _vec(robot_base)
    planar = np.array([h[0] - base[0], h[1] - base[1], 0.0])
    dist = float(np.linalg.norm(planar))
    if dist > reach:
        raise OutOfWorkspace(f"human {dist:.3f} m from base, reach {reach:.3f} m")

    angle = elbow_angle_deg
    if not 90.0 <= angle <= 120.0:
        clamped = min(max(angle, 90.0), 120.0)
        log.warning("elbow angle %.1f outside [90, 120], clamped to %.1f", angle, clamped)
        angle = clamped
    theta = math.radians(angle)

    toward_robot = -planar / dist if dist > 1e-12 else np.array([1.0, 0.0, 0.0])
    elbow_height = shoulder_height - upper_arm
    target = h + toward_robot * (forearm * math.sin(theta))
    target[2] = elbow_height - forearm * math.cos(theta)

    planar_target = target.copy()
    planar_target[2] = 0.0
    base_planar = base.copy()
    base_planar[2] = 0.0
    offset = planar_target - base_planar
    limit = reach - edge_margin
    norm = float(np.linalg.norm(offset))
    if norm > limit:
        scaled = base_planar + offset * (limit / norm)
        target[0], target[1] = scaled[0], scaled[1]
    return tuple(target)
