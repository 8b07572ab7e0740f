"""Short-horizon human motion forecasting behind a pluggable interface.

The default predictor is a least-squares constant-velocity fit over the
observation window; anything implementing ``predict(buffer, horizon)`` can
replace it via the scenario config.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class InsufficientData(ValueError):
    pass


class ObservationBuffer:
    """Ring buffer of (t, position) samples, strictly increasing in t."""

    def __init__(self, capacity: int = 10):
        self.capacity = capacity
        self._samples: deque = deque(maxlen=capacity)

    def push(self, t: float, position: Sequence[float]) -> None:
        if self._samples and t <= self._samples[-1][0]:
            raise ValueError(f"timestamps must increase: {t} after {self._samples[-1][0]}")
        self._samples.append((float(t), (float(position[0]), float(position[1]))))

    def __len__(self) -> int:
        return len(self._samples)

    @property
    def samples(self) -> List[Tuple[float, Tuple[float, float]]]:
        return list(self._samples)


@dataclass(frozen=True)
class Prediction:
    """Future positions at fixed frame spacing from the last observation."""

    positions: Tuple[Tuple[float, float], ...]
    frame_dt: float
    start_time: float  # timestamp of the first predicted frame


def predict(buf: ObservationBuffer, horizon: int, frame_dt: Optional[float] = None) -> Prediction:
    """Constant-velocity extrapolation by least squares over the buffer."""
    samples = buf.samples
    if len(samples) < 2:
        raise InsufficientData(f"{len(samples)} observation(s), need at least 2")
    ts = np.array([t for t, _ in samples])
    xs = np.array([p for _, p in samples])
    if frame_dt is None:
        frame_dt = float(np.median(np.diff(ts)))
    # first-degree fit per coordinate; shift times for conditioning
    t0 = ts[-1]
    coeffs = np.polyfit(ts - t0, xs, 1)  # rows: [velocity, offset], columns x/y
    future = np.arange(1, horizon + 1) * frame_dt
    pred = np.outer(future, coeffs[0]) + coeffs[1]
    return Prediction(tuple((float(x), float(y)) for x, y in pred),
                      frame_dt, float(t0 + frame_dt))


@dataclass(frozen=True)
class WorkspaceTransition:
    from_robot: str
    to_robot: str
    index: int      # prediction frame where sole membership changes
    eta: float      # seconds after the last observation


def _sole_owner(point: Tuple[float, float],
                robots: Sequence[Tuple[str, Tuple[float, float], float]]) -> Optional[str]:
    inside = [rid for rid, base, reach in robots
              if (point[0] - base[0]) ** 2 + (point[1] - base[1]) ** 2 <= reach ** 2]
    if len(inside) == 1:
        return inside[0]
    if len(inside) > 1:
        return None  # overlap counts as both, no sole owner
    return None


def workspace_transition(pred: Prediction,
                         robots: Sequence[Tuple[str, Tuple[float, float], float]],
                         start: Optional[Tuple[float, float]] = None
                         ) -> Optional[WorkspaceTransition]:
    """First predicted frame where the sole workspace owner changes.

    Crossing through an overlap region reports a transition only once the
    path reaches sole membership of a different workspace.  Robots are
    (id, base, reach) triples; ties on entry go to the nearest base.
    """
    ordered = sorted(robots, key=lambda r: r[0])
    current = _sole_owner(start, ordered) if start is not None else None
    for k, point in enumerate(pred.positions):
        inside = [(rid, base) for rid, base, reach in ordered
                  if (point[0] - base[0]) ** 2 + (point[1] - base[1]) ** 2 <= reach ** 2]
        if len(inside) == 1:
            owner = inside[0][0]
        elif len(inside) > 1:
            owner = None
        else:
            owner = None
        if owner is None and len(inside) > 1 and current is None:
            # entered straight into an overlap with no prior owner: nearest base
            nearest = min(inside, key=lambda ib: (point[0] - ib[1][0]) ** 2 + (point[1] - ib[1][1]) ** 2)
            current = nearest[0]
            continue
        if owner is not None:
            if current is not None and owner != current:
                return WorkspaceTransition(current, owner, k, (k + 1) * pred.frame_dt)
            current = owner
    return None
