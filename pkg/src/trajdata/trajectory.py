"""Canonical trajectory data model."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from src.noisemodel.covariance import rotation
from src.utils.errors import ArgumentError

# Flags set during ingestion / preprocessing
FLAG_NON_MONOTONE = "non_monotone_time"
FLAG_HEADING_FALLBACK = "heading_fallback"
FLAG_IDENTITY_ROTATION = "identity_rotation"


class ObjectClass(str, Enum):
    EGO = "ego"
    AGENT = "agent"


@dataclass(frozen=True)
class RawSample:
    """One row of trajectory data in world coordinates."""

    t: float
    x: float
    y: float
    ego_x: float
    ego_y: float
    ego_heading: float
    heading: Optional[float] = None


@dataclass(frozen=True)
class RigidTransform:
    """World -> local map p_local = R(-angle) (p_world - origin)."""

    origin: Tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def to_local(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return (points - np.asarray(self.origin)) @ rotation(-self.angle).T

    def to_world(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ rotation(self.angle).T + np.asarray(self.origin)

    def heading_to_local(self, heading: np.ndarray) -> np.ndarray:
        return np.asarray(heading, dtype=float) - self.angle

    def heading_to_world(self, heading: np.ndarray) -> np.ndarray:
        return np.asarray(heading, dtype=float) + self.angle


@dataclass(frozen=True)
class TrackedTrajectory:
    """
    Time-stamped 2D samples of one object together with the ego poses.

    Positions are world-frame unless `local_transform` is set, in which case
    `xy`, `ego_xy` and both headings are expressed in that local frame.
    Missing positions are NaN; missing headings are NaN.
    """

    scenario_id: str
    object_id: str
    object_class: ObjectClass
    t: np.ndarray
    xy: np.ndarray
    ego_xy: np.ndarray
    ego_heading: np.ndarray
    heading: np.ndarray
    horizon: float
    local_transform: Optional[RigidTransform] = None
    flags: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "object_class", ObjectClass(self.object_class))
        m = len(self.t)
        if m < 2:
            raise ArgumentError(f"Trajectory {self.key} needs at least 2 samples, got {m}")
        for name in ("xy", "ego_xy"):
            if getattr(self, name).shape != (m, 2):
                raise ArgumentError(f"{name} must have shape ({m}, 2)")
        for name in ("ego_heading", "heading"):
            if getattr(self, name).shape != (m,):
                raise ArgumentError(f"{name} must have shape ({m},)")
        if not np.all(np.isfinite(self.t)):
            raise ArgumentError(f"Trajectory {self.key} has non-finite timestamps")

    @property
    def key(self) -> str:
        return f"{self.scenario_id}/{self.object_id}"

    @property
    def m(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def has_heading(self) -> bool:
        return bool(np.all(np.isfinite(self.heading)))

    def sample(self, j: int) -> RawSample:
        heading = None if np.isnan(self.heading[j]) else float(self.heading[j])
        return RawSample(float(self.t[j]), float(self.xy[j, 0]), float(self.xy[j, 1]),
                         float(self.ego_xy[j, 0]), float(self.ego_xy[j, 1]),
                         float(self.ego_heading[j]), heading)

    def valid_mask(self) -> np.ndarray:
        """Samples that are present and not reset to (0, 0) in world coordinates."""
        world = self.world_xy()
        present = np.all(np.isfinite(world), axis=1)
        at_origin = np.zeros(self.m, dtype=bool)
        at_origin[present] = np.all(world[present] == 0.0, axis=1)
        return present & ~at_origin

    def tau(self) -> np.ndarray:
        """Rescaled times; a window slightly longer than T is normalized by its span."""
        span = max(self.horizon, self.duration)
        return (self.t - self.t[0]) / span

    def world_xy(self) -> np.ndarray:
        if self.local_transform is None:
            return self.xy
        return self.local_transform.to_world(self.xy)

    def to_world(self) -> "TrackedTrajectory":
        """Undo a local-frame normalization."""
        tf = self.local_transform
        if tf is None:
            return self
        return replace(self, xy=tf.to_world(self.xy), ego_xy=tf.to_world(self.ego_xy),
                       ego_heading=tf.heading_to_world(self.ego_heading),
                       heading=tf.heading_to_world(self.heading), local_transform=None)

    def slice(self, start: int, stop: int, horizon: Optional[float] = None) -> "TrackedTrajectory":
        """Contiguous sub-trajectory [start, stop)."""
        return replace(self, t=self.t[start:stop], xy=self.xy[start:stop],
                       ego_xy=self.ego_xy[start:stop], ego_heading=self.ego_heading[start:stop],
                       heading=self.heading[start:stop],
                       horizon=self.horizon if horizon is None else horizon)

    def with_flags(self, *flags: str) -> "TrackedTrajectory":
        return replace(self, flags=self.flags | frozenset(flags))

    @classmethod
    def from_samples(cls, scenario_id: str, object_id: str, object_class: str,
                     samples: Sequence[RawSample], horizon: Optional[float] = None) -> "TrackedTrajectory":
        """Build a trajectory from RawSample rows (kept in the given order)."""
        t = np.array([s.t for s in samples], dtype=float)
        heading = np.array([np.nan if s.heading is None else s.heading for s in samples], dtype=float)
        return cls(
            scenario_id=str(scenario_id),
            object_id=str(object_id),
            object_class=ObjectClass(object_class),
            t=t,
            xy=np.array([[s.x, s.y] for s in samples], dtype=float).reshape(-1, 2),
            ego_xy=np.array([[s.ego_x, s.ego_y] for s in samples], dtype=float).reshape(-1, 2),
            ego_heading=np.array([s.ego_heading for s in samples], dtype=float),
            heading=heading,
            horizon=float(horizon if horizon is not None else t[-1] - t[0]),
        )


def canonical_order(trajectories: Sequence[TrackedTrajectory]) -> List[TrackedTrajectory]:
    """Sort by (scenario, object, start time) so reductions do not depend on input order."""
    return sorted(trajectories, key=lambda tr: (tr.scenario_id, tr.object_id, float(tr.t[0]),
                                                tr.m, tr.xy.tobytes()))
