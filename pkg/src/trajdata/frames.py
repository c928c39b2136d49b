"""Local-frame normalization, heading sources and the numeric bundle used for fitting."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from config import Config
from src.noisemodel.covariance import rotation
from src.trajdata.smoother import SmoothedStates
from src.trajdata.trajectory import (FLAG_HEADING_FALLBACK, FLAG_IDENTITY_ROTATION, ObjectClass,
                                     RigidTransform, TrackedTrajectory)
from src.utils.errors import ArgumentError
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrajectoryObservations:
    """
    Everything the regression and the type-II likelihood need from one trajectory.

    Attributes:
        key: scenario/object identifier
        object_class: ego or agent
        positions: (m, 2) observed positions in the fitting frame
        tau: (m,) rescaled times in [0, 1]
        ego_positions: (m, 2) ego positions in the same frame
        headings: (m,) heading per sample in the same frame (NaN if unknown)
        frame_angle: rotation of the fitting frame relative to the world frame
    """

    key: str
    object_class: ObjectClass
    positions: np.ndarray
    tau: np.ndarray
    ego_positions: np.ndarray
    headings: np.ndarray
    frame_angle: float = 0.0

    @property
    def m(self) -> int:
        return len(self.tau)

    @property
    def vector(self) -> np.ndarray:
        """Stacked observation vector [c(tau_1); ...; c(tau_m)]."""
        return self.positions.reshape(-1)


def to_local_frame(traj: TrackedTrajectory, smoothed: SmoothedStates,
                   min_speed: float = Config.MIN_SPEED_HEADING) -> TrackedTrajectory:
    """
    Translate the first measured sample to the origin and rotate the initial
    smoothed velocity onto +x.

    Below min_speed the dataset heading is used instead; without one the
    rotation is the identity and the trajectory is flagged.
    """
    if traj.local_transform is not None:
        raise ArgumentError(f"Trajectory {traj.key} is already in a local frame")

    measured = np.flatnonzero(traj.valid_mask())
    if measured.size == 0:
        raise ArgumentError(f"Trajectory {traj.key} has no measured samples")
    first = measured[0]
    origin = tuple(float(v) for v in traj.xy[first])

    flags = []
    velocity = smoothed.velocities[first]
    if np.linalg.norm(velocity) >= min_speed:
        angle = float(np.arctan2(velocity[1], velocity[0]))
    elif np.isfinite(traj.heading[first]):
        angle = float(traj.heading[first])
        flags.append(FLAG_HEADING_FALLBACK)
    else:
        angle = 0.0
        flags.append(FLAG_IDENTITY_ROTATION)
        logger.warning(f"{traj.key}: slow start without heading, using identity rotation")

    tf = RigidTransform(origin=origin, angle=angle)
    local = replace(traj, xy=tf.to_local(traj.xy), ego_xy=tf.to_local(traj.ego_xy),
                    ego_heading=tf.heading_to_local(traj.ego_heading),
                    heading=tf.heading_to_local(traj.heading), local_transform=tf)
    return local.with_flags(*flags) if flags else local


def heading_source(traj: TrackedTrajectory, smoothed: Optional[SmoothedStates] = None) -> np.ndarray:
    """
    Per-sample heading in the trajectory's current frame.

    Dataset headings win when complete; otherwise the smoothed velocity direction
    (smoothed states must then be expressed in the same frame as `traj`).
    """
    if traj.has_heading:
        return traj.heading.copy()
    if smoothed is None:
        return np.full(traj.m, np.nan)
    v = smoothed.velocities
    return np.arctan2(v[:, 1], v[:, 0])


def smoothed_in_frame(smoothed: SmoothedStates, tf: Optional[RigidTransform]) -> SmoothedStates:
    """Express world-frame smoothed states in a local frame."""
    if tf is None:
        return smoothed
    r = rotation(-tf.angle)
    R = np.kron(np.eye(2), r)
    means = smoothed.means.copy()
    means[:, :2] = tf.to_local(smoothed.positions)
    means[:, 2:] = smoothed.velocities @ r.T
    covs = np.einsum('ab,mbc,dc->mad', R, smoothed.covs, R)
    return replace(smoothed, means=means, covs=covs)


def observations(traj: TrackedTrajectory, headings: Optional[np.ndarray] = None) -> TrajectoryObservations:
    """
    Build the fitting bundle; missing and out-of-view samples are dropped.

    Args:
        traj: Trajectory (world or local frame)
        headings: Per-sample headings in the trajectory's frame (dataset headings if None)

    Returns:
        TrajectoryObservations
    """
    keep = traj.valid_mask()
    if keep.sum() < 1:
        raise ArgumentError(f"Trajectory {traj.key} has no measured samples")
    if headings is None:
        headings = traj.heading
    tau = np.clip(traj.tau(), 0.0, 1.0)
    return TrajectoryObservations(
        key=traj.key,
        object_class=traj.object_class,
        positions=np.ascontiguousarray(traj.xy[keep]),
        tau=tau[keep],
        ego_positions=np.ascontiguousarray(traj.ego_xy[keep]),
        headings=np.asarray(headings, dtype=float)[keep],
        frame_angle=traj.local_transform.angle if traj.local_transform is not None else 0.0,
    )
