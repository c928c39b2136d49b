"""Time-window extraction over a fixed horizon T."""

from dataclasses import replace
from enum import Enum
from typing import List, Optional

import numpy as np

from config import Config
from src.trajdata.trajectory import TrackedTrajectory

STRIDE_S = 1.0


class WindowMode(str, Enum):
    STRIDE_1S = "stride_1s"
    RANDOM_ONE = "random_one"
    WHOLE = "whole"


def _time_eps(T: float) -> float:
    return 1e-6 * max(1.0, T)


def _candidate_starts(traj: TrackedTrajectory, T: float) -> List[int]:
    """Start indices whose window of length T fits inside the trajectory."""
    eps = _time_eps(T)
    last_start = traj.t[-1] - T + eps
    return [int(i) for i in np.flatnonzero(traj.t <= last_start)]


def _window_at(traj: TrackedTrajectory, start: int, T: float) -> Optional[TrackedTrajectory]:
    stop = int(np.searchsorted(traj.t, traj.t[start] + T + _time_eps(T), side="right"))
    if stop - start < 2:
        return None
    return traj.slice(start, stop, horizon=T)


def window(traj: TrackedTrajectory, T: float, mode: str = WindowMode.RANDOM_ONE,
           rng_seed: int = 0, tolerance: float = Config.DURATION_TOLERANCE) -> List[TrackedTrajectory]:
    """
    Cut windows of duration T out of a trajectory.

    Args:
        traj: Source trajectory (time-sorted)
        T: Window horizon in seconds
        mode: stride_1s (starts every second), random_one (one window chosen by
              rng_seed) or whole (the trajectory itself, re-labelled with horizon T)
        rng_seed: Seed for random_one
        tolerance: Duration tolerance delta_T used by mode "whole"

    Returns:
        Windows as contiguous sub-trajectories; empty if the trajectory is shorter than T
    """
    mode = WindowMode(mode)

    if mode == WindowMode.WHOLE:
        if traj.duration < T * (1.0 - tolerance):
            return []
        return [traj.slice(0, traj.m, horizon=T)]

    starts = _candidate_starts(traj, T)
    if not starts:
        return []

    if mode == WindowMode.RANDOM_ONE:
        rng = np.random.default_rng(rng_seed)
        chosen = _window_at(traj, starts[int(rng.integers(len(starts)))], T)
        return [chosen] if chosen is not None else []

    windows = []
    eps = _time_eps(T)
    next_time = traj.t[0]
    for start in starts:
        if traj.t[start] + eps >= next_time:
            piece = _window_at(traj, start, T)
            if piece is not None:
                # Overlapping windows of one object need distinct ids
                windows.append(replace(piece, object_id=f"{traj.object_id}#w{len(windows)}"))
            next_time = traj.t[start] + STRIDE_S
    return windows
