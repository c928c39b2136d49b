"""Four-category outlier rejection: time, static, out of view and RTS gates."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.trajdata.smoother import SmootherConfig, SmoothedStates, rts_smooth
from src.trajdata.trajectory import FLAG_NON_MONOTONE, TrackedTrajectory

CATEGORIES = ("time", "static", "out_of_view", "rts")


@dataclass
class OutlierReport:
    """Per-category counts over a set of trajectories; `total` counts each trajectory once."""

    n_trajectories: int = 0
    counts: Dict[str, int] = field(default_factory=lambda: {c: 0 for c in CATEGORIES + ("total",)})
    flagged: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def percentages(self) -> Dict[str, float]:
        if self.n_trajectories == 0:
            return {k: 0.0 for k in self.counts}
        return {k: 100.0 * v / self.n_trajectories for k, v in self.counts.items()}

    def to_json(self) -> Dict:
        return {
            "n_trajectories": self.n_trajectories,
            "counts": dict(self.counts),
            "percent": self.percentages,
            "flagged": {k: list(v) for k, v in sorted(self.flagged.items())},
        }

    def write(self, path: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
        return path


def path_length(traj: TrackedTrajectory) -> float:
    """Polyline length through the measured samples."""
    xy = traj.xy[traj.valid_mask()]
    if len(xy) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))


def is_time_outlier(traj: TrackedTrajectory, tolerance: float) -> bool:
    T = traj.horizon
    if FLAG_NON_MONOTONE in traj.flags or np.any(np.diff(traj.t) <= 0):
        return True
    return not (T * (1.0 - tolerance) <= traj.duration <= T * (1.0 + tolerance))


def is_static(traj: TrackedTrajectory, gate: float) -> bool:
    return path_length(traj) <= gate


def is_out_of_view(traj: TrackedTrajectory) -> bool:
    return not bool(traj.valid_mask().all())


def is_rts_outlier(traj: TrackedTrajectory, smoothed: SmoothedStates, cfg: SmootherConfig) -> bool:
    residuals = smoothed.position_residuals(traj.xy)
    if np.any(residuals[np.isfinite(residuals)] > cfg.position_gate):
        return True
    a_lon = smoothed.longitudinal_acceleration(cfg.min_speed_accel)
    return bool(np.any(a_lon > cfg.accel_max) or np.any(a_lon < cfg.decel_min))


def trajectory_categories(traj: TrackedTrajectory, cfg: SmootherConfig) -> Tuple[str, ...]:
    """Categories one trajectory trips; the predicates are independent."""
    found = []
    if is_time_outlier(traj, cfg.duration_tolerance):
        found.append("time")
    if is_static(traj, cfg.static_length_gate):
        found.append("static")
    if is_out_of_view(traj):
        found.append("out_of_view")
    if traj.valid_mask().any() and is_rts_outlier(traj.to_world(), rts_smooth(traj.to_world(), cfg), cfg):
        found.append("rts")
    return tuple(found)


def classify_outliers(trajs: Sequence[TrackedTrajectory], cfg: SmootherConfig = SmootherConfig(),
                      threads: int = 1) -> Tuple[List[TrackedTrajectory], OutlierReport]:
    """
    Classify trajectories and keep those that trip no rule.

    Args:
        trajs: Trajectories to classify
        cfg: Gates and smoother settings
        threads: Worker threads (results do not depend on it)

    Returns:
        (clean trajectories in input order, OutlierReport)
    """
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        categories = list(pool.map(lambda tr: trajectory_categories(tr, cfg), trajs))

    report = OutlierReport(n_trajectories=len(trajs))
    clean = []
    for traj, found in zip(trajs, categories):
        for category in found:
            report.counts[category] += 1
        if found:
            report.counts["total"] += 1
            report.flagged[traj.key] = list(found)
        else:
            clean.append(traj)
    return clean, report
