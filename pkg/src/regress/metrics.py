"""Representation-error metrics: ADE with longitudinal / lateral split and percentiles."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import Config
from src.utils.errors import ArgumentError

TABLE_COLUMNS = ["class", "T", "n", "ade_lon", "ade_lat", "p999_lon", "p999_lat"]


@dataclass
class ErrorReport:
    """
    Pooled per-sample representation errors of a set of fitted trajectories.

    Attributes:
        distance: (K,) Euclidean residual per sample
        lon: (K,) residual projected on the heading direction
        lat: (K,) residual projected on the heading normal
        per_trajectory: One row per trajectory (key, m, ade, ade_lon, ade_lat)
    """

    distance: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    per_trajectory: List[Dict] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.distance)

    @property
    def ade(self) -> float:
        return float(np.mean(self.distance))

    @property
    def ade_lon(self) -> float:
        return float(np.mean(np.abs(self.lon)))

    @property
    def ade_lat(self) -> float:
        return float(np.mean(np.abs(self.lat)))

    def percentile(self, q: float = Config.PERCENTILE, component: str = "distance") -> float:
        values = {"distance": self.distance, "lon": np.abs(self.lon), "lat": np.abs(self.lat)}[component]
        return nearest_rank(values, q)

    @property
    def p999(self) -> float:
        return self.percentile()

    @property
    def p999_lon(self) -> float:
        return self.percentile(component="lon")

    @property
    def p999_lat(self) -> float:
        return self.percentile(component="lat")

    def summary(self) -> Dict[str, float]:
        return {
            "ade": self.ade, "ade_lon": self.ade_lon, "ade_lat": self.ade_lat,
            "p999": self.p999, "p999_lon": self.p999_lon, "p999_lat": self.p999_lat,
            "n_samples": self.n_samples,
        }


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ceil(q K)-th smallest of K values."""
    if not 0.0 < q <= 1.0:
        raise ArgumentError(f"Quantile must be in (0, 1], got {q}")
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ArgumentError("No samples to take a percentile of")
    rank = max(1, math.ceil(q * len(values)))
    return float(values[rank - 1])


def project_residuals(residuals: np.ndarray, headings: np.ndarray):
    """Split (m, 2) residuals into components along and across the per-sample heading."""
    cos, sin = np.cos(headings), np.sin(headings)
    lon = residuals[:, 0] * cos + residuals[:, 1] * sin
    lat = -residuals[:, 0] * sin + residuals[:, 1] * cos
    return lon, lat


def ade(fits: Sequence, observations: Sequence, headings: Optional[Sequence[np.ndarray]] = None) -> ErrorReport:
    """
    Average distance error of fitted curves against their observations.

    Args:
        fits: PosteriorFit per trajectory (predicted positions at the observed samples)
        observations: TrajectoryObservations per trajectory, aligned with fits
        headings: Per-sample headings per trajectory (observation headings if None)

    Returns:
        ErrorReport pooled over all samples in input order
    """
    if len(fits) != len(observations):
        raise ArgumentError(f"{len(fits)} fits but {len(observations)} observation sets")
    if headings is None:
        headings = [obs.headings for obs in observations]

    distances, lons, lats, rows = [], [], [], []
    for fit, obs, heading in zip(fits, observations, headings):
        heading = np.asarray(heading, dtype=float)
        if fit.predicted.shape != obs.positions.shape:
            raise ArgumentError(f"Fit and observations of {obs.key} are not aligned")
        if not np.all(np.isfinite(heading)):
            raise ArgumentError(f"Trajectory {obs.key} has no heading source for the lon/lat split")

        residual = fit.predicted - obs.positions
        dist = np.linalg.norm(residual, axis=1)
        lon, lat = project_residuals(residual, heading)
        distances.append(dist)
        lons.append(lon)
        lats.append(lat)
        rows.append({"key": obs.key, "m": len(dist), "ade": float(dist.mean()),
                     "ade_lon": float(np.abs(lon).mean()), "ade_lat": float(np.abs(lat).mean())})

    if not rows:
        raise ArgumentError("Need at least one trajectory")
    return ErrorReport(distance=np.concatenate(distances), lon=np.concatenate(lons),
                       lat=np.concatenate(lats), per_trajectory=rows)


def quantile_rows(report: ErrorReport, quantiles: Sequence[float] = Config.REPORT_QUANTILES) -> List[Dict]:
    """Box-plot quantiles of |lon| and |lat| errors."""
    return [{"quantile": q, "lon": report.percentile(q, "lon"), "lat": report.percentile(q, "lat"),
             "distance": report.percentile(q)} for q in quantiles]


def table_row(report: ErrorReport, object_class: str, horizon: float, degree: int) -> Dict:
    return {"class": object_class, "T": horizon, "n": degree,
            "ade_lon": report.ade_lon, "ade_lat": report.ade_lat,
            "p999_lon": report.p999_lon, "p999_lat": report.p999_lat}


def write_error_table(rows: Sequence[Dict], path: str) -> Path:
    """Write the (class, T, n) x error-column table as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=TABLE_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    return path


def write_quantiles(report: ErrorReport, object_class: str, horizon: float, degree: int, path: str,
                    quantiles: Sequence[float] = Config.REPORT_QUANTILES) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(quantile_rows(report, quantiles))
    frame.insert(0, "n", degree)
    frame.insert(0, "T", horizon)
    frame.insert(0, "class", object_class)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
