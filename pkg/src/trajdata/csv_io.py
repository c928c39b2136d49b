"""Canonical CSV ingestion and export of trajectory corpora.

Schema (UTF-8, header row, '.' decimal point, one row per sample):

    scenario_id,object_id,class,t,x,y,ego_x,ego_y,ego_heading,heading

`x`/`y` may be empty for a missing sample and `heading` may be empty when the
dataset provides no orientation.
"""

import re
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd

from src.trajdata.trajectory import FLAG_NON_MONOTONE, ObjectClass, TrackedTrajectory
from src.utils.errors import SchemaError
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)

COLUMNS = ["scenario_id", "object_id", "class", "t", "x", "y", "ego_x", "ego_y", "ego_heading", "heading"]
REQUIRED_NUMERIC = ["t", "ego_x", "ego_y", "ego_heading"]
OPTIONAL_NUMERIC = ["x", "y", "heading"]
EGO_OBJECT_ID = "ego"


def _read_frame(path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise SchemaError(f"Malformed row: {e}", path=str(path),
                          line=int(match.group(1)) if match else None)
    except pd.errors.EmptyDataError:
        raise SchemaError("File is empty (no header row)", path=str(path))
    except UnicodeDecodeError as e:
        raise SchemaError(f"File is not UTF-8: {e}", path=str(path))

    if list(frame.columns) != COLUMNS:
        raise SchemaError(f"Header must be {','.join(COLUMNS)}, got {','.join(frame.columns)}",
                          path=str(path), line=1)
    return frame


def _parse_numeric(frame: pd.DataFrame, path: Path) -> pd.DataFrame:
    out = frame.copy()
    for column in REQUIRED_NUMERIC + OPTIONAL_NUMERIC:
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw, errors="coerce")
        empty = raw == ""
        bad = values.isna() & ~empty
        if column in REQUIRED_NUMERIC:
            bad |= empty | ~np.isfinite(values.fillna(0.0))
        if bad.any():
            row = int(np.argmax(bad.to_numpy()))
            raise SchemaError(f"Invalid value '{frame[column].iloc[row]}' in column '{column}'",
                              path=str(path), line=row + 2)
        out[column] = values.astype(float)

    bad_class = ~frame["class"].isin([c.value for c in ObjectClass])
    if bad_class.any():
        row = int(np.argmax(bad_class.to_numpy()))
        raise SchemaError(f"Unknown class '{frame['class'].iloc[row]}'", path=str(path), line=row + 2)
    return out


def _build_trajectory(scenario_id: str, object_id: str, object_class: str, group: pd.DataFrame,
                      horizon: Optional[float]) -> TrackedTrajectory:
    t = group["t"].to_numpy(dtype=float)
    flags = []
    if np.any(np.diff(t) <= 0):
        flags.append(FLAG_NON_MONOTONE)
        logger.debug(f"Non-monotone timestamps in {scenario_id}/{object_id}")
    order = np.argsort(t, kind="stable")

    def col(*names):
        values = group[list(names)].to_numpy(dtype=float)[order]
        return values if len(names) > 1 else values[:, 0]

    t = t[order]
    traj = TrackedTrajectory(
        scenario_id=scenario_id,
        object_id=object_id,
        object_class=object_class,
        t=t,
        xy=col("x", "y"),
        ego_xy=col("ego_x", "ego_y"),
        ego_heading=col("ego_heading"),
        heading=col("heading"),
        horizon=float(horizon if horizon is not None else t[-1] - t[0]),
    )
    return traj.with_flags(*flags) if flags else traj


def _reconstruct_ego(scenario_id: str, rows: pd.DataFrame, horizon: Optional[float]) -> Optional[TrackedTrajectory]:
    poses = rows.drop_duplicates(subset="t", keep="first").sort_values("t", kind="stable")
    if len(poses) < 2:
        return None
    t = poses["t"].to_numpy(dtype=float)
    ego_xy = poses[["ego_x", "ego_y"]].to_numpy(dtype=float)
    ego_heading = poses["ego_heading"].to_numpy(dtype=float)
    return TrackedTrajectory(
        scenario_id=scenario_id,
        object_id=EGO_OBJECT_ID,
        object_class=ObjectClass.EGO,
        t=t,
        xy=ego_xy.copy(),
        ego_xy=ego_xy,
        ego_heading=ego_heading,
        heading=ego_heading.copy(),
        horizon=float(horizon if horizon is not None else t[-1] - t[0]),
    )


def ingest(path: str, format: str = "csv", horizon: Optional[float] = None) -> List[TrackedTrajectory]:
    """
    Read a canonical CSV corpus.

    Args:
        path: Path to the CSV file
        format: Input format (only "csv")
        horizon: Nominal horizon T to attach; the trajectory span if None

    Returns:
        One trajectory per (scenario_id, object_id), plus one reconstructed ego
        trajectory for each scenario that has no explicit ego rows
    """
    if format != "csv":
        raise SchemaError(f"Unsupported format '{format}'", path=str(path))
    path = Path(path)
    if not path.is_file():
        raise SchemaError("Input file does not exist", path=str(path))

    frame = _parse_numeric(_read_frame(path), path)
    trajectories = []

    for (scenario_id, object_id), group in frame.groupby(["scenario_id", "object_id"], sort=True):
        classes = group["class"].unique()
        if len(classes) != 1:
            raise SchemaError(f"Object {scenario_id}/{object_id} has mixed classes {list(classes)}",
                              path=str(path), line=int(group.index[0]) + 2)
        if len(group) < 2:
            logger.warning(f"Skipping {scenario_id}/{object_id}: fewer than 2 samples")
            continue
        trajectories.append(_build_trajectory(scenario_id, object_id, classes[0], group, horizon))

    for scenario_id, rows in frame.groupby("scenario_id", sort=True):
        if (rows["class"] == ObjectClass.EGO.value).any():
            continue
        ego = _reconstruct_ego(scenario_id, rows, horizon)
        if ego is not None:
            trajectories.append(ego)

    logger.info(f"Ingested {len(trajectories)} trajectories from {path}")
    return trajectories


def to_frame(corpus: Iterable[TrackedTrajectory]) -> pd.DataFrame:
    """Flatten trajectories (world frame) into canonical rows."""
    parts = []
    for traj in corpus:
        world = traj.to_world()
        parts.append(pd.DataFrame({
            "scenario_id": world.scenario_id,
            "object_id": world.object_id,
            "class": world.object_class.value,
            "t": world.t,
            "x": world.xy[:, 0],
            "y": world.xy[:, 1],
            "ego_x": world.ego_xy[:, 0],
            "ego_y": world.ego_xy[:, 1],
            "ego_heading": world.ego_heading,
            "heading": world.heading,
        }, columns=COLUMNS))
    if not parts:
        return pd.DataFrame(columns=COLUMNS)
    return pd.concat(parts, ignore_index=True)


def export(corpus: Iterable[TrackedTrajectory], path: str) -> Path:
    """
    Write trajectories as canonical CSV with shortest round-trip float formatting.

    Args:
        corpus: Trajectories to write
        path: Output file path

    Returns:
        Path of the written file
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        to_frame(corpus).to_csv(path, index=False, na_rep="", float_format=lambda v: repr(float(v)),
                                encoding="utf-8", lineterminator="\n")
    except OSError as e:
        raise SchemaError(f"Could not write corpus: {e}", path=str(path))
    return path
