"""Shared pytest options and fixtures."""

import numpy as np
import pytest

from src.trajdata.frames import TrajectoryObservations
from src.trajdata.trajectory import TrackedTrajectory


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spd(rng, dim, scale=1.0):
    A = rng.standard_normal((dim, dim))
    return scale * (A @ A.T / dim + 0.5 * np.eye(dim))


@pytest.fixture
def make_trajectory():
    """Factory for world-frame trajectories with a parked ego at (-10, 0) unless given."""

    def build(xy, t=None, object_class="agent", heading=None, ego_xy=None, horizon=None,
              scenario_id="s0", object_id="a0"):
        xy = np.asarray(xy, dtype=float)
        m = len(xy)
        t = np.arange(m) * 0.1 if t is None else np.asarray(t, dtype=float)
        ego_xy = np.tile([-10.0, 0.0], (m, 1)) if ego_xy is None else np.asarray(ego_xy, dtype=float)
        heading = np.full(m, np.nan) if heading is None else np.asarray(heading, dtype=float)
        return TrackedTrajectory(
            scenario_id=scenario_id, object_id=object_id, object_class=object_class,
            t=t, xy=xy, ego_xy=ego_xy, ego_heading=np.zeros(m), heading=heading,
            horizon=float(t[-1] - t[0]) if horizon is None else horizon,
        )

    return build


@pytest.fixture
def make_observations():
    """Factory for observation bundles."""

    def build(positions, tau, object_class="ego", ego_positions=None, headings=None, key="s0/o0",
              frame_angle=0.0):
        positions = np.asarray(positions, dtype=float)
        m = len(positions)
        if ego_positions is None:
            ego_positions = positions.copy() if object_class == "ego" else np.tile([-10.0, 0.0], (m, 1))
        return TrajectoryObservations(
            key=key, object_class=object_class, positions=positions, tau=np.asarray(tau, dtype=float),
            ego_positions=np.asarray(ego_positions, dtype=float),
            headings=np.zeros(m) if headings is None else np.asarray(headings, dtype=float),
            frame_angle=frame_angle,
        )

    return build
