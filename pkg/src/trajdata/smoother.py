"""Rauch-Tung-Striebel smoothing with a constant-velocity (double integrator) model.

State is [x, y, vx, vy]; the process noise is white acceleration with spectral
density sigma_a^2 and measurements are positions with isotropic noise sigma_m.
Missing and out-of-view samples are skipped in the update step.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from config import Config
from src.trajdata.trajectory import TrackedTrajectory
from src.utils.errors import ArgumentError, ParameterError

# Velocity standard deviation of the initial state when no finite difference is available
INITIAL_SPEED_STD = 20.0


@dataclass(frozen=True)
class SmootherConfig:
    """Smoother noise levels and the outlier gates evaluated on smoothed states."""

    process_noise: float = Config.SMOOTHER_PROCESS_NOISE
    measurement_noise: float = Config.SMOOTHER_MEASUREMENT_NOISE
    position_gate: float = Config.POSITION_GATE_M
    accel_max: float = Config.ACCEL_MAX
    decel_min: float = Config.DECEL_MIN
    static_length_gate: float = Config.STATIC_LENGTH_GATE_M
    duration_tolerance: float = Config.DURATION_TOLERANCE
    min_speed_accel: float = Config.MIN_SPEED_ACCEL

    def __post_init__(self):
        positive = ("process_noise", "measurement_noise", "position_gate", "accel_max",
                    "static_length_gate", "duration_tolerance")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.decel_min < 0:
            raise ParameterError(f"decel_min must be negative, got {self.decel_min}")


@dataclass(frozen=True)
class SmoothedStates:
    """Smoothed means (m, 4) and covariances (m, 4, 4) of [x, y, vx, vy]."""

    t: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    measured: np.ndarray
    time_outlier: bool = False

    @property
    def positions(self) -> np.ndarray:
        return self.means[:, :2]

    @property
    def velocities(self) -> np.ndarray:
        return self.means[:, 2:]

    def accelerations(self) -> np.ndarray:
        """Finite differences of smoothed velocity; zeros if timestamps are not increasing."""
        if self.time_outlier or len(self.t) < 2:
            return np.zeros_like(self.velocities)
        return np.gradient(self.velocities, self.t, axis=0)

    def longitudinal_acceleration(self, min_speed: float = Config.MIN_SPEED_ACCEL) -> np.ndarray:
        """a_lon = (a . v) / |v|, zero where the speed is below min_speed."""
        v = self.velocities
        speed = np.linalg.norm(v, axis=1)
        dot = np.einsum('ma,ma->m', self.accelerations(), v)
        out = np.zeros(len(speed))
        moving = speed > min_speed
        out[moving] = dot[moving] / speed[moving]
        return out

    def position_residuals(self, xy: np.ndarray) -> np.ndarray:
        """|smoothed - measured| at measured samples, NaN elsewhere."""
        out = np.full(len(self.t), np.nan)
        out[self.measured] = np.linalg.norm(self.positions[self.measured] - xy[self.measured], axis=1)
        return out


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def process_covariance(dt: float, q: float) -> np.ndarray:
    """Discretized white-acceleration noise with spectral density q."""
    block = q * np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]])
    return np.kron(block, np.eye(2))


def _initial_state(t: np.ndarray, xy: np.ndarray, measured: np.ndarray, cfg: SmootherConfig):
    idx = np.flatnonzero(measured)
    first = idx[0]
    velocity = np.zeros(2)
    speed_var = INITIAL_SPEED_STD ** 2
    if len(idx) > 1 and t[idx[1]] > t[first]:
        dt = t[idx[1]] - t[first]
        velocity = (xy[idx[1]] - xy[first]) / dt
        speed_var = 2.0 * cfg.measurement_noise ** 2 / dt ** 2
    # Extrapolate back to the first timestamp
    position = xy[first] - velocity * (t[first] - t[0])
    x0 = np.concatenate([position, velocity])
    P0 = np.diag([cfg.measurement_noise ** 2] * 2 + [speed_var] * 2)
    return x0, P0


def rts_smooth(traj: TrackedTrajectory, cfg: SmootherConfig = SmootherConfig()) -> SmoothedStates:
    """
    Forward Kalman pass and backward RTS pass over one trajectory.

    Args:
        traj: Trajectory with at least 2 samples
        cfg: Smoother configuration

    Returns:
        SmoothedStates; `time_outlier` is set if any consecutive dt <= 0
    """
    m = traj.m
    if m < 2:
        raise ArgumentError("Smoothing needs at least 2 samples")

    t, xy = traj.t, traj.xy
    measured = traj.valid_mask()
    if not measured.any():
        return SmoothedStates(t=t, means=np.full((m, 4), np.nan), covs=np.full((m, 4, 4), np.nan),
                              measured=measured, time_outlier=bool(np.any(np.diff(t) <= 0)))

    q = cfg.process_noise ** 2
    R = cfg.measurement_noise ** 2 * np.eye(2)
    H = np.hstack([np.eye(2), np.zeros((2, 2))])

    dts = np.diff(t)
    time_outlier = bool(np.any(dts <= 0))
    dts = np.maximum(dts, 0.0)

    x_prior = np.empty((m, 4))
    P_prior = np.empty((m, 4, 4))
    x_post = np.empty((m, 4))
    P_post = np.empty((m, 4, 4))

    x, P = _initial_state(t, xy, measured, cfg)
    for k in range(m):
        if k > 0:
            F = transition(dts[k - 1])
            x = F @ x
            P = F @ P @ F.T + process_covariance(dts[k - 1], q)
        x_prior[k], P_prior[k] = x, P

        if measured[k]:
            S = H @ P @ H.T + R
            K = cho_solve(cho_factor(S), H @ P).T
            x = x + K @ (xy[k] - H @ x)
            # Joseph form keeps P symmetric positive definite
            I_KH = np.eye(4) - K @ H
            P = I_KH @ P @ I_KH.T + K @ R @ K.T
        x_post[k], P_post[k] = x, P

    x_s = x_post.copy()
    P_s = P_post.copy()
    for k in range(m - 2, -1, -1):
        F = transition(dts[k])
        factor = cho_factor(P_prior[k + 1])
        C = cho_solve(factor, F @ P_post[k]).T
        x_s[k] = x_post[k] + C @ (x_s[k + 1] - x_prior[k + 1])
        P_s[k] = P_post[k] + C @ (P_s[k + 1] - P_prior[k + 1]) @ C.T

    return SmoothedStates(t=t, means=x_s, covs=P_s, measured=measured, time_outlier=time_outlier)
