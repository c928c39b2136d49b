"""Structured observation-noise covariances for ego and agent trajectories.

Ego noise is constant in world coordinates. Agent noise is modelled in polar
coordinates around the ego sensor (range variance growing with distance,
constant angular resolution), linearized into the Cartesian frame, widened by
an isotropic term and rotated into the world frame.

Both models are linear in their variance parameters, so each exposes per-sample
derivative matrices (`design_terms`) from which covariances and exact
likelihood gradients are assembled.
"""

from dataclasses import dataclass, asdict
from typing import Dict, Sequence, Union

import numpy as np
from scipy.linalg import block_diag

from config import Config
from src.utils.errors import DomainError, ParameterError


def rotation(angle: float) -> np.ndarray:
    """2x2 rotation matrix."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class EgoNoiseParams:
    """Constant world-frame noise: sigma_diag [m] and sigma_cov [m^2]."""

    sigma_diag: float
    sigma_cov: float = 0.0

    n_params = 2
    names = ("sigma_diag", "sigma_cov")

    def __post_init__(self):
        if not self.sigma_diag > 0:
            raise ParameterError(f"sigma_diag must be positive, got {self.sigma_diag}")
        if not abs(self.sigma_cov) < self.sigma_diag ** 2:
            raise ParameterError(
                f"|sigma_cov| must be below sigma_diag^2 = {self.sigma_diag ** 2:g}, got {self.sigma_cov}")

    def natural(self) -> np.ndarray:
        """Variance parameters the covariance is linear in: (sigma_diag^2, sigma_cov)."""
        return np.array([self.sigma_diag ** 2, self.sigma_cov])

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class AgentNoiseParams:
    """Polar sensor noise: sigma_alpha [rad], beta0 [m^2], beta1 [m], beta2 [-], sigma_c [m]."""

    sigma_alpha: float
    beta0: float
    beta1: float
    beta2: float
    sigma_c: float

    n_params = 5
    names = ("sigma_alpha", "beta0", "beta1", "beta2", "sigma_c")

    def __post_init__(self):
        values = np.array([self.sigma_alpha, self.beta0, self.beta1, self.beta2, self.sigma_c])
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ParameterError(f"Agent noise parameters must be non-negative, got {values.tolist()}")
        if not self.beta0 > 0:
            raise ParameterError(f"beta0 must be positive, got {self.beta0}")

    def natural(self) -> np.ndarray:
        """Variance parameters: (beta0, beta1, beta2, sigma_alpha^2, sigma_c^2)."""
        return np.array([self.beta0, self.beta1, self.beta2, self.sigma_alpha ** 2, self.sigma_c ** 2])

    def to_dict(self) -> Dict:
        return asdict(self)


NoiseParams = Union[EgoNoiseParams, AgentNoiseParams]


@dataclass(frozen=True)
class SampleGeometry:
    """Range r [m] and world-frame bearing [rad] of an agent sample seen from the ego."""

    r: float
    bearing: float

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"Range must be non-negative, got {self.r}")

    @property
    def rotation(self) -> np.ndarray:
        return rotation(self.bearing)

    @classmethod
    def from_positions(cls, agent_xy: Sequence[float], ego_xy: Sequence[float]) -> "SampleGeometry":
        delta = np.asarray(agent_xy, dtype=float) - np.asarray(ego_xy, dtype=float)
        return cls(r=float(np.hypot(*delta)), bearing=float(np.arctan2(delta[1], delta[0])))

    @classmethod
    def from_polar(cls, r: float, bearing_in_ego: float, ego_heading: float) -> "SampleGeometry":
        # R = R(ego_heading) R(bearing_in_ego) = R(ego_heading + bearing_in_ego)
        return cls(r=float(r), bearing=float(ego_heading + bearing_in_ego))


def geometry_arrays(agent_xy: np.ndarray, ego_xy: np.ndarray):
    """Vectorized ranges and bearings for (m, 2) agent and ego positions."""
    delta = np.asarray(agent_xy, dtype=float) - np.asarray(ego_xy, dtype=float)
    return np.hypot(delta[:, 0], delta[:, 1]), np.arctan2(delta[:, 1], delta[:, 0])


def ego_cov(params: EgoNoiseParams) -> np.ndarray:
    """[[sigma_diag^2, sigma_cov], [sigma_cov, sigma_diag^2]]."""
    var = params.sigma_diag ** 2
    return np.array([[var, params.sigma_cov], [params.sigma_cov, var]])


def range_variance(params: AgentNoiseParams, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """beta0 + beta1 r + beta2 r^2."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError(f"Range must be non-negative, got {r}")
    out = params.beta0 + params.beta1 * r_arr + params.beta2 * r_arr ** 2
    return float(out) if np.ndim(out) == 0 else out


def agent_cov_world(params: AgentNoiseParams, geom: SampleGeometry) -> np.ndarray:
    """
    World-frame covariance of one agent sample.

    The polar covariance diag(sigma_r^2, sigma_alpha^2) is linearized to
    diag(sigma_r^2, r^2 sigma_alpha^2) along / across the line of sight, widened
    by sigma_c^2 I and rotated by the world bearing. At r = 0 the cross-range
    variance reduces to sigma_c^2.
    """
    local = np.diag([range_variance(params, geom.r), geom.r ** 2 * params.sigma_alpha ** 2])
    local = local + params.sigma_c ** 2 * np.eye(2)
    R = geom.rotation
    out = R @ local @ R.T
    return 0.5 * (out + out.T)


def ego_design_terms(m: int, frame_angle: float = 0.0) -> np.ndarray:
    """
    Per-sample derivative matrices of the ego covariance w.r.t. (sigma_diag^2, sigma_cov).

    Args:
        m: Number of samples
        frame_angle: Rotation of the trajectory's local frame relative to the world

    Returns:
        Array of shape (2, m, 2, 2)
    """
    R = rotation(-frame_angle)
    J = np.array([[0.0, 1.0], [1.0, 0.0]])
    terms = np.empty((2, m, 2, 2))
    terms[0] = np.eye(2)
    terms[1] = R @ J @ R.T
    return terms


def agent_design_terms(ranges: np.ndarray, bearings: np.ndarray) -> np.ndarray:
    """
    Per-sample derivative matrices of the agent covariance w.r.t.
    (beta0, beta1, beta2, sigma_alpha^2, sigma_c^2).

    Args:
        ranges: (m,) ego-agent distances
        bearings: (m,) bearings in the frame the covariance is expressed in

    Returns:
        Array of shape (5, m, 2, 2)
    """
    ranges = np.asarray(ranges, dtype=float)
    if np.any(ranges < 0):
        raise DomainError("Ranges must be non-negative")
    u = np.stack([np.cos(bearings), np.sin(bearings)], axis=-1)
    v = np.stack([-np.sin(bearings), np.cos(bearings)], axis=-1)
    uu = np.einsum('ma,mb->mab', u, u)
    vv = np.einsum('ma,mb->mab', v, v)

    m = len(ranges)
    terms = np.empty((5, m, 2, 2))
    terms[0] = uu
    terms[1] = ranges[:, None, None] * uu
    terms[2] = (ranges ** 2)[:, None, None] * uu
    terms[3] = (ranges ** 2)[:, None, None] * vv
    terms[4] = np.broadcast_to(np.eye(2), (m, 2, 2))
    return terms


def covariances_from_terms(natural: np.ndarray, terms: np.ndarray) -> np.ndarray:
    """Per-sample covariances sum_k natural_k * terms_k, shape (m, 2, 2)."""
    return np.einsum('k,kmab->mab', natural, terms)


def assemble_block_cov(per_sample: Sequence[np.ndarray]) -> np.ndarray:
    """
    Block-diagonal md x md covariance from per-sample 2x2 blocks.

    Raises ParameterError naming the first block that is not symmetric positive definite.
    """
    blocks = [np.asarray(b, dtype=float) for b in per_sample]
    if not blocks:
        raise ParameterError("Need at least one covariance block")
    for j, block in enumerate(blocks):
        if not np.allclose(block, block.T, rtol=0, atol=1e-12 * max(1.0, np.abs(block).max())):
            raise ParameterError("Covariance block is not symmetric", sample_index=j)
        try:
            np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise ParameterError("Covariance block is not positive definite", sample_index=j)
    return block_diag(*blocks)


def block_logdet(per_sample: np.ndarray) -> float:
    """Sum of log-determinants of (m, 2, 2) blocks."""
    sign, logdet = np.linalg.slogdet(per_sample)
    if np.any(sign <= 0):
        raise ParameterError("Covariance block is not positive definite",
                             sample_index=int(np.argmax(sign <= 0)))
    return float(np.sum(logdet))


def sigma_r_table(params: AgentNoiseParams, ranges: Sequence[float] = Config.SIGMA_R_RANGES) -> Dict[str, float]:
    """Range standard deviation sigma_r at the tabulated distances."""
    return {f"sigma_r@{r:g}m": float(np.sqrt(range_variance(params, r))) for r in ranges}


def noise_to_json(params: NoiseParams) -> Dict:
    """Serialize noise parameters with the fixed key names."""
    return params.to_dict()


def noise_from_json(data: Dict) -> NoiseParams:
    """Deserialize noise parameters; the key set decides the class."""
    if set(EgoNoiseParams.names) <= set(data):
        return EgoNoiseParams(**{k: float(data[k]) for k in EgoNoiseParams.names})
    if set(AgentNoiseParams.names) <= set(data):
        return AgentNoiseParams(**{k: float(data[k]) for k in AgentNoiseParams.names})
    raise ParameterError(f"Unrecognized noise parameter keys: {sorted(data)}")


def noise_design_terms(params_or_class: Union[NoiseParams, str], agent_xy: np.ndarray,
                       ego_xy: np.ndarray, frame_angle: float = 0.0) -> np.ndarray:
    """Design terms for one trajectory, picking the model from params or class name."""
    is_ego = (isinstance(params_or_class, EgoNoiseParams) or params_or_class == "ego")
    if is_ego:
        return ego_design_terms(len(agent_xy), frame_angle)
    ranges, bearings = geometry_arrays(agent_xy, ego_xy)
    return agent_design_terms(ranges, bearings)


def sample_covariances(params: NoiseParams, agent_xy: np.ndarray, ego_xy: np.ndarray,
                       frame_angle: float = 0.0) -> np.ndarray:
    """Per-sample observation covariances (m, 2, 2) of one trajectory."""
    terms = noise_design_terms(params, agent_xy, ego_xy, frame_angle)
    return covariances_from_terms(params.natural(), terms)
