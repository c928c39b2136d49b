"""Synthetic trajectory corpora with known coefficients, noise and outliers.

Each trajectory draws its coefficients from a Gaussian prior, is evaluated on
an evenly spaced time grid over the horizon and receives observation noise
drawn from the exact per-sample noise-model covariance. Agent trajectories are
observed from a scripted ego path that passes close to the agent.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config, load_json_config
from src.basis.polynomial import BasisFamily, BasisSpec, evaluate_curve, transform_prior
from src.noisemodel.covariance import (AgentNoiseParams, EgoNoiseParams, NoiseParams, noise_from_json,
                                       noise_to_json, sample_covariances)
from src.trajdata import csv_io
from src.trajdata.trajectory import ObjectClass, TrackedTrajectory
from src.utils.errors import ArgumentError, SchemaError
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)

EGO_SCRIPTS = ("straight", "turn", "stop_and_go")
OUTLIER_KINDS = ("time", "reset", "jump", "frozen")
JUMP_M = 5.0

# Noise presets after typical values of three recording setups; "zero" adds no noise
EGO_NOISE_PRESETS = {
    "a1": EgoNoiseParams(sigma_diag=0.024, sigma_cov=2e-4),
    "a2": EgoNoiseParams(sigma_diag=0.012, sigma_cov=3e-6),
    "wo": EgoNoiseParams(sigma_diag=0.008, sigma_cov=-1e-7),
}
AGENT_NOISE_PRESETS = {
    "a1": AgentNoiseParams(sigma_alpha=1e-3, beta0=1.915e-3, beta1=1.441e-3, beta2=5.93e-7, sigma_c=0.161),
    "a2": AgentNoiseParams(sigma_alpha=6e-4, beta0=2.6e-3, beta1=1e-5, beta2=2.7e-6, sigma_c=0.044),
    "wo": AgentNoiseParams(sigma_alpha=3e-4, beta0=9.27e-5, beta1=2.185e-5, beta2=4.98e-7, sigma_c=0.017),
}
PRIOR_PRESETS = ("vehicle", "wiggly")


def prior_preset(name: str, spec: BasisSpec) -> np.ndarray:
    """
    Coefficient prior covariance of a named preset, in the basis of `spec`.

    vehicle: position std 20 m, velocity std 8 m/s, higher orders halving from 5 m.
    wiggly: std 20 for every monomial coefficient.
    """
    n = spec.degree
    if name == "vehicle":
        std = [20.0, 8.0 * spec.horizon] + [5.0 * 0.5 ** (k - 2) for k in range(2, n + 1)]
        std = np.array(std[:n + 1])
    elif name == "wiggly":
        std = np.full(n + 1, 20.0)
    else:
        raise ArgumentError(f"Unknown prior preset '{name}', expected one of {PRIOR_PRESETS}")
    cov = np.kron(np.diag(std ** 2), np.eye(spec.spatial_dim))
    if spec.family != BasisFamily.MONOMIAL:
        cov = transform_prior(cov, spec.with_family(BasisFamily.MONOMIAL), spec)
    return cov


def noise_preset(name: str, object_class: str) -> Optional[NoiseParams]:
    if name == "zero":
        return None
    presets = EGO_NOISE_PRESETS if object_class == "ego" else AGENT_NOISE_PRESETS
    if name not in presets:
        raise ArgumentError(f"Unknown noise preset '{name}'")
    return presets[name]


@dataclass
class SynthConfig:
    """
    Generator settings.

    `prior` is a preset name or a row-major covariance list; `noise` is a preset
    name or a noise parameter dictionary; `ego_script` is one of EGO_SCRIPTS or
    "mixed" (cycled by index); `outlier_rates` maps OUTLIER_KINDS to probabilities.
    """

    n_trajectories: int = 100
    samples: int = 50
    horizon: float = Config.HORIZON_S
    degree: int = 3
    object_class: str = "agent"
    basis: str = Config.BASIS_FAMILY
    prior: Union[str, List[float]] = "vehicle"
    noise: Union[str, Dict] = "a2"
    ego_script: str = "mixed"
    seed: int = 0
    outlier_rates: Dict[str, float] = field(default_factory=dict)
    scenario_prefix: str = "syn"

    def __post_init__(self):
        if self.n_trajectories < 1 or self.samples < 2:
            raise ArgumentError("Need at least one trajectory with at least 2 samples")
        if not self.horizon > 0:
            raise ArgumentError(f"Horizon must be positive, got {self.horizon}")
        ObjectClass(self.object_class)
        if self.ego_script not in EGO_SCRIPTS + ("mixed",):
            raise ArgumentError(f"Unknown ego script '{self.ego_script}'")
        for kind, rate in self.outlier_rates.items():
            if kind not in OUTLIER_KINDS:
                raise ArgumentError(f"Unknown outlier kind '{kind}', expected one of {OUTLIER_KINDS}")
            if not 0.0 <= rate <= 1.0:
                raise ArgumentError(f"Outlier rate for '{kind}' must be in [0, 1], got {rate}")

    @property
    def spec(self) -> BasisSpec:
        return BasisSpec(self.basis, self.degree, 2, self.horizon)

    def prior_cov(self) -> np.ndarray:
        if isinstance(self.prior, str):
            return prior_preset(self.prior, self.spec)
        P = self.spec.n_coefficients
        return np.asarray(self.prior, dtype=float).reshape(P, P)

    def noise_params(self) -> Optional[NoiseParams]:
        if isinstance(self.noise, str):
            return noise_preset(self.noise, self.object_class)
        return noise_from_json(self.noise)

    def script_for(self, index: int) -> str:
        if self.ego_script == "mixed":
            return EGO_SCRIPTS[index % len(EGO_SCRIPTS)]
        return self.ego_script

    @classmethod
    def from_json(cls, path: str) -> "SynthConfig":
        data = load_json_config(path)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise SchemaError(f"Unknown synth config keys: {sorted(unknown)}", path=str(path))
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            raise SchemaError(str(e), path=str(path))

    def to_json(self) -> Dict:
        return asdict(self)


@dataclass
class GroundTruth:
    """Latent coefficients and generating parameters of a synthetic corpus."""

    config: SynthConfig
    prior_cov: np.ndarray
    noise: Optional[NoiseParams]
    keys: List[str] = field(default_factory=list)
    coefficients: List[np.ndarray] = field(default_factory=list)
    scripts: List[str] = field(default_factory=list)
    outliers: Dict[str, List[str]] = field(default_factory=dict)

    def injected(self, kind: str) -> List[str]:
        return [key for key, kinds in self.outliers.items() if kind in kinds]

    def to_json(self) -> Dict:
        return {
            "config": self.config.to_json(),
            "spec": {"basis": self.config.spec.family.value, "degree": self.config.degree,
                     "horizon": self.config.horizon, "spatial_dim": 2},
            "sigma_omega": {"dim": len(self.prior_cov), "cov_row_major": self.prior_cov.reshape(-1).tolist()},
            "noise": None if self.noise is None else noise_to_json(self.noise),
            "trajectories": [{"key": k, "omega": w.tolist(), "ego_script": s, "outliers": self.outliers.get(k, [])}
                             for k, w, s in zip(self.keys, self.coefficients, self.scripts)],
        }

    def write(self, path: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2)
        return path


def ego_path(script: str, t: np.ndarray, horizon: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ego positions and headings along a scripted path passing near the origin.

    Returns:
        ((m, 2) positions, (m,) headings)
    """
    psi0 = rng.uniform(-np.pi, np.pi)
    speed = rng.uniform(5.0, 15.0)
    s = t - t[0]
    if script == "straight":
        heading = np.full(len(t), psi0)
        xy = np.outer(speed * s, [np.cos(psi0), np.sin(psi0)])
    elif script == "turn":
        yaw_rate = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.3)
        heading = psi0 + yaw_rate * s
        xy = (speed / yaw_rate) * np.column_stack([np.sin(heading) - np.sin(psi0),
                                                   np.cos(psi0) - np.cos(heading)])
    elif script == "stop_and_go":
        heading = np.full(len(t), psi0)
        distance = speed * (0.5 * s + 0.5 * horizon / (2 * np.pi) * np.sin(2 * np.pi * s / horizon))
        xy = np.outer(distance, [np.cos(psi0), np.sin(psi0)])
    else:
        raise ArgumentError(f"Unknown ego script '{script}'")

    # Put the path midpoint at a lateral offset of up to 15 m from the origin
    middle = xy[np.argmin(np.abs(s - 0.5 * horizon))]
    normal = np.array([-np.sin(psi0), np.cos(psi0)])
    return xy - middle + rng.uniform(-15.0, 15.0) * normal, heading


def _inject(kind: str, t: np.ndarray, xy: np.ndarray, rng: np.random.Generator):
    m = len(t)
    if kind == "time":
        k = int(rng.integers(1, m))
        t[k] = t[k - 1]
    elif kind == "reset":
        xy[int(rng.integers(1, m))] = 0.0
    elif kind == "jump":
        k = int(rng.integers(1, m - 1)) if m > 2 else 1
        angle = rng.uniform(-np.pi, np.pi)
        xy[k] += JUMP_M * np.array([np.cos(angle), np.sin(angle)])
    elif kind == "frozen":
        xy[:] = xy[0]


def _generate_one(cfg: SynthConfig, index: int, L: np.ndarray, noise: Optional[NoiseParams]):
    rng = np.random.default_rng([cfg.seed, index])
    spec = cfg.spec
    omega = L @ rng.standard_normal(spec.n_coefficients)

    t = np.linspace(0.0, cfg.horizon, cfg.samples)
    taus = t / cfg.horizon
    truth = evaluate_curve(spec, omega, taus)
    velocity = evaluate_curve(spec, omega, taus, order=1)
    heading = np.arctan2(velocity[:, 1], velocity[:, 0])

    if cfg.object_class == "ego":
        script = "own"
        ego_xy, ego_heading = truth, heading
    else:
        script = cfg.script_for(index)
        ego_xy, ego_heading = ego_path(script, t, cfg.horizon, rng)

    xy = truth.copy()
    if noise is not None:
        covs = sample_covariances(noise, truth, ego_xy)
        xy = xy + np.einsum('mab,mb->ma', np.linalg.cholesky(covs), rng.standard_normal((cfg.samples, 2)))
    if cfg.object_class == "ego":
        ego_xy = xy

    injected = []
    for kind in OUTLIER_KINDS:
        rate = cfg.outlier_rates.get(kind, 0.0)
        if rate > 0 and rng.random() < rate:
            _inject(kind, t, xy, rng)
            injected.append(kind)

    object_id = "ego" if cfg.object_class == "ego" else "agent"
    traj = TrackedTrajectory(
        scenario_id=f"{cfg.scenario_prefix}{index:06d}",
        object_id=object_id,
        object_class=cfg.object_class,
        t=t,
        xy=xy,
        ego_xy=np.array(ego_xy, dtype=float),
        ego_heading=np.asarray(ego_heading, dtype=float),
        heading=heading,
        horizon=cfg.horizon,
    )
    return traj, omega, script, injected


def generate(cfg: SynthConfig) -> Tuple[List[TrackedTrajectory], GroundTruth]:
    """
    Generate a corpus and its ground truth.

    Trajectory i uses its own random stream seeded by (seed, i), so the output
    does not depend on generation order.

    Args:
        cfg: Generator settings

    Returns:
        (trajectories, GroundTruth)
    """
    prior_cov = cfg.prior_cov()
    try:
        L = np.linalg.cholesky(prior_cov)
    except np.linalg.LinAlgError:
        raise ArgumentError("Generating prior covariance must be positive definite")
    noise = cfg.noise_params()

    truth = GroundTruth(config=cfg, prior_cov=prior_cov, noise=noise)
    corpus = []
    for index in range(cfg.n_trajectories):
        traj, omega, script, injected = _generate_one(cfg, index, L, noise)
        corpus.append(traj)
        truth.keys.append(traj.key)
        truth.coefficients.append(omega)
        truth.scripts.append(script)
        if injected:
            truth.outliers[traj.key] = injected

    logger.info(f"Generated {len(corpus)} {cfg.object_class} trajectories "
                f"({len(truth.outliers)} with injected outliers)")
    return corpus, truth


def export(corpus: Sequence[TrackedTrajectory], path: str, truth: Optional[GroundTruth] = None) -> Path:
    """
    Write a corpus as canonical CSV and, if given, its ground truth as JSON next to it.

    Args:
        corpus: Trajectories
        path: CSV path
        truth: Ground truth to write as <stem>_truth.json

    Returns:
        Path of the CSV file
    """
    path = csv_io.export(corpus, path)
    if truth is not None:
        truth.write(str(path.with_name(f"{path.stem}_truth.json")))
    return path
