"""Type-II (marginal) likelihood of trajectory observations and its exact gradient.

For one trajectory with stacked observations c, the coefficients integrate out to

    c ~ N(0, K),  K = Sigma_o(theta) + Phi^T Sigma_w Phi

Two evaluation routes are provided: a dense Cholesky of the md x md matrix K
and the low-rank route through B = I + L^T S L with Sigma_w = L L^T and
S = Phi Sigma_o^-1 Phi^T, which only factorizes (n+1)d x (n+1)d matrices.

The corpus objective groups trajectories by sample count and evaluates them
in fixed-size chunks; chunk results are reduced in a fixed order so values do
not depend on the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from config import Config
from src.basis.polynomial import BasisSpec, basis_values
from src.noisemodel.covariance import (AgentNoiseParams, EgoNoiseParams, NoiseParams, assemble_block_cov,
                                       noise_design_terms, noise_from_json, noise_to_json)
from src.regress.posterior import PriorParams, stacked_cho_solve
from src.trajdata.frames import TrajectoryObservations, observations
from src.trajdata.trajectory import TrackedTrajectory
from src.utils.errors import ArgumentError, HyperparameterError, ParameterError

LOG_2PI = float(np.log(2.0 * np.pi))

# Floor for log-parameterized variances that are exactly zero
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class HyperParams:
    """Noise parameters and coefficient prior of one (class, horizon, degree) fit."""

    noise: NoiseParams
    prior: PriorParams
    spec: BasisSpec
    log_type2: Optional[float] = None
    n_trajectories: int = 0
    diagnostics: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prior.dim != self.spec.n_coefficients:
            raise ParameterError(f"Prior dimension {self.prior.dim} does not match degree {self.spec.degree}")

    @property
    def object_class(self) -> str:
        return "ego" if isinstance(self.noise, EgoNoiseParams) else "agent"

    @property
    def degree(self) -> int:
        return self.spec.degree

    def to_json(self) -> Dict:
        return {
            "class": self.object_class,
            "basis": self.spec.family.value,
            "degree": self.spec.degree,
            "horizon": self.spec.horizon,
            "spatial_dim": self.spec.spatial_dim,
            "noise": noise_to_json(self.noise),
            "sigma_omega": self.prior.to_json(),
            "log_type2": self.log_type2,
            "n_trajectories": self.n_trajectories,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, data: Dict) -> "HyperParams":
        try:
            spec = BasisSpec(data["basis"], int(data["degree"]), int(data.get("spatial_dim", 2)),
                             float(data["horizon"]))
            return cls(noise=noise_from_json(data["noise"]), prior=PriorParams.from_json(data["sigma_omega"]),
                       spec=spec, log_type2=data.get("log_type2"), n_trajectories=int(data.get("n_trajectories", 0)),
                       diagnostics=data.get("diagnostics", {}))
        except (KeyError, TypeError, ValueError) as e:
            raise ParameterError(f"Malformed hyperparameter record: {e}")


def as_observations(corpus: Sequence[Union[TrackedTrajectory, TrajectoryObservations]],
                    spec: BasisSpec) -> List[TrajectoryObservations]:
    """Accept trajectories or prepared observation bundles."""
    out = []
    for item in corpus:
        if isinstance(item, TrackedTrajectory):
            if not np.isclose(item.horizon, spec.horizon):
                raise ArgumentError(f"Trajectory {item.key} has horizon {item.horizon}, expected {spec.horizon}")
            item = observations(item)
        out.append(item)
    return out


@dataclass(frozen=True)
class _Chunk:
    """Trajectories with a common sample count, stacked along axis 0."""

    keys: Tuple[str, ...]
    F: np.ndarray   # (b, m, n+1) basis values
    y: np.ndarray   # (b, m, d) observations
    E: np.ndarray   # (K, b, m, d, d) noise design terms


def _trajectory_arrays(obs: TrajectoryObservations, spec: BasisSpec, object_class: str):
    F = basis_values(spec, obs.tau)
    E = noise_design_terms(object_class, obs.positions, obs.ego_positions, obs.frame_angle)
    return F, obs.positions, E


def _chunk_evaluate(chunk: _Chunk, natural: np.ndarray, L: np.ndarray, with_grad: bool):
    """
    Log marginal likelihood of every trajectory in a chunk.

    Returns:
        (values (b,), gradient w.r.t. natural noise parameters (K,),
         gradient w.r.t. Sigma_w summed over the chunk (P, P)); gradients are None without with_grad
    """
    F, y, E = chunk.F, chunk.y, chunk.E
    b, m, n1 = F.shape
    d = y.shape[-1]
    P = L.shape[0]

    cov = np.einsum('k,kbjxy->bjxy', natural, E)
    try:
        chol_o = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise HyperparameterError("Observation covariance is not positive definite")
    W = stacked_cho_solve(chol_o, np.broadcast_to(np.eye(d), cov.shape))
    logdet_o = 2.0 * np.log(np.diagonal(chol_o, axis1=-2, axis2=-1)).sum(axis=(1, 2))

    Wy = np.einsum('bjxy,bjy->bjx', W, y)
    S = np.einsum('bjk,bjl,bjxy->bkxly', F, F, W).reshape(b, P, P)
    rhs = np.einsum('bjk,bjx->bkx', F, Wy).reshape(b, P)

    B = np.eye(P) + L.T @ S @ L
    try:
        chol_B = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        raise HyperparameterError("Marginal covariance could not be factorized")
    logdet_B = 2.0 * np.log(np.diagonal(chol_B, axis1=-2, axis2=-1)).sum(axis=1)

    z = rhs @ L
    u = stacked_cho_solve(chol_B, z[..., None])[..., 0]
    quad = np.einsum('bjx,bjx->b', y, Wy) - np.einsum('bp,bp->b', z, u)
    values = -0.5 * (quad + logdet_o + logdet_B + m * d * LOG_2PI)
    if not with_grad:
        return values, None, None

    post = u @ L.T
    residual = y - np.einsum('bjk,bkx->bjx', F, post.reshape(b, n1, d))
    alpha = np.einsum('bjxy,bjy->bjx', W, residual)

    # Posterior covariance L B^-1 L^T and the per-sample predictive blocks
    M = L @ stacked_cho_solve(chol_B, np.broadcast_to(L.T, (b, P, P)))
    V = np.einsum('bjk,bkxly,bjl->bjxy', F, M.reshape(b, n1, d, n1, d), F)
    G = 0.5 * (np.einsum('bjx,bjy->bjxy', alpha, alpha) - W + W @ V @ W)
    grad_natural = np.einsum('bjxy,kbjxy->k', G, E)

    g = np.einsum('bjk,bjx->bkx', F, alpha).reshape(b, P)
    H = 0.5 * (g.T @ g - S.sum(axis=0) + (S @ M @ S).sum(axis=0))
    return values, grad_natural, H


class CorpusObjective:
    """Summed log type-II likelihood of a corpus and its gradient in natural coordinates."""

    def __init__(self, corpus: Sequence, spec: BasisSpec, object_class: str,
                 chunk_size: int = Config.CHUNK_SIZE, threads: int = 1):
        """
        Args:
            corpus: Trajectories or observation bundles of one class and horizon
            spec: Basis specification
            object_class: "ego" or "agent"
            chunk_size: Trajectories per evaluation chunk
            threads: Worker threads (results do not depend on it)
        """
        obs = as_observations(corpus, spec)
        if not obs:
            raise ArgumentError("Corpus is empty")
        for item in obs:
            if item.object_class != object_class:
                raise ArgumentError(f"Trajectory {item.key} is {item.object_class}, expected {object_class}")
        if chunk_size < 1:
            raise ArgumentError(f"Chunk size must be positive, got {chunk_size}")

        self.spec = spec
        self.object_class = str(getattr(object_class, "value", object_class))
        self.threads = max(1, int(threads))
        self.observations = sorted(obs, key=lambda o: (o.m, o.key))
        self.chunks: List[_Chunk] = []
        for _, group in groupby(self.observations, key=lambda o: o.m):
            group = list(group)
            for start in range(0, len(group), chunk_size):
                self.chunks.append(self._stack(group[start:start + chunk_size]))

    def _stack(self, items: Sequence[TrajectoryObservations]) -> _Chunk:
        arrays = [_trajectory_arrays(o, self.spec, self.object_class) for o in items]
        return _Chunk(keys=tuple(o.key for o in items),
                      F=np.stack([a[0] for a in arrays]),
                      y=np.stack([a[1] for a in arrays]),
                      E=np.stack([a[2] for a in arrays], axis=1))

    @property
    def n_trajectories(self) -> int:
        return len(self.observations)

    @property
    def sample_counts(self) -> np.ndarray:
        return np.array([o.m for o in self.observations])

    def evaluate(self, natural: np.ndarray, L: np.ndarray, with_grad: bool = True,
                 chunk_indices: Optional[Sequence[int]] = None):
        """
        Sum the log type-II likelihood over (a subset of) the chunks.

        Args:
            natural: Natural noise parameters
            L: Lower Cholesky factor of Sigma_w
            with_grad: Also return gradients
            chunk_indices: Chunks to evaluate (all if None)

        Returns:
            (total, grad_natural, grad_sigma_w, n_trajectories evaluated)
        """
        chunks = self.chunks if chunk_indices is None else [self.chunks[i] for i in chunk_indices]
        natural = np.asarray(natural, dtype=float)

        def run(chunk):
            return _chunk_evaluate(chunk, natural, L, with_grad)

        if self.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(run, chunks))
        else:
            results = [run(chunk) for chunk in chunks]

        total = 0.0
        grad_natural = np.zeros(len(natural)) if with_grad else None
        grad_cov = np.zeros_like(L) if with_grad else None
        count = 0
        for values, g_nat, H in results:
            total += float(values.sum())
            count += len(values)
            if with_grad:
                grad_natural += g_nat
                grad_cov += H
        return total, grad_natural, grad_cov, count


class HyperParameterization:
    """
    Smooth bijection between hyperparameters and an unconstrained vector.

    Layout: noise coordinates (omitted when the noise is held fixed), then the
    lower triangle of the prior Cholesky factor with its diagonal in log form.
    Ego noise uses log sigma_diag and atanh(sigma_cov / sigma_diag^2), so every
    point is a valid covariance; agent noise uses the logs of
    (beta0, beta1, beta2, sigma_alpha, sigma_c).
    """

    def __init__(self, spec: BasisSpec, object_class: str, fixed_noise: Optional[NoiseParams] = None):
        self.spec = spec
        self.object_class = str(getattr(object_class, "value", object_class))
        self.fixed_noise = fixed_noise
        self.P = spec.n_coefficients
        self.tril = np.tril_indices(self.P)
        self.diag_mask = self.tril[0] == self.tril[1]
        noise_cls = EgoNoiseParams if self.object_class == "ego" else AgentNoiseParams
        self.n_noise = 0 if fixed_noise is not None else noise_cls.n_params

    @property
    def size(self) -> int:
        return self.n_noise + len(self.tril[0])

    def pack(self, noise: NoiseParams, prior: PriorParams) -> np.ndarray:
        entries = prior.chol[self.tril].copy()
        entries[self.diag_mask] = np.log(entries[self.diag_mask])
        if self.n_noise == 0:
            return entries
        if isinstance(noise, EgoNoiseParams):
            head = np.array([np.log(noise.sigma_diag), np.arctanh(noise.sigma_cov / noise.sigma_diag ** 2)])
        else:
            head = np.log(np.maximum([noise.beta0, noise.beta1, noise.beta2, noise.sigma_alpha, noise.sigma_c],
                                     LOG_FLOOR))
        return np.concatenate([head, entries])

    def unpack(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Natural noise parameters and the prior Cholesky factor."""
        u = np.asarray(u, dtype=float)
        if self.n_noise == 0:
            natural = self.fixed_noise.natural()
        elif self.object_class == "ego":
            s = np.exp(2.0 * u[0])
            natural = np.array([s, s * np.tanh(u[1])])
        else:
            e = np.exp(u[:5])
            natural = np.array([e[0], e[1], e[2], e[3] ** 2, e[4] ** 2])
        entries = u[self.n_noise:].copy()
        entries[self.diag_mask] = np.exp(entries[self.diag_mask])
        L = np.zeros((self.P, self.P))
        L[self.tril] = entries
        return natural, L

    def natural_jacobian(self, u: np.ndarray) -> np.ndarray:
        """J[i, j] = d natural_i / d u_j for the noise coordinates."""
        natural, _ = self.unpack(u)
        if self.object_class == "ego":
            s, t = natural[0], np.tanh(u[1])
            return np.array([[2.0 * s, 0.0], [2.0 * s * t, s * (1.0 - t ** 2)]])
        return np.diag(natural * np.array([1.0, 1.0, 1.0, 2.0, 2.0]))

    def chain(self, u: np.ndarray, grad_natural: np.ndarray, grad_cov: np.ndarray) -> np.ndarray:
        """Gradient in unconstrained coordinates from natural / Sigma_w gradients."""
        _, L = self.unpack(u)
        grad_L = np.tril(2.0 * grad_cov @ L)[self.tril]
        grad_L[self.diag_mask] *= np.diag(L)
        if self.n_noise == 0:
            return grad_L
        return np.concatenate([grad_natural @ self.natural_jacobian(u), grad_L])

    def to_noise(self, natural: np.ndarray) -> NoiseParams:
        if self.n_noise == 0:
            return self.fixed_noise
        if self.object_class == "ego":
            return EgoNoiseParams(sigma_diag=float(np.sqrt(natural[0])), sigma_cov=float(natural[1]))
        return AgentNoiseParams(sigma_alpha=float(np.sqrt(natural[3])), beta0=float(natural[0]),
                                beta1=float(natural[1]), beta2=float(natural[2]),
                                sigma_c=float(np.sqrt(natural[4])))

    def to_hyper(self, u: np.ndarray, **kwargs) -> HyperParams:
        natural, L = self.unpack(u)
        return HyperParams(noise=self.to_noise(natural), prior=PriorParams(L @ L.T), spec=self.spec, **kwargs)


def _dense_log_marginal(obs: TrajectoryObservations, hyper: HyperParams) -> float:
    F, y, E = _trajectory_arrays(obs, hyper.spec, hyper.object_class)
    blocks = np.einsum('k,kjxy->jxy', hyper.noise.natural(), E)
    Phi = np.kron(F.T, np.eye(hyper.spec.spatial_dim))
    K = assemble_block_cov(blocks) + Phi.T @ hyper.prior.cov @ Phi
    try:
        factor = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        raise HyperparameterError(f"Marginal covariance of {obs.key} could not be factorized")
    c = y.reshape(-1)
    logdet = 2.0 * np.log(np.diag(factor[0])).sum()
    return float(-0.5 * (c @ cho_solve(factor, c) + logdet + len(c) * LOG_2PI))


def log_marginal(obs: Union[TrajectoryObservations, TrackedTrajectory], hyper: HyperParams,
                 route: str = "lowrank") -> float:
    """
    Log type-II likelihood of one trajectory.

    Args:
        obs: Trajectory or its observation bundle
        hyper: Noise parameters and prior
        route: "lowrank" (factorizes (n+1)d x (n+1)d matrices) or "dense" (md x md)

    Returns:
        Log density in nats
    """
    obs = as_observations([obs], hyper.spec)[0]
    if route == "dense":
        return _dense_log_marginal(obs, hyper)
    if route != "lowrank":
        raise ArgumentError(f"Unknown route '{route}'")
    F, y, E = _trajectory_arrays(obs, hyper.spec, hyper.object_class)
    chunk = _Chunk((obs.key,), F[None], y[None], E[:, None])
    values, _, _ = _chunk_evaluate(chunk, hyper.noise.natural(), hyper.prior.chol, with_grad=False)
    return float(values[0])


def corpus_log_marginal(corpus: Sequence, hyper: HyperParams, threads: int = 1,
                        chunk_size: int = Config.CHUNK_SIZE) -> float:
    """Summed log type-II likelihood of a corpus."""
    objective = CorpusObjective(corpus, hyper.spec, hyper.object_class, chunk_size=chunk_size, threads=threads)
    total, _, _, _ = objective.evaluate(hyper.noise.natural(), hyper.prior.chol, with_grad=False)
    return total
