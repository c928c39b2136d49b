"""Empirical Bayes estimation of noise parameters and coefficient prior."""

from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from config import Config
from src.basis.polynomial import BasisSpec, basis_values
from src.ebayes.marginal import CorpusObjective, HyperParameterization, HyperParams
from src.noisemodel.covariance import AgentNoiseParams, EgoNoiseParams, NoiseParams
from src.regress.posterior import PriorParams
from src.utils.errors import ArgumentError, HyperparameterError, OptimizerError, ParameterError
from src.utils.logging_utils import get_logger

logger = get_logger(__name__)

METHODS = ("lbfgs", "ascent")

# Objective returned to the line search when the likelihood cannot be evaluated
PENALTY = 1e10

# Iterates kept for the failure dump
DUMP_LENGTH = 50

# Agent noise start values, close to a mid-range lidar tracker
AGENT_NOISE_INIT = AgentNoiseParams(sigma_alpha=6e-4, beta0=2.5e-3, beta1=1e-4, beta2=3e-6, sigma_c=0.05)


@dataclass
class OptimizerConfig:
    """Settings for fit_hyperparams."""

    method: str = Config.OPTIMIZER_METHOD
    max_iterations: int = Config.MAX_ITERATIONS
    gradient_tolerance: float = Config.GRADIENT_TOLERANCE
    step_size: float = Config.STEP_SIZE
    batch_size: int = Config.BATCH_SIZE
    rng_seed: int = 0
    max_rejections: int = 30
    chunk_size: int = Config.CHUNK_SIZE
    threads: int = 1
    fixed_noise: Optional[NoiseParams] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ArgumentError(f"Unknown optimizer '{self.method}', expected one of {METHODS}")
        if not self.gradient_tolerance > 0 or not self.step_size > 0:
            raise ArgumentError("Optimizer tolerances and step size must be positive")
        if self.max_iterations < 1 or self.batch_size < 0 or self.chunk_size < 1:
            raise ArgumentError("Invalid optimizer iteration, batch or chunk settings")

    @classmethod
    def from_dict(cls, values: Dict, threads: int = 1, seed: int = 0) -> "OptimizerConfig":
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__ and k != "fixed_noise"}
        known.setdefault("threads", threads)
        known.setdefault("rng_seed", seed)
        return cls(**known)

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["fixed_noise"] = None if self.fixed_noise is None else self.fixed_noise.to_dict()
        return out


def _least_squares_coefficients(objective: CorpusObjective):
    """Per-trajectory least-squares coefficients and the pooled residual RMS."""
    spec = objective.spec
    coeffs, residuals = [], []
    for obs in objective.observations:
        if obs.m <= spec.n_basis:
            continue
        F = basis_values(spec, obs.tau)
        w, *_ = np.linalg.lstsq(F, obs.positions, rcond=None)
        coeffs.append(w.reshape(-1))
        residuals.append(obs.positions - F @ w)
    if not coeffs:
        return None, None
    residual = np.concatenate(residuals)
    dof = max(1, residual.size - len(coeffs) * spec.n_coefficients)
    return np.array(coeffs), float(np.sqrt(np.sum(residual ** 2) / dof))


def initial_hyperparams(objective: CorpusObjective, fixed_noise: Optional[NoiseParams] = None) -> HyperParams:
    """
    Starting point: Sigma_w from the second moment of least-squares coefficients,
    ego noise from the least-squares residual, agent noise at typical sensor values.
    """
    spec = objective.spec
    P = spec.n_coefficients
    coeffs, rms = _least_squares_coefficients(objective)

    positions = np.concatenate([o.positions for o in objective.observations])
    scale = max(float(np.sqrt(np.mean(positions ** 2))), 1.0)
    cov = scale ** 2 * np.eye(P)
    if coeffs is not None and len(coeffs) > P:
        moment = coeffs.T @ coeffs / len(coeffs)
        jitter = 1e-6 * max(np.trace(moment) / P, 1e-12)
        candidate = moment + jitter * np.eye(P)
        if np.linalg.eigvalsh(candidate)[0] > 0:
            cov = candidate

    if fixed_noise is not None:
        noise = fixed_noise
    elif objective.object_class == "ego":
        noise = EgoNoiseParams(sigma_diag=max(rms or 0.0, 1e-3), sigma_cov=0.0)
    else:
        noise = AGENT_NOISE_INIT
    return HyperParams(noise=noise, prior=PriorParams(cov), spec=spec)


class _Tracker:
    """Negative mean log-likelihood with iterate bookkeeping."""

    def __init__(self, objective: CorpusObjective, param: HyperParameterization):
        self.objective = objective
        self.param = param
        self.history: List[Dict] = []
        self.evaluations = 0

    def __call__(self, u: np.ndarray, chunk_indices=None):
        self.evaluations += 1
        try:
            natural, L = self.param.unpack(u)
            total, g_nat, g_cov, count = self.objective.evaluate(natural, L, chunk_indices=chunk_indices)
            grad = self.param.chain(u, g_nat, g_cov)
        except (HyperparameterError, ParameterError, np.linalg.LinAlgError) as e:
            logger.debug(f"Evaluation {self.evaluations} rejected: {e}")
            return None, None
        if not np.isfinite(total) or not np.all(np.isfinite(grad)):
            return None, None
        value, grad = -total / count, -grad / count
        self.history.append({"evaluation": self.evaluations, "neg_mean_log_type2": value,
                             "grad_inf_norm": float(np.max(np.abs(grad))), "u": u.tolist()})
        del self.history[:-DUMP_LENGTH]
        return value, grad

    def dump(self, reason: str) -> Dict:
        return {"reason": reason, "evaluations": self.evaluations, "iterates": list(self.history)}


def _run_lbfgs(tracker: _Tracker, u0: np.ndarray, cfg: OptimizerConfig):
    def fun(u):
        value, grad = tracker(u)
        if value is None:
            return PENALTY, np.zeros_like(u)
        return value, grad

    result = minimize(fun, u0, jac=True, method="L-BFGS-B",
                      options={"maxiter": cfg.max_iterations, "gtol": cfg.gradient_tolerance,
                               "ftol": 1e-15, "maxcor": 20})
    if not tracker.history:
        raise OptimizerError("Likelihood could not be evaluated at any iterate", dump=tracker.dump("no valid iterate"))
    converged = bool(result.success)
    if not converged:
        logger.warning(f"L-BFGS stopped without convergence: {result.message}")
    return result.x, int(result.nit), converged


def _run_ascent(tracker: _Tracker, u0: np.ndarray, cfg: OptimizerConfig):
    """
    Adaptive first-order ascent. A rejected step halves the step size for the rest
    of the run and is retried along the scaled gradient with the momentum dropped.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    n_chunks = len(tracker.objective.chunks)
    minibatch = cfg.batch_size > 0 and n_chunks > 1

    def draw():
        if not minibatch:
            return None
        per_chunk = max(1, tracker.objective.n_trajectories // n_chunks)
        k = int(np.clip(np.ceil(cfg.batch_size / per_chunk), 1, n_chunks))
        return np.sort(rng.choice(n_chunks, size=k, replace=False))

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    u = u0.copy()
    value, grad = tracker(u, draw())
    if value is None:
        raise OptimizerError("Likelihood is not finite at the starting point", dump=tracker.dump("initial point"))

    first = np.zeros_like(u)
    second = np.zeros_like(u)
    step = cfg.step_size
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        if not minibatch and np.max(np.abs(grad)) < cfg.gradient_tolerance:
            converged = True
            break

        first = beta1 * first + (1 - beta1) * grad
        second = beta2 * second + (1 - beta2) * grad ** 2
        direction = (first / (1 - beta1 ** iteration)) / (np.sqrt(second / (1 - beta2 ** iteration)) + eps)

        batch = draw()
        rejections = 0
        while True:
            candidate = u - step * direction
            new_value, new_grad = tracker(candidate, batch)
            accepted = new_value is not None and (minibatch or new_value <= value + 1e-12 * abs(value))
            if accepted:
                break
            rejections += 1
            step *= 0.5
            # momentum can point uphill after an overshoot; retry along the scaled gradient
            first = np.zeros_like(u)
            direction = grad / (np.sqrt(second / (1 - beta2 ** iteration)) + eps)
            if rejections > cfg.max_rejections:
                raise OptimizerError(f"Step rejected {rejections} times", dump=tracker.dump("persistent rejection"))
        u, value, grad = candidate, new_value, new_grad
    return u, iteration, converged


def fit_hyperparams(corpus: Sequence, spec: BasisSpec, object_class: str,
                    cfg: Optional[OptimizerConfig] = None, init: Optional[HyperParams] = None) -> HyperParams:
    """
    Maximize the corpus log type-II likelihood over noise parameters and Sigma_w.

    Args:
        corpus: Trajectories or observation bundles of one class and horizon
        spec: Basis specification (degree n)
        object_class: "ego" or "agent"
        cfg: Optimizer settings
        init: Starting point (least-squares moments if None)

    Returns:
        HyperParams carrying the achieved summed log type-II likelihood
    """
    cfg = cfg or OptimizerConfig()
    chunk_size = min(cfg.chunk_size, cfg.batch_size) if cfg.batch_size > 0 else cfg.chunk_size
    objective = CorpusObjective(corpus, spec, object_class, chunk_size=chunk_size, threads=cfg.threads)
    param = HyperParameterization(spec, object_class, cfg.fixed_noise)
    start = init or initial_hyperparams(objective, cfg.fixed_noise)
    tracker = _Tracker(objective, param)

    logger.info(f"Fitting {object_class} hyperparameters: degree {spec.degree}, "
                f"{objective.n_trajectories} trajectories, {param.size} parameters, method {cfg.method}")

    u0 = param.pack(start.noise, start.prior)
    if cfg.method == "lbfgs":
        u, iterations, converged = _run_lbfgs(tracker, u0, cfg)
    else:
        u, iterations, converged = _run_ascent(tracker, u0, cfg)

    try:
        natural, L = param.unpack(u)
        total, _, _, _ = objective.evaluate(natural, L, with_grad=False)
        hyper = param.to_hyper(u, n_trajectories=objective.n_trajectories)
    except (HyperparameterError, ParameterError) as e:
        raise OptimizerError(f"Optimizer ended at an invalid point: {e}", dump=tracker.dump(str(e)))
    if not np.isfinite(total):
        raise OptimizerError("Log type-II likelihood is not finite at the optimum", dump=tracker.dump("non-finite"))

    logger.info(f"Degree {spec.degree}: log type-II likelihood {total:.3f} after {iterations} iterations"
                f"{'' if converged else ' (not converged)'}")
    return HyperParams(noise=hyper.noise, prior=hyper.prior, spec=spec, log_type2=total,
                       n_trajectories=objective.n_trajectories,
                       diagnostics={"iterations": iterations, "converged": converged, "method": cfg.method,
                                    "evaluations": tracker.evaluations})
