"""Closed-form Gaussian posterior over trajectory coefficients.

With prior w ~ N(0, Sigma_w) and observations c = Phi^T w + noise, noise ~ N(0, Sigma_o),

    Sigma_post = (Sigma_w^-1 + Phi Sigma_o^-1 Phi^T)^-1
    w_post     = Sigma_post Phi Sigma_o^-1 c

Everything is computed through Cholesky factors of the prior and of the whitened
precision B = I + L^T (Phi Sigma_o^-1 Phi^T) L (Sigma_w = L L^T).
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from config import Config
from src.basis.polynomial import BasisSpec, basis_values, design_matrix
from src.utils.errors import ArgumentError, NumericalError, ParameterError, RankError


@dataclass(frozen=True)
class PriorParams:
    """Zero-mean Gaussian prior over stacked coefficients with covariance `cov`."""

    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ParameterError(f"Prior covariance must be square, got shape {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(cov).max())):
            raise ParameterError("Prior covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = cholesky(cov, lower=True)
        except np.linalg.LinAlgError:
            raise ParameterError("Prior covariance must be positive definite")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor L with cov = L L^T."""
        return self._chol

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    @classmethod
    def isotropic(cls, spec: BasisSpec, scale: float) -> "PriorParams":
        return cls(scale ** 2 * np.eye(spec.n_coefficients))

    def to_json(self):
        return {"dim": self.dim, "cov_row_major": self.cov.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, data) -> "PriorParams":
        dim = int(data["dim"])
        return cls(np.asarray(data["cov_row_major"], dtype=float).reshape(dim, dim))


@dataclass(frozen=True)
class PosteriorFit:
    """Posterior mean / covariance and the per-sample predictive distribution."""

    spec: BasisSpec
    mean: np.ndarray
    cov: np.ndarray
    tau: np.ndarray
    predicted: np.ndarray
    predictive_cov: np.ndarray
    key: Optional[str] = None


def block_precisions(blocks: np.ndarray) -> np.ndarray:
    """Inverses of (m, d, d) SPD blocks, one Cholesky solve per block."""
    eye = np.eye(blocks.shape[-1])
    try:
        return np.stack([cho_solve(cho_factor(block, lower=True), eye) for block in blocks])
    except np.linalg.LinAlgError:
        raise ParameterError("Observation covariance blocks must be positive definite")


def stacked_cho_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """A^-1 rhs for a stack of SPD matrices A = C C^T given their lower factors C (..., k, k)."""
    half = np.linalg.solve(chol, rhs)
    return np.linalg.solve(np.swapaxes(chol, -1, -2), half)


def _information(spec: BasisSpec, F: np.ndarray, y: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """S = Phi Sigma_o^-1 Phi^T and b = Phi Sigma_o^-1 c."""
    d, P = spec.spatial_dim, spec.n_coefficients
    m = F.shape[0]
    if noise.ndim == 3:
        W = block_precisions(noise)
        S = np.einsum('jk,jl,jab->kalb', F, F, W).reshape(P, P)
        b = np.einsum('jk,jab,jb->ka', F, W, y.reshape(m, d)).reshape(P)
        return 0.5 * (S + S.T), b

    Phi = np.kron(F.T, np.eye(d))
    try:
        L_o = cholesky(noise, lower=True)
    except np.linalg.LinAlgError:
        raise ParameterError("Observation covariance must be positive definite")
    A = solve_triangular(L_o, Phi.T, lower=True)
    z = solve_triangular(L_o, y, lower=True)
    return A.T @ A, A.T @ z


def posterior(observed: np.ndarray, times: Sequence[float], noise_cov: np.ndarray,
              prior: PriorParams, spec: BasisSpec, key: Optional[str] = None,
              condition_limit: float = Config.CONDITION_LIMIT) -> PosteriorFit:
    """
    Posterior over coefficients for one trajectory.

    Args:
        observed: (m, d) observed positions
        times: (m,) rescaled sample times
        noise_cov: (m, d, d) per-sample blocks or the dense md x md covariance
        prior: Coefficient prior
        spec: Basis specification
        key: Trajectory identifier for error messages
        condition_limit: Largest accepted condition number of the posterior precision

    Returns:
        PosteriorFit
    """
    observed = np.asarray(observed, dtype=float)
    noise_cov = np.asarray(noise_cov, dtype=float)
    taus = np.asarray(times, dtype=float)
    m, d = len(taus), spec.spatial_dim
    if observed.shape != (m, d):
        raise ArgumentError(f"Observations must have shape ({m}, {d}), got {observed.shape}")
    if prior.dim != spec.n_coefficients:
        raise ArgumentError(f"Prior dimension {prior.dim} does not match (n+1)d = {spec.n_coefficients}")
    if noise_cov.shape not in ((m, d, d), (m * d, m * d)):
        raise ArgumentError(f"Noise covariance shape {noise_cov.shape} does not match m={m}, d={d}")

    F = design_matrix(spec, taus).scalar.T
    S, b = _information(spec, F, observed.reshape(-1), noise_cov)

    L = prior.chol
    B = np.eye(spec.n_coefficients) + L.T @ S @ L
    try:
        L_B = cholesky(0.5 * (B + B.T), lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("Posterior precision is not positive definite", trajectory=key)

    X = solve_triangular(L_B, L.T, lower=True)
    cov = X.T @ X
    mean = L @ cho_solve((L_B, True), L.T @ b)

    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0 or eig[-1] / eig[0] > condition_limit:
        raise NumericalError(f"Posterior precision is ill-conditioned (cond ~ {eig[-1] / max(eig[0], 1e-300):.2e})",
                             trajectory=key)

    predicted, predictive_cov = _predict(spec, mean, cov, F)
    return PosteriorFit(spec=spec, mean=mean, cov=cov, tau=taus, predicted=predicted,
                        predictive_cov=predictive_cov, key=key)


def _predict(spec: BasisSpec, mean: np.ndarray, cov: np.ndarray, F: np.ndarray):
    d = spec.spatial_dim
    points = mean.reshape(spec.n_basis, d)
    blocks = cov.reshape(spec.n_basis, d, spec.n_basis, d)
    means = F @ points
    covs = np.einsum('jk,kalb,jl->jab', F, blocks, F)
    return means, covs


def predict(fit: PosteriorFit, taus: Sequence[float], order: int = 0,
            physical_time: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predictive mean and covariance of positions or their derivatives.

    Args:
        fit: Posterior fit
        taus: Rescaled times
        order: Derivative order w.r.t. tau
        physical_time: Rescale to derivatives w.r.t. seconds

    Returns:
        ((k, d) means, (k, d, d) covariances)
    """
    F = basis_values(fit.spec, taus, order)
    means, covs = _predict(fit.spec, fit.mean, fit.cov, F)
    if physical_time and order > 0:
        scale = fit.spec.horizon ** order
        means, covs = means / scale, covs / scale ** 2
    return means, covs


def solve_from_kinematics(constraints: Sequence[Tuple[float, int, Sequence[float]]], spec: BasisSpec,
                          physical_time: bool = False) -> np.ndarray:
    """
    Coefficients that meet n+1 kinematic constraints exactly.

    Args:
        constraints: (tau, derivative order, value) triples; values are derivatives
                     w.r.t. tau, or w.r.t. seconds if physical_time
        spec: Basis specification
        physical_time: Interpret constraint values in physical time

    Returns:
        Stacked coefficient vector of length (n+1)d
    """
    if len(constraints) != spec.n_basis:
        raise ArgumentError(f"Need exactly {spec.n_basis} constraints for degree {spec.degree}, "
                            f"got {len(constraints)}")

    A = np.vstack([basis_values(spec, [tau], order)[0] for tau, order, _ in constraints])
    V = np.array([np.asarray(value, dtype=float) for _, _, value in constraints]).reshape(spec.n_basis, -1)
    if V.shape[1] != spec.spatial_dim:
        raise ArgumentError(f"Constraint values must have {spec.spatial_dim} components")
    if physical_time:
        orders = np.array([order for _, order, _ in constraints], dtype=float)
        V = V * (spec.horizon ** orders)[:, None]

    if np.linalg.matrix_rank(A) < spec.n_basis:
        raise RankError("Kinematic constraints are linearly dependent")
    return np.linalg.solve(A, V).reshape(-1)
