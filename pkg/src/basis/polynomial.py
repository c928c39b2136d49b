"""Polynomial basis functions of rescaled time, design matrices and basis changes.

A trajectory over a horizon T is written as c(tau) = sum_k phi_k(tau) w_k with
tau = (t - t0) / T in [0, 1] and w_k points in R^d. Coefficient vectors are
stacked as w = [w_0, ..., w_n] (length (n+1)d) and observation vectors as
c = [c(tau_1), ..., c(tau_m)] (length md).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.special import comb, factorial

from config import Config
from src.utils.errors import ArgumentError, DomainError

# Round-off allowance on the [0, 1] domain of tau
TAU_EPS = 1e-9


class BasisFamily(str, Enum):
    MONOMIAL = "monomial"
    BERNSTEIN = "bernstein"


@dataclass(frozen=True)
class BasisSpec:
    """Basis family, degree n, spatial dimension d and horizon T (seconds)."""

    family: BasisFamily = BasisFamily.MONOMIAL
    degree: int = 3
    spatial_dim: int = 2
    horizon: float = Config.HORIZON_S

    def __post_init__(self):
        object.__setattr__(self, "family", BasisFamily(self.family))
        if not 0 <= self.degree <= Config.MAX_DEGREE:
            raise ArgumentError(f"Degree must be in [0, {Config.MAX_DEGREE}], got {self.degree}")
        if self.spatial_dim < 1:
            raise ArgumentError(f"Spatial dimension must be >= 1, got {self.spatial_dim}")
        if not self.horizon > 0:
            raise ArgumentError(f"Horizon must be positive, got {self.horizon}")

    @property
    def n_basis(self) -> int:
        return self.degree + 1

    @property
    def n_coefficients(self) -> int:
        """Length (n+1)d of a stacked coefficient vector."""
        return self.n_basis * self.spatial_dim

    def with_family(self, family: Union[str, BasisFamily]) -> "BasisSpec":
        return BasisSpec(family, self.degree, self.spatial_dim, self.horizon)

    def with_degree(self, degree: int) -> "BasisSpec":
        return BasisSpec(self.family, degree, self.spatial_dim, self.horizon)


@dataclass(frozen=True)
class BasisVector:
    """phi^(order)(tau) for k = 0..n."""

    values: np.ndarray
    tau: float
    derivative_order: int = 0

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DesignMatrix:
    """The (n+1)d x md matrix Phi whose column block j is phi(tau_j) kron I_d."""

    entries: np.ndarray
    sample_times: np.ndarray
    scalar: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


def _check_taus(taus: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(taus)) or np.any(taus < -TAU_EPS) or np.any(taus > 1.0 + TAU_EPS):
        bad = taus[~((taus >= -TAU_EPS) & (taus <= 1.0 + TAU_EPS))]
        raise DomainError(f"Rescaled time must lie in [0, 1], got {bad[:3].tolist()}")
    return np.clip(taus, 0.0, 1.0)


def _monomial(degree: int, taus: np.ndarray, order: int) -> np.ndarray:
    k = np.arange(degree + 1)
    out = np.zeros((len(taus), degree + 1))
    live = k >= order
    # k! / (k - order)! * tau^(k - order)
    scale = factorial(k[live]) / factorial(k[live] - order)
    out[:, live] = scale * np.power(taus[:, None], k[live] - order)
    return out


def _bernstein_raw(degree: int, taus: np.ndarray) -> np.ndarray:
    k = np.arange(degree + 1)
    return comb(degree, k) * np.power(taus[:, None], k) * np.power(1.0 - taus[:, None], degree - k)


def _bernstein(degree: int, taus: np.ndarray, order: int) -> np.ndarray:
    out = np.zeros((len(taus), degree + 1))
    if order > degree:
        return out
    if order == 0:
        return _bernstein_raw(degree, taus)

    # B_{k,n}^(q) = n!/(n-q)! * sum_i (-1)^i C(q,i) B_{k-q+i, n-q}
    lower = _bernstein_raw(degree - order, taus)
    for i in range(order + 1):
        sign = (-1.0) ** i
        shift = order - i
        out[:, shift:shift + degree - order + 1] += sign * comb(order, i) * lower
    return out * (factorial(degree) / factorial(degree - order))


def basis_values(spec: BasisSpec, taus: Sequence[float], order: int = 0) -> np.ndarray:
    """
    Evaluate all basis functions (or a derivative) at many rescaled times.

    Args:
        spec: Basis specification
        taus: Rescaled times in [0, 1]
        order: Derivative order w.r.t. tau

    Returns:
        Array of shape (len(taus), n+1)
    """
    if order < 0:
        raise ArgumentError(f"Derivative order must be >= 0, got {order}")
    taus = _check_taus(np.atleast_1d(np.asarray(taus, dtype=float)))

    if spec.family == BasisFamily.MONOMIAL:
        return _monomial(spec.degree, taus, order)
    return _bernstein(spec.degree, taus, order)


def eval_basis(spec: BasisSpec, tau: float, order: int = 0) -> BasisVector:
    """
    Evaluate phi^(order)(tau). Derivatives are taken w.r.t. tau; divide by T**order
    for derivatives in physical time. Orders above n give an all-zeros vector.
    """
    values = basis_values(spec, [tau], order)[0]
    return BasisVector(values=values, tau=float(tau), derivative_order=order)


def design_matrix(spec: BasisSpec, times: Sequence[float]) -> DesignMatrix:
    """
    Assemble Phi for a set of rescaled sample times.

    Args:
        spec: Basis specification
        times: m rescaled sample times

    Returns:
        DesignMatrix with entries of shape ((n+1)d, md)
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ArgumentError("Design matrix needs at least one sample time")

    scalar = basis_values(spec, times).T
    entries = np.kron(scalar, np.eye(spec.spatial_dim))
    return DesignMatrix(entries=entries, sample_times=times, scalar=scalar)


def evaluate_curve(spec: BasisSpec, coefficients: np.ndarray, taus: Sequence[float],
                   order: int = 0, physical_time: bool = False) -> np.ndarray:
    """
    Evaluate a stacked coefficient vector (or its derivative) at rescaled times.

    Args:
        spec: Basis specification
        coefficients: Stacked vector of length (n+1)d
        taus: Rescaled times
        order: Derivative order
        physical_time: Rescale derivatives by 1/T**order

    Returns:
        Array of shape (len(taus), d)
    """
    points = np.asarray(coefficients, dtype=float).reshape(spec.n_basis, spec.spatial_dim)
    values = basis_values(spec, taus, order) @ points
    if physical_time and order > 0:
        values = values / spec.horizon ** order
    return values


def _bernstein_to_monomial(degree: int) -> np.ndarray:
    # C[k, j] such that B_k(tau) = sum_j C[k, j] tau^j
    C = np.zeros((degree + 1, degree + 1))
    for k in range(degree + 1):
        for j in range(k, degree + 1):
            C[k, j] = (-1.0) ** (j - k) * comb(degree, j, exact=True) * comb(j, k, exact=True)
    return C


def _monomial_to_bernstein(degree: int) -> np.ndarray:
    # D[j, k] such that tau^j = sum_k D[j, k] B_k(tau)
    D = np.zeros((degree + 1, degree + 1))
    for j in range(degree + 1):
        for k in range(j, degree + 1):
            D[j, k] = comb(k, j, exact=True) / comb(degree, j, exact=True)
    return D


def basis_change(source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """
    Return M with phi_source(tau)^T M = phi_target(tau)^T for all tau.

    Coefficients transform the other way round: w_source = M w_target.
    """
    if source.degree != target.degree or source.spatial_dim != target.spatial_dim:
        raise ArgumentError(
            f"Basis change needs equal degree and dimension, got "
            f"n={source.degree}/{target.degree}, d={source.spatial_dim}/{target.spatial_dim}")

    n = source.degree
    if source.family == target.family:
        return np.eye(n + 1)
    if source.family == BasisFamily.MONOMIAL:
        # phi_bern = C phi_mono
        return _bernstein_to_monomial(n).T
    # phi_mono = D phi_bern
    return _monomial_to_bernstein(n).T


def coefficient_map(source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """Matrix A with w_target = A w_source on stacked (n+1)d coefficient vectors."""
    A = basis_change(target, source)
    return np.kron(A, np.eye(source.spatial_dim))


def transform_coefficients(coefficients: np.ndarray, source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """Re-express stacked coefficients of one basis family in another."""
    return coefficient_map(source, target) @ np.asarray(coefficients, dtype=float)


def transform_prior(prior_cov: np.ndarray, source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """Congruent transform A Sigma A^T of a coefficient covariance."""
    A = coefficient_map(source, target)
    out = A @ prior_cov @ A.T
    return 0.5 * (out + out.T)
