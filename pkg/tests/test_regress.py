"""Tests for the coefficient posterior, prediction and kinematic solves."""

import mpmath
import numpy as np
import pytest
from scipy.linalg import block_diag

from conftest import random_spd
from src.basis.polynomial import (BasisSpec, design_matrix, evaluate_curve, transform_coefficients,
                                  transform_prior)
from src.noisemodel.covariance import rotation
from src.regress.metrics import ade
from src.regress.posterior import (PriorParams, block_precisions, posterior, predict, solve_from_kinematics,
                                  stacked_cho_solve)
from src.trajdata.frames import TrajectoryObservations
from src.utils.errors import ArgumentError, NumericalError, ParameterError, RankError


def _random_instance(rng, spec, m, noise_scale=0.05, prior_scale=25.0):
    taus = np.sort(rng.uniform(0, 1, m))
    taus[0] = 0.0
    prior = PriorParams(random_spd(rng, spec.n_coefficients, prior_scale))
    blocks = np.stack([random_spd(rng, 2, noise_scale) for _ in range(m)])
    observed = rng.normal(size=(m, 2)) * 5
    return observed, taus, blocks, prior


def _precise_oracle(observed, taus, blocks, prior, spec):
    """Information-form posterior in 50-digit arithmetic."""
    Phi = design_matrix(spec, taus).entries
    with mpmath.workdps(50):
        info = mpmath.inverse(mpmath.matrix(prior.cov.tolist()))
        rhs = mpmath.zeros(spec.n_coefficients, 1)
        for i, block in enumerate(blocks):
            F = mpmath.matrix(Phi[:, 2 * i:2 * i + 2].tolist())
            FW = F * mpmath.inverse(mpmath.matrix(block.tolist()))
            info = info + FW * F.T
            rhs = rhs + FW * mpmath.matrix(observed[i].tolist())
        cov = mpmath.inverse(info)
        mean = cov * rhs
        return np.array(mean.tolist(), dtype=float).reshape(-1), np.array(cov.tolist(), dtype=float)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_scalar_conjugate_update():
    """One observation of a constant: mean c s^2 / (s^2 + v)."""
    spec = BasisSpec("monomial", 0)
    s2, v = 4.0, 1.0
    c = np.array([[2.0, -1.0]])
    fit = posterior(c, [0.5], np.array([v * np.eye(2)]), PriorParams(s2 * np.eye(2)), spec)
    np.testing.assert_allclose(fit.mean, c[0] * s2 / (s2 + v))
    np.testing.assert_allclose(fit.cov, np.eye(2) * s2 * v / (s2 + v))


def test_noiseless_limit_interpolates(rng):
    spec = BasisSpec("monomial", 3)
    truth = rng.normal(size=8) * 3
    taus = np.array([0.0, 0.3, 0.7, 1.0])
    observed = evaluate_curve(spec, truth, taus)
    blocks = np.broadcast_to(1e-16 * np.eye(2), (4, 2, 2))
    fit = posterior(observed, taus, blocks, PriorParams.isotropic(spec, 100.0), spec)
    assert np.max(np.abs(fit.mean - truth)) < 1e-6


@pytest.mark.parametrize("family", ["monomial", "bernstein"])
def test_matches_high_precision_solve(rng, family):
    for _ in range(50):
        spec = BasisSpec(family, int(rng.integers(0, 7)))
        observed, taus, blocks, prior = _random_instance(rng, spec, int(rng.integers(2, 61)))
        fit = posterior(observed, taus, blocks, prior, spec)
        mean, cov = _precise_oracle(observed, taus, blocks, prior, spec)
        assert _rel(fit.mean, mean) < 1e-10
        assert _rel(fit.cov, cov) < 1e-10


def test_dense_noise_matches_blocks(rng):
    spec = BasisSpec("monomial", 3)
    observed, taus, blocks, prior = _random_instance(rng, spec, 20)
    a = posterior(observed, taus, blocks, prior, spec)
    b = posterior(observed, taus, block_diag(*blocks), prior, spec)
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-10, atol=1e-14)


def test_posterior_contracts(rng):
    spec = BasisSpec("bernstein", 4)
    observed, taus, blocks, prior = _random_instance(rng, spec, 12)
    fit = posterior(observed, taus, blocks, prior, spec)
    assert np.all(np.linalg.eigvalsh(prior.cov - fit.cov) > -1e-10)


def test_prior_dominates_with_huge_noise(rng):
    spec = BasisSpec("monomial", 2)
    observed, taus, _, prior = _random_instance(rng, spec, 10)
    blocks = np.broadcast_to(1e12 * np.eye(2), (10, 2, 2))
    fit = posterior(observed, taus, blocks, prior, spec)
    assert np.max(np.abs(fit.mean)) < 1e-6
    np.testing.assert_allclose(fit.cov, prior.cov, rtol=1e-6)


def test_rotation_equivariance(rng):
    """Rotating observations, noise and prior rotates every coefficient point."""
    spec = BasisSpec("monomial", 4)
    for _ in range(10):
        observed, taus, blocks, prior = _random_instance(rng, spec, 25)
        R = rotation(rng.uniform(-np.pi, np.pi))
        Rk = np.kron(np.eye(spec.n_basis), R)
        fit = posterior(observed, taus, blocks, prior, spec)
        moved = posterior(observed @ R.T, taus, R @ blocks @ R.T, PriorParams(Rk @ prior.cov @ Rk.T), spec)
        assert np.max(np.abs(moved.mean - Rk @ fit.mean)) < 1e-9
        np.testing.assert_allclose(moved.cov, Rk @ fit.cov @ Rk.T, atol=1e-9)


def test_rotation_leaves_ade_unchanged(rng, make_observations):
    spec = BasisSpec("monomial", 2)
    observed, taus, blocks, prior = _random_instance(rng, spec, 30)
    headings = rng.uniform(-np.pi, np.pi, 30)
    angle = 0.8
    R = rotation(angle)
    Rk = np.kron(np.eye(spec.n_basis), R)
    fit = posterior(observed, taus, blocks, prior, spec)
    moved = posterior(observed @ R.T, taus, R @ blocks @ R.T, PriorParams(Rk @ prior.cov @ Rk.T), spec)
    before = ade([fit], [make_observations(observed, taus, headings=headings)])
    after = ade([moved], [make_observations(observed @ R.T, taus, headings=headings + angle)])
    assert abs(before.ade - after.ade) < 1e-9
    assert abs(before.ade_lon - after.ade_lon) < 1e-9
    assert abs(before.ade_lat - after.ade_lat) < 1e-9


def test_translation_with_broad_prior(rng):
    """With an uninformative prior a shift of all samples shifts every monomial offset."""
    spec = BasisSpec("monomial", 2)
    observed, taus, blocks, _ = _random_instance(rng, spec, 30, noise_scale=0.01)
    prior = PriorParams.isotropic(spec, 1e5)
    shift = np.array([40.0, -25.0])
    a = posterior(observed, taus, blocks, prior, spec)
    b = posterior(observed + shift, taus, blocks, prior, spec)
    expected = a.mean.copy()
    expected[:2] += shift
    assert np.max(np.abs(b.mean - expected)) < 1e-6


def test_predictive_positions(rng):
    spec = BasisSpec("bernstein", 3)
    observed, taus, blocks, prior = _random_instance(rng, spec, 15)
    fit = posterior(observed, taus, blocks, prior, spec)
    np.testing.assert_allclose(fit.predicted, evaluate_curve(spec, fit.mean, taus), atol=1e-12)
    assert fit.predictive_cov.shape == (15, 2, 2)
    means, covs = predict(fit, taus)
    np.testing.assert_allclose(means, fit.predicted, atol=1e-12)
    np.testing.assert_allclose(covs, fit.predictive_cov, atol=1e-14)


def test_predicted_velocity_in_physical_time(rng):
    spec = BasisSpec("monomial", 3, horizon=5.0)
    observed, taus, blocks, prior = _random_instance(rng, spec, 15)
    fit = posterior(observed, taus, blocks, prior, spec)
    taus_new = np.linspace(0, 1, 7)
    means, covs = predict(fit, taus_new, order=1, physical_time=True)
    np.testing.assert_allclose(means, evaluate_curve(spec, fit.mean, taus_new, 1, physical_time=True))
    unscaled, unscaled_covs = predict(fit, taus_new, order=1)
    np.testing.assert_allclose(covs, unscaled_covs / 25.0)


def test_ill_conditioned_posterior_names_trajectory(rng):
    spec = BasisSpec("monomial", 2)
    observed, taus, blocks, prior = _random_instance(rng, spec, 10)
    with pytest.raises(NumericalError) as info:
        posterior(observed, taus, blocks, prior, spec, key="scene/obj", condition_limit=1.0)
    assert "scene/obj" in str(info.value)


def test_shape_mismatch():
    spec = BasisSpec("monomial", 1)
    with pytest.raises(ArgumentError):
        posterior(np.zeros((3, 2)), [0, 0.5, 1], np.stack([np.eye(2)] * 2), PriorParams(np.eye(4)), spec)


def test_prior_must_be_positive_definite():
    with pytest.raises(ParameterError):
        PriorParams(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_prior_json_round_trip(rng):
    prior = PriorParams(random_spd(rng, 6))
    np.testing.assert_array_equal(PriorParams.from_json(prior.to_json()).cov, prior.cov)


def test_kinematics_line():
    spec = BasisSpec("monomial", 1)
    p0, p1 = np.array([1.0, 1.0]), np.array([4.0, -3.0])
    w = solve_from_kinematics([(0.0, 0, p0), (1.0, 0, p1)], spec)
    np.testing.assert_allclose(w, np.r_[p0, p1 - p0])


def test_kinematics_degree_five(rng):
    """Position, velocity and acceleration at two times fix all six coefficient points."""
    spec = BasisSpec("monomial", 5, horizon=5.0)
    for _ in range(100):
        truth = rng.normal(size=12) * 5
        constraints = [(tau, order, evaluate_curve(spec, truth, [tau], order)[0])
                       for tau in (0.0, 1.0) for order in (0, 1, 2)]
        w = solve_from_kinematics(constraints, spec)
        assert np.max(np.abs(w - truth)) < 1e-9


def test_kinematics_in_physical_time(rng):
    spec = BasisSpec("bernstein", 3, horizon=4.0)
    truth = rng.normal(size=8)
    constraints = [(tau, order, evaluate_curve(spec, truth, [tau], order, physical_time=True)[0])
                   for tau in (0.0, 1.0) for order in (0, 1)]
    np.testing.assert_allclose(solve_from_kinematics(constraints, spec, physical_time=True), truth, atol=1e-10)


def test_kinematics_rank_error():
    spec = BasisSpec("monomial", 2)
    with pytest.raises(RankError):
        solve_from_kinematics([(0.5, 0, [1.0, 1.0])] * 3, spec)


def test_kinematics_wrong_count():
    with pytest.raises(ArgumentError):
        solve_from_kinematics([(0.0, 0, [0.0, 0.0])], BasisSpec("monomial", 2))


def test_basis_change_leaves_ade_unchanged(rng, make_observations):
    """A monomial fit and a Bernstein fit under the carried-over prior trace the same curve."""
    monomial, bernstein = BasisSpec("monomial", 4), BasisSpec("bernstein", 4)
    for _ in range(10):
        observed, taus, blocks, prior = _random_instance(rng, monomial, 40)
        fit = posterior(observed, taus, blocks, prior, monomial)
        other = posterior(observed, taus, blocks, PriorParams(transform_prior(prior.cov, monomial, bernstein)),
                          bernstein)
        obs = make_observations(observed, taus, headings=rng.uniform(-np.pi, np.pi, 40))
        before, after = ade([fit], [obs]), ade([other], [obs])
        assert abs(before.ade - after.ade) < 1e-9
        assert abs(before.ade_lon - after.ade_lon) < 1e-9
        assert abs(before.ade_lat - after.ade_lat) < 1e-9
        np.testing.assert_allclose(other.mean, transform_coefficients(fit.mean, monomial, bernstein),
                                   rtol=1e-8, atol=1e-8)


def test_block_precisions(rng):
    blocks = np.stack([random_spd(rng, 2, 0.3) for _ in range(6)])
    W = block_precisions(blocks)
    np.testing.assert_allclose(W @ blocks, np.broadcast_to(np.eye(2), blocks.shape), atol=1e-10)
    chol = np.linalg.cholesky(blocks)
    np.testing.assert_allclose(stacked_cho_solve(chol, np.broadcast_to(np.eye(2), blocks.shape)), W, rtol=1e-10)


def test_indefinite_noise_block_is_rejected(rng):
    spec = BasisSpec("monomial", 1)
    observed, taus, blocks, prior = _random_instance(rng, spec, 5)
    blocks[2] = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ParameterError):
        posterior(observed, taus, blocks, prior, spec)
