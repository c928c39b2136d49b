"""Tests for basis evaluation, design matrices and basis changes."""

import numpy as np
import pytest
from scipy.spatial import Delaunay

from src.basis.polynomial import (BasisSpec, basis_change, basis_values, design_matrix, eval_basis,
                                  evaluate_curve, transform_coefficients)
from src.utils.errors import ArgumentError, DomainError


def test_monomial_values():
    """Powers of tau for the monomial family."""
    spec = BasisSpec("monomial", 3)
    np.testing.assert_allclose(eval_basis(spec, 0.5).values, [1, 0.5, 0.25, 0.125])


def test_monomial_derivative_at_one():
    spec = BasisSpec("monomial", 2)
    np.testing.assert_allclose(eval_basis(spec, 1.0, order=1).values, [0, 1, 2])


def test_bernstein_values():
    spec = BasisSpec("bernstein", 2)
    np.testing.assert_allclose(eval_basis(spec, 0.5).values, [0.25, 0.5, 0.25])


def test_order_above_degree_is_zero():
    for family in ("monomial", "bernstein"):
        spec = BasisSpec(family, 2)
        np.testing.assert_array_equal(eval_basis(spec, 0.3, order=3).values, np.zeros(3))


def test_tau_outside_domain():
    spec = BasisSpec("monomial", 2)
    with pytest.raises(DomainError):
        eval_basis(spec, 1.01)
    with pytest.raises(DomainError):
        eval_basis(spec, -0.2)


def test_partition_of_unity():
    """Bernstein polynomials sum to one on a 101-point grid."""
    grid = np.linspace(0, 1, 101)
    for n in range(0, 9):
        values = basis_values(BasisSpec("bernstein", n), grid)
        np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)


def test_convex_hull_containment(rng):
    """A Bernstein curve stays inside the hull of its control points."""
    spec = BasisSpec("bernstein", 5)
    for _ in range(10):
        control = rng.standard_normal((6, 2)) * 10
        curve = evaluate_curve(spec, control.reshape(-1), np.linspace(0, 1, 50))
        hull = Delaunay(control)
        assert np.all(hull.find_simplex(curve, tol=1e-9) >= 0)


@pytest.mark.parametrize("family", ["monomial", "bernstein"])
def test_derivative_matches_finite_difference(family):
    spec = BasisSpec(family, 6)
    h = 1e-6
    for tau in (0.1, 0.37, 0.5, 0.83):
        fd = (eval_basis(spec, tau + h).values - eval_basis(spec, tau - h).values) / (2 * h)
        exact = eval_basis(spec, tau, order=1).values
        np.testing.assert_allclose(fd, exact, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("family", ["monomial", "bernstein"])
def test_second_derivative_matches_finite_difference(family):
    spec = BasisSpec(family, 5)
    h = 1e-5
    tau = 0.42
    fd = (eval_basis(spec, tau + h, 1).values - eval_basis(spec, tau - h, 1).values) / (2 * h)
    np.testing.assert_allclose(fd, eval_basis(spec, tau, 2).values, rtol=1e-5, atol=1e-6)


def test_design_matrix_line():
    """Phi^T maps [p0; p1] to the samples of p0 + tau p1 at tau = 0, 1."""
    spec = BasisSpec("monomial", 1)
    Phi = design_matrix(spec, [0.0, 1.0])
    assert Phi.shape == (4, 4)
    p0, p1 = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    np.testing.assert_allclose(Phi.entries.T @ np.r_[p0, p1], np.r_[p0, p0 + p1])


def test_design_matrix_degree_zero():
    Phi = design_matrix(BasisSpec("monomial", 0), [0.3])
    np.testing.assert_array_equal(Phi.entries, np.eye(2))


def test_design_matrix_block_structure():
    spec = BasisSpec("monomial", 5)
    times = np.linspace(0, 1, 50)
    Phi = design_matrix(spec, times)
    assert Phi.shape == (12, 100)
    for j in (0, 17, 49):
        block = Phi.entries[:, 2 * j:2 * j + 2]
        np.testing.assert_allclose(block, np.kron(eval_basis(spec, times[j]).values[:, None], np.eye(2)))


def test_design_matrix_empty():
    with pytest.raises(ArgumentError):
        design_matrix(BasisSpec(), [])


def test_bernstein_to_monomial_degree_one():
    """B_0 = 1 - tau and B_1 = tau give [w0, w1 - w0]."""
    source, target = BasisSpec("bernstein", 1, spatial_dim=1), BasisSpec("monomial", 1, spatial_dim=1)
    out = transform_coefficients(np.array([2.0, 5.0]), source, target)
    np.testing.assert_allclose(out, [2.0, 3.0])


def test_basis_change_identity_on_values():
    tau = np.linspace(0, 1, 9)
    for source, target in (("monomial", "bernstein"), ("bernstein", "monomial")):
        a, b = BasisSpec(source, 7), BasisSpec(target, 7)
        M = basis_change(a, b)
        np.testing.assert_allclose(basis_values(a, tau) @ M, basis_values(b, tau), atol=1e-12)


def test_basis_change_round_trip():
    mono, bern = BasisSpec("monomial", 6), BasisSpec("bernstein", 6)
    np.testing.assert_allclose(basis_change(mono, bern) @ basis_change(bern, mono), np.eye(7), atol=1e-12)


def test_basis_change_degree_mismatch():
    with pytest.raises(ArgumentError):
        basis_change(BasisSpec("monomial", 2), BasisSpec("bernstein", 3))


def test_transformed_curve_is_unchanged(rng):
    mono, bern = BasisSpec("monomial", 4), BasisSpec("bernstein", 4)
    w = rng.standard_normal(10)
    taus = rng.uniform(0, 1, 20)
    moved = transform_coefficients(w, mono, bern)
    diff = evaluate_curve(mono, w, taus) - evaluate_curve(bern, moved, taus)
    assert np.max(np.abs(diff)) < 1e-9


def test_physical_time_derivative():
    spec = BasisSpec("monomial", 1, horizon=5.0)
    w = np.array([0.0, 0.0, 10.0, 0.0])
    np.testing.assert_allclose(evaluate_curve(spec, w, [0.5], order=1, physical_time=True), [[2.0, 0.0]])
