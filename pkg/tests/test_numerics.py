"""Tests for the dense matrix kernels."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.errors import NonFiniteError, NotPositiveDefiniteError
from modules.numerics import (
    center_in_cone,
    expand,
    find_positive_definite,
    is_positive_definite,
    matrix_exp,
    normalize_det,
    nullspace,
    orthonormalize,
    spd_map,
    sym_basis,
    sym_eig,
    symmetrize,
)


def _random_spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


class TestSymEig:

    def test_identity(self):
        eig = sym_eig(np.eye(3))
        np.testing.assert_allclose(eig.eigenvalues, [1.0, 1.0, 1.0])

    def test_diagonal_ascending(self):
        eig = sym_eig(np.diag([2.0, -1.0]))
        np.testing.assert_allclose(eig.eigenvalues, [-1.0, 2.0])
        np.testing.assert_allclose(np.abs(eig.eigenvectors), [[0.0, 1.0], [1.0, 0.0]])

    def test_reconstruction_and_orthogonality(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 9))
            a = symmetrize(rng.standard_normal((n, n)))
            eig = sym_eig(a)
            scale = 1.0 + np.linalg.norm(a)
            assert np.linalg.norm(eig.reconstruct() - a) <= 1e-12 * scale * 10
            q = eig.eigenvectors
            assert np.linalg.norm(q.T @ q - np.eye(n)) <= 1e-12 * scale * 10
            assert np.all(np.diff(eig.eigenvalues) >= 0)

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteError):
            sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))


class TestSpdMap:

    def test_log_of_identity_is_zero(self):
        np.testing.assert_allclose(spd_map(np.eye(3), "log"), np.zeros((3, 3)), atol=1e-15)

    def test_sqrt_of_diagonal(self):
        np.testing.assert_allclose(spd_map(np.diag([4.0, 1.0]), "sqrt"), np.diag([2.0, 1.0]))

    def test_exp_log_round_trip(self, rng):
        p = _random_spd(rng, 4)
        back = spd_map(spd_map(p, "log"), "exp")
        assert np.linalg.norm(back - p) / np.linalg.norm(p) <= 1e-10

    def test_functional_identities(self, rng):
        p = _random_spd(rng, 5)
        s = spd_map(p, "sqrt")
        assert np.linalg.norm(s @ s - p) / np.linalg.norm(p) <= 1e-10
        r = spd_map(p, "inv_sqrt")
        assert np.linalg.norm(r @ p @ r - np.eye(5)) <= 1e-10
        assert np.linalg.norm(spd_map(p, "inv") @ p - np.eye(5)) <= 1e-10

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            spd_map(np.diag([1.0, -1.0]), "log")

    def test_exp_accepts_indefinite(self):
        out = spd_map(np.diag([1.0, -1.0]), "exp")
        np.testing.assert_allclose(out, np.diag([np.e, 1.0 / np.e]))

    def test_unknown_function(self):
        with pytest.raises(ValueError):
            spd_map(np.eye(2), "cbrt")

    def test_normalize_det(self, rng):
        p = normalize_det(_random_spd(rng, 3))
        assert np.linalg.det(p) == pytest.approx(1.0, rel=1e-12)
        assert is_positive_definite(p)


class TestMatrixExp:

    def test_zero(self):
        np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_exp(np.diag([1.0, -1.0])), np.diag([np.e, 1.0 / np.e]))

    def test_rotation_quarter_turn(self):
        theta = np.pi / 2
        out = matrix_exp(np.array([[0.0, -theta], [theta, 0.0]]))
        np.testing.assert_allclose(out, [[0.0, -1.0], [1.0, 0.0]], atol=1e-14)

    def test_inverse(self, rng):
        x = rng.standard_normal((4, 4))
        x *= 10.0 / np.linalg.norm(x)
        assert np.linalg.norm(matrix_exp(x) @ matrix_exp(-x) - np.eye(4)) <= 1e-10 * np.linalg.norm(matrix_exp(x))

    def test_commuting_group_law(self, rng):
        x = np.diag(rng.standard_normal(3))
        y = np.diag(rng.standard_normal(3))
        assert np.linalg.norm(matrix_exp(x + y) - matrix_exp(x) @ matrix_exp(y)) <= 1e-9

    def test_inf_rejected(self):
        with pytest.raises(NonFiniteError):
            matrix_exp(np.array([[np.inf]]))


class TestNullspace:

    def test_zero_matrix(self):
        v = nullspace(np.zeros((2, 3)))
        assert v.shape == (3, 3)
        np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-15)

    def test_rank_one(self):
        v = nullspace(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert v.shape == (2, 1)
        np.testing.assert_allclose(np.abs(v[:, 0]), [0.0, 1.0], atol=1e-15)

    def test_trivial_kernel(self):
        assert nullspace(np.eye(3)).shape == (3, 0)

    def test_so3_invariance_kernel_is_identity(self):
        """X^T S + S X = 0 for the three rotation generators forces S = cI."""
        basis = sym_basis(3)
        gens = []
        for i, j in ((1, 2), (2, 0), (0, 1)):
            x = np.zeros((3, 3))
            x[i, j], x[j, i] = -1.0, 1.0
            gens.append(x)
        m = np.array([[(x.T @ e + e @ x).ravel() for e in basis] for x in gens])
        m = m.transpose(0, 2, 1).reshape(-1, basis.shape[0])
        v = nullspace(m)
        assert v.shape == (6, 1)
        s = np.tensordot(v[:, 0], basis, axes=1)
        s = s / s[0, 0]
        np.testing.assert_allclose(s, np.eye(3), atol=1e-12)

    def test_residual_and_projector(self, rng):
        m = rng.standard_normal((4, 7))
        v = nullspace(m)
        assert v.shape == (7, 3)
        sigma_max = np.linalg.norm(m, 2)
        assert np.linalg.norm(m @ v, axis=0).max() <= 1e-9 * sigma_max
        proj = v @ v.T
        assert np.linalg.norm(proj @ proj - proj) <= 1e-12


class TestSubspaceHelpers:

    def test_sym_basis_orthonormal(self):
        b = sym_basis(4).reshape(10, -1)
        np.testing.assert_allclose(b @ b.T, np.eye(10), atol=1e-15)

    def test_expand_exact(self):
        basis = sym_basis(2)
        target = np.array([[[1.0, 2.0], [2.0, 3.0]]])
        coeffs, residual = expand(basis, target)
        np.testing.assert_allclose(np.tensordot(coeffs[0], basis, axes=1), target[0])
        assert residual[0] <= 1e-14

    def test_expand_empty_basis_explains_nothing(self):
        coeffs, residual = expand(np.zeros((0, 2, 2)), np.array([np.eye(2)]))
        assert coeffs.shape == (1, 0)
        assert residual[0] == pytest.approx(np.sqrt(2.0))

    def test_orthonormalize_drops_dependent(self):
        a = np.array([1.0, 0.0])
        frame, coeffs, ratios = orthonormalize([a, 2 * a, np.array([1.0, 1.0])], np.dot, 1e-10)
        assert len(frame) == 2
        assert ratios[1] <= 1e-10
        np.testing.assert_allclose(coeffs[1] @ np.array([a, 2 * a, [1.0, 1.0]]), frame[1])

    def test_orthonormalize_reference_scales_drop_round_off(self):
        """Inputs that are all round-off give an empty frame against a unit scale."""
        noise = [1e-17 * np.array([1.0, 0.0]), 1e-17 * np.array([0.3, 1.0])]
        frame, coeffs, ratios = orthonormalize(noise, np.dot, 1e-10, scales=[1.0, 1.0])
        assert frame == []
        assert coeffs.shape == (0, 2)
        assert max(ratios) <= 1e-16

    def test_orthonormalize_scales_must_match(self):
        with pytest.raises(ValueError):
            orthonormalize([np.ones(2)], np.dot, 1e-10, scales=[1.0, 1.0])


class TestPositiveDefiniteSearch:

    def test_identity_subspace_returns_identity(self, rng):
        basis = np.array([np.eye(3) / np.sqrt(3.0)])
        s = find_positive_definite(basis, rng)
        np.testing.assert_allclose(s, np.eye(3), atol=1e-12)

    def test_negative_generator_is_flipped(self, rng):
        basis = np.array([-np.eye(2) / np.sqrt(2.0)])
        s = find_positive_definite(basis, rng)
        assert is_positive_definite(s)

    def test_no_positive_definite_element(self, rng):
        basis = np.array([np.diag([1.0, -1.0]) / np.sqrt(2.0)])
        assert find_positive_definite(basis, rng) is None

    def test_cancelled_start_is_abandoned(self, rng):
        """The ascent step from -diag(0, 1) lands exactly on zero."""
        basis = np.array([np.diag([0.0, 1.0])])
        assert find_positive_definite(basis, rng) is None

    def test_centering_selects_identity(self, rng):
        """Among diag(a,a,c) with trace 3 the log-det maximizer is I."""
        basis = np.array([np.diag([1.0, 1.0, 0.0]) / np.sqrt(2.0), np.diag([0.0, 0.0, 1.0])])
        s = find_positive_definite(basis, rng)
        np.testing.assert_allclose(s, np.eye(3), atol=1e-9)

    def test_center_in_cone_independent_of_start(self):
        basis = sym_basis(2)
        a = center_in_cone(basis, np.array([3.0, 0.5, 1.0]))
        b = center_in_cone(basis, np.array([1.0, -0.2, 4.0]))
        np.testing.assert_allclose(a, b, atol=1e-9)
