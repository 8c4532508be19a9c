"""Dense-kernel tests: Jacobi eigensolver and the 3x3 Cholesky solver."""

from __future__ import annotations

import numpy as np
import pytest

from rangefit import DegenerateFitError, smallest_eigenvector, solve_spd3
from rangefit.fitting import cholesky3, jacobi_eigh, solve_cholesky3, _pinv_solve


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    m = rng.standard_normal((rank or n + 2, n)) * rng.uniform(0.1, 10)
    return m.T @ m


class TestSmallestEigenvector:
    def test_identity_degenerate_tie(self):
        v, lam = smallest_eigenvector(np.eye(4))
        assert lam == pytest.approx(1.0, rel=1e-14)
        residual = np.linalg.norm(np.eye(4) @ v - lam * v)
        assert residual < 1e-12

    def test_simple_diagonal(self):
        v, lam = smallest_eigenvector(np.diag([4.0, 3.0, 2.0, 1.0]))
        assert lam == 1.0
        np.testing.assert_allclose(np.abs(v), [0, 0, 0, 1], atol=1e-14)

    def test_residual_and_rayleigh_bound_on_random_psd(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            s = random_psd(rng, 4)
            v, lam = smallest_eigenvector(s)
            fro = np.linalg.norm(s)
            assert np.linalg.norm(s @ v - lam * v) <= 1e-10 * fro
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12
            # the smallest eigenvalue lower-bounds every Rayleigh quotient
            probes = rng.standard_normal((50, 4))
            probes /= np.linalg.norm(probes, axis=1, keepdims=True)
            quotients = np.einsum("ij,jk,ik->i", probes, s, probes)
            assert lam <= quotients.min() + 1e-9 * fro

    def test_matches_reference_eigenvalues(self):
        rng = np.random.default_rng(1)
        for n in (3, 4):
            for _ in range(100):
                s = random_psd(rng, n)
                values, vectors = jacobi_eigh(s)
                np.testing.assert_allclose(
                    np.sort(values), np.linalg.eigvalsh(s), rtol=1e-10, atol=1e-10 * np.linalg.norm(s)
                )
                # eigenvectors stay orthonormal
                np.testing.assert_allclose(vectors.T @ vectors, np.eye(n), atol=1e-12)

    def test_zero_matrix(self):
        v, lam = smallest_eigenvector(np.zeros((4, 4)))
        assert lam == 0.0
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_finite(self):
        s = np.eye(4)
        s[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            jacobi_eigh(s)


class TestSolveSpd3:
    def test_identity(self):
        np.testing.assert_allclose(solve_spd3(np.eye(3), np.array([1.0, 2.0, 3.0])), [1, 2, 3])

    def test_scaled_diagonal(self):
        np.testing.assert_allclose(
            solve_spd3(np.diag([2.0, 2.0, 2.0]), np.array([2.0, 4.0, 6.0])), [1, 2, 3]
        )

    def test_residual_on_random_spd(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            s = random_psd(rng, 3)
            rhs = rng.standard_normal(3) * rng.uniform(0.1, 100)
            x = solve_spd3(s, rhs)
            assert np.linalg.norm(s @ x - rhs) <= 1e-9 * max(np.linalg.norm(rhs), 1e-30)

    def test_rank_deficient_raises(self):
        # two identical monomial columns
        m = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 1.0], [3.0, 3.0, 1.0], [4.0, 4.0, 1.0]])
        s = m.T @ m
        with pytest.raises(DegenerateFitError):
            cholesky3(s)

    def test_factor_reuse_matches_direct_solve(self):
        rng = np.random.default_rng(3)
        s = random_psd(rng, 3)
        factor = cholesky3(s)
        for _ in range(5):
            rhs = rng.standard_normal(3)
            np.testing.assert_array_equal(solve_cholesky3(factor, rhs), solve_spd3(s, rhs))

    def test_pinv_solve_minimum_norm(self):
        # rank-2 system: solution must lie in the row space
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        s = m.T @ m
        rhs = np.array([2.0, 3.0, 0.0])
        x = _pinv_solve(s, rhs)
        np.testing.assert_allclose(x, [2.0, 3.0, 0.0], atol=1e-12)
