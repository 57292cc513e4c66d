import numpy as np
import pytest

from kinbc import (
    DiscreteVelocityModel,
    SteadyState,
    build_coplanar,
    decompose,
    decomposition_residuals,
    eigh_symmetric,
    inverse_state_matrix,
)
from kinbc.errors import NumericalError, ParameterError

from conftest import random_admissible_model, random_steady_state


class TestEighSymmetric:
    def test_identity(self):
        w, basis = eigh_symmetric(np.eye(3))
        np.testing.assert_array_equal(w, np.ones(3))
        np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-14)

    def test_diagonal_permutation(self):
        w, basis = eigh_symmetric(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])
        # eigenvectors are signed unit vectors picking out the sorted entries
        np.testing.assert_allclose(np.abs(basis), np.eye(3)[[1, 2, 0]], atol=1e-14)

    def test_rank_one_conjugated_dissipation(self):
        # same matrix the decomposition diagonalizes for the planar model
        fe = np.array([4.0, 3.0, 2.0, 6.0])
        w_vec = (1.0 / np.sqrt(fe)) * np.array([1.0, 1.0, -1.0, -1.0])
        matrix = 0.1 * 12.0 * np.outer(w_vec, w_vec)
        w, basis = eigh_symmetric(matrix)
        np.testing.assert_allclose(w, [0.0, 0.0, 0.0, 1.5], atol=1e-12)
        np.testing.assert_allclose(basis.T @ np.diag(w) @ basis, matrix, atol=1e-12)

    def test_reconstruction_on_random_matrices(self):
        rng = np.random.default_rng(1234)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            m = rng.normal(size=(n, n))
            m = 0.5 * (m + m.T)
            w, basis = eigh_symmetric(m)
            scale = max(1.0, float(np.linalg.norm(m)))
            assert np.max(np.abs(basis.T @ np.diag(w) @ basis - m)) <= 1e-10 * scale
            assert np.max(np.abs(basis @ basis.T - np.eye(n))) <= 1e-10
            assert np.all(np.diff(w) >= -1e-12 * scale)

    def test_asymmetric_input_rejected(self):
        with pytest.raises(ParameterError, match="symmetric"):
            eigh_symmetric([[0.0, 1.0], [0.5, 0.0]])

    def test_non_square_rejected(self):
        with pytest.raises(ParameterError):
            eigh_symmetric(np.ones((2, 3)))

    def test_sweep_limit_raises(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        with pytest.raises(NumericalError):
            eigh_symmetric(m, max_sweeps=0)


class TestInverseStateMatrix:
    def test_reference_state(self):
        np.testing.assert_allclose(
            inverse_state_matrix([4.0, 3.0, 2.0, 6.0]),
            np.diag([0.25, 1.0 / 3.0, 0.5, 1.0 / 6.0]),
        )

    def test_ones(self):
        np.testing.assert_array_equal(inverse_state_matrix([1.0, 1.0, 1.0]), np.eye(3))

    def test_uniform_scaling(self):
        np.testing.assert_allclose(inverse_state_matrix([2.0, 2.0]), 0.5 * np.eye(2))


class TestDecompose:
    def test_planar_rank_and_rate(self):
        sigma = 0.1
        m = build_coplanar(1.0, sigma)
        fe = SteadyState(m, [4.0, 3.0, 2.0, 6.0])
        # rank-one oracle: the only nonzero eigenvalue of the conjugated
        # dissipation matrix is rate * f1*f2 * sum(1/fe)
        oracle = sigma * 12.0 * float(np.sum(1.0 / fe.values))
        assert abs(oracle - 1.5) < 1e-15
        dec = decompose(m, fe)
        assert dec.rank == 1
        assert abs(dec.relaxation_rates[0] - oracle) <= 1e-12

    def test_defining_identities(self):
        m = build_coplanar(1.0, 0.1)
        fe = SteadyState(m, [4.0, 3.0, 2.0, 6.0])
        dec = decompose(m, fe)
        res_sim, res_weighted = decomposition_residuals(dec, m, fe)
        assert res_sim <= 1e-10
        assert res_weighted <= 1e-10
        np.testing.assert_allclose(dec.transform @ dec.transform_inv, np.eye(4), atol=1e-12)

    def test_collisionless_rank_zero(self):
        m = DiscreteVelocityModel([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        dec = decompose(m, [1.0, 2.0, 3.0, 4.0])
        assert dec.rank == 0
        assert dec.relaxation_rates.size == 0
        res_sim, res_weighted = decomposition_residuals(dec, m, [1.0, 2.0, 3.0, 4.0])
        assert res_sim == 0.0 and res_weighted == 0.0

    def test_random_steady_states(self):
        rng = np.random.default_rng(777)
        for _ in range(60):
            m = random_admissible_model(rng)
            fe = random_steady_state(rng, m)
            dec = decompose(m, fe)
            res_sim, res_weighted = decomposition_residuals(dec, m, fe)
            assert res_sim <= 1e-9
            assert res_weighted <= 1e-9

    def test_rank_stable_under_steady_scaling(self):
        # scaling a balanced state preserves pair products, hence steadiness
        m = build_coplanar(1.0, 0.1)
        base = np.array([4.0, 3.0, 2.0, 6.0])
        for c in (0.5, 1.0, 2.0, 4.0):
            dec = decompose(m, SteadyState(m, c * base))
            assert dec.rank == 1
