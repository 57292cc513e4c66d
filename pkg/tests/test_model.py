import math

import numpy as np
import pytest

from kinbc import (
    DiscreteVelocityModel,
    SteadyState,
    build_coplanar,
    entropy,
    entropy_gradient,
    entropy_hessian,
    is_steady_state,
    log_mean,
    onsager_matrix,
    source_jacobian,
    source_term,
)
from kinbc.errors import DomainError, ModelError, ParameterError

from conftest import random_admissible_model, random_positive_state, random_steady_state


def fd_jacobian(model, f, h=1e-5):
    """Central finite differences of the source term (independent oracle)."""
    f = np.asarray(f, dtype=float)
    n = f.size
    out = np.zeros((n, n))
    for c in range(n):
        fp = f.copy()
        fp[c] += h
        fm = f.copy()
        fm[c] -= h
        out[:, c] = (source_term(model, fp) - source_term(model, fm)) / (2.0 * h)
    return out


class TestCoplanar:
    def test_velocity_layout(self):
        m = build_coplanar(1.0, 0.1)
        np.testing.assert_array_equal(
            m.velocities, [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
        )
        assert m.n_species == 4 and m.dim == 2

    def test_symmetric_state_has_zero_source(self):
        m = build_coplanar(1.0, 0.1)
        np.testing.assert_array_equal(source_term(m, [1.0, 1.0, 1.0, 1.0]), np.zeros(4))

    def test_source_by_direct_substitution(self):
        m = build_coplanar(2.0, 0.5)
        np.testing.assert_allclose(
            source_term(m, [2.0, 1.0, 1.0, 1.0]), [-0.5, -0.5, 0.5, 0.5], atol=1e-15
        )

    def test_source_at_balanced_state(self):
        m = build_coplanar(1.0, 0.1)
        np.testing.assert_allclose(source_term(m, [4.0, 3.0, 2.0, 6.0]), np.zeros(4), atol=1e-15)

    def test_source_generic_state(self):
        m = build_coplanar(1.0, 0.1)
        np.testing.assert_allclose(
            source_term(m, [1.0, 2.0, 3.0, 4.0]), [1.0, 1.0, -1.0, -1.0], atol=1e-14
        )

    def test_collision_rate_closure(self):
        m = build_coplanar(1.0, 0.25)
        # every index ordering of the single family reports the same rate
        for i, j in ((0, 1), (1, 0)):
            for k, l in ((2, 3), (3, 2)):
                assert m.collision_rate(i, j, k, l) == 0.25
                assert m.collision_rate(k, l, i, j) == 0.25
        assert m.collision_rate(0, 2, 1, 3) == 0.0

    @pytest.mark.parametrize("U,sigma", [(0.0, 0.1), (-1.0, 0.1), (1.0, 0.0), (1.0, -0.5)])
    def test_rejects_nonpositive_parameters(self, U, sigma):
        with pytest.raises(ParameterError):
            build_coplanar(U, sigma)


class TestConstruction:
    def test_zero_velocity_rejected(self):
        with pytest.raises(ParameterError, match="zero velocity"):
            DiscreteVelocityModel([[1.0, 0.0], [0.0, 0.0]])

    def test_collision_index_out_of_range(self):
        with pytest.raises(ParameterError):
            DiscreteVelocityModel([[1.0], [-1.0]], [(0, 1, 2, 0, 1.0)])

    def test_duplicate_family_rejected(self):
        with pytest.raises(ParameterError, match="stated more than once"):
            DiscreteVelocityModel(
                [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                [(0, 1, 2, 3, 0.1), (3, 2, 1, 0, 0.1)],
            )

    def test_negative_rate_rejected(self):
        with pytest.raises(ParameterError):
            DiscreteVelocityModel([[1.0], [-1.0]], [(0, 0, 1, 1, -0.5)])

    def test_mapping_input(self):
        m = DiscreteVelocityModel([[1.0], [-1.0]], {(0, 0, 1, 1): 0.3})
        assert m.collision_rate(1, 1, 0, 0) == 0.3


class TestSourceJacobian:
    def test_first_row_analytic(self):
        m = build_coplanar(1.0, 0.1)
        jac = source_jacobian(m, [4.0, 3.0, 2.0, 6.0])
        np.testing.assert_allclose(jac[0], [-0.3, -0.4, 0.6, 0.2], atol=1e-15)

    def test_collisionless_model_zero(self):
        m = DiscreteVelocityModel([[1.0, 0.0], [-1.0, 0.0]])
        np.testing.assert_array_equal(source_jacobian(m, [1.0, 2.0]), np.zeros((2, 2)))

    def test_against_finite_differences(self):
        m = build_coplanar(1.0, 0.1)
        fe = np.array([4.0, 3.0, 2.0, 6.0])
        assert np.max(np.abs(source_jacobian(m, fe) - fd_jacobian(m, fe))) <= 1e-6


class TestOnsagerMatrix:
    def test_explicit_form_at_balanced_state(self):
        sigma = 0.1
        m = build_coplanar(1.0, sigma)
        fe = np.array([4.0, 3.0, 2.0, 6.0])
        v = np.array([1.0, 1.0, -1.0, -1.0])
        expected = sigma * 12.0 * np.outer(v, v)
        np.testing.assert_allclose(onsager_matrix(m, fe), expected, atol=1e-12)

    def test_collisionless_zero(self):
        m = DiscreteVelocityModel([[1.0], [-1.0]])
        np.testing.assert_array_equal(onsager_matrix(m, [1.0, 2.0]), np.zeros((2, 2)))

    def test_source_factorization_identity(self):
        m = build_coplanar(1.0, 0.1)
        f = np.array([1.0, 2.0, 3.0, 4.0])
        lhs = -onsager_matrix(m, f) @ np.log(f)
        np.testing.assert_allclose(lhs, source_term(m, f), atol=1e-12)

    def test_log_mean_degenerate_branch(self):
        assert log_mean(2.0, 2.0) == 2.0
        assert abs(log_mean(1.0, math.e) - (math.e - 1.0)) < 1e-14
        with pytest.raises(DomainError):
            log_mean(-1.0, 2.0)


class TestEntropy:
    def test_unit_state(self):
        m = build_coplanar(1.0, 0.1)
        f = [1.0, 1.0, 1.0, 1.0]
        assert entropy(m, f) == -4.0
        np.testing.assert_array_equal(entropy_gradient(m, f), np.zeros(4))
        np.testing.assert_array_equal(entropy_hessian(m, f), np.eye(4))

    def test_e_state(self):
        m = build_coplanar(1.0, 0.1)
        assert abs(entropy(m, [math.e] * 4)) < 1e-14

    def test_hessian_matches_inverse_state(self):
        m = build_coplanar(1.0, 0.1)
        np.testing.assert_allclose(
            entropy_hessian(m, [4.0, 3.0, 2.0, 6.0]),
            np.diag([0.25, 1.0 / 3.0, 0.5, 1.0 / 6.0]),
        )

    def test_rejects_nonpositive(self):
        m = build_coplanar(1.0, 0.1)
        with pytest.raises(DomainError):
            entropy(m, [1.0, -1.0, 1.0, 1.0])


class TestSteadyState:
    def test_balanced_state_is_steady(self):
        m = build_coplanar(1.0, 0.1)
        assert is_steady_state(m, [4.0, 3.0, 2.0, 6.0], 1e-12)
        assert is_steady_state(m, [1.0, 1.0, 1.0, 1.0], 1e-12)

    def test_unbalanced_state_is_not(self):
        m = build_coplanar(1.0, 0.1)
        assert not is_steady_state(m, [1.0, 2.0, 3.0, 4.0], 1e-12)

    def test_constructor_validates(self):
        m = build_coplanar(1.0, 0.1)
        fe = SteadyState(m, [4.0, 3.0, 2.0, 6.0])
        assert fe.residual <= 1e-12
        with pytest.raises(ModelError, match="max |Q.f.|".replace("|", r"\|")):
            SteadyState(m, [1.0, 2.0, 3.0, 4.0])
        with pytest.raises(DomainError):
            SteadyState(m, [1.0, 0.0, 1.0, 1.0])

    def test_negative_tolerance_rejected(self):
        m = build_coplanar(1.0, 0.1)
        with pytest.raises(ParameterError):
            is_steady_state(m, [1.0, 1.0, 1.0, 1.0], -1e-3)


class TestRandomizedProperties:
    """Structural identities on randomly generated models and states."""

    def test_mass_conservation(self):
        rng = np.random.default_rng(101)
        for _ in range(100):
            m = random_admissible_model(rng)
            f = random_positive_state(rng, m.n_species)
            assert abs(np.sum(source_term(m, f))) <= 1e-12

    def test_entropy_dissipation(self):
        rng = np.random.default_rng(202)
        for _ in range(100):
            m = random_admissible_model(rng)
            f = random_positive_state(rng, m.n_species)
            assert float(np.log(f) @ source_term(m, f)) <= 1e-12

    def test_onsager_identity_relative(self):
        rng = np.random.default_rng(303)
        for _ in range(100):
            m = random_admissible_model(rng)
            f = random_positive_state(rng, m.n_species)
            q = source_term(m, f)
            lhs = -onsager_matrix(m, f) @ np.log(f)
            assert np.max(np.abs(lhs - q)) <= 1e-10 * max(1.0, float(np.max(np.abs(q))))

    def test_null_space_is_state_independent(self):
        rng = np.random.default_rng(404)
        for _ in range(60):
            m = random_admissible_model(rng)
            fe = random_steady_state(rng, m)
            dissipation = onsager_matrix(m, fe.values)
            w, vecs = np.linalg.eigh(dissipation)
            null = vecs[:, np.abs(w) <= 1e-12 * max(1.0, np.max(np.abs(w)))]
            for _ in range(3):
                f = random_positive_state(rng, m.n_species)
                assert np.max(np.abs(onsager_matrix(m, f) @ null), initial=0.0) <= 1e-10

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(505)
        for _ in range(60):
            m = random_admissible_model(rng)
            f = random_positive_state(rng, m.n_species)
            assert np.max(np.abs(source_jacobian(m, f) - fd_jacobian(m, f))) <= 1e-6
