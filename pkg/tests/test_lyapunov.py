import math

import numpy as np
import pytest

from kinbc import (
    BoxDomain,
    DiscreteVelocityModel,
    EnergyQuadrature,
    Grid,
    SteadyState,
    build_certificate,
    build_coplanar,
    decay_constants,
    decompose,
    select_alpha,
    weight_extrema,
    weight_matrix,
    weighted_energy,
)
from kinbc.errors import CertificateError, ParameterError
from kinbc.lyapunov import ALPHA_FLOOR

FE = [4.0, 3.0, 2.0, 6.0]


def planar_setup():
    model = build_coplanar(1.0, 0.1)
    fe = SteadyState(model, FE)
    domain = BoxDomain([0.0, 0.0], [1.0, 1.0])
    return model, fe, domain


class TestWeightMatrix:
    def test_origin_without_state_weight(self):
        model, fe, _ = planar_setup()
        np.testing.assert_array_equal(weight_matrix(model, fe, 0.0, [0.0, 0.0]), np.eye(4))

    def test_transport_weights_are_tilted_exponentials(self):
        model, fe, _ = planar_setup()
        x, y = 0.3, 0.8
        w = weight_matrix(model, fe, 0.0, [x, y])
        expected = np.diag([math.exp(-x), math.exp(x), math.exp(-y), math.exp(y)])
        np.testing.assert_allclose(w, expected, rtol=1e-15)

    def test_far_corner_with_state_weight(self):
        model, fe, _ = planar_setup()
        w = weight_matrix(model, fe, 1.0, [1.0, 1.0])
        expected = np.diag(
            [
                0.25 + math.exp(-1.0),
                1.0 / 3.0 + math.e,
                0.5 + math.exp(-1.0),
                1.0 / 6.0 + math.e,
            ]
        )
        np.testing.assert_allclose(w, expected, rtol=1e-15)


class TestWeightedEnergy:
    def test_zero_field(self):
        model, fe, domain = planar_setup()
        grid = Grid.from_domain(domain, (16, 16))
        assert weighted_energy(np.zeros((4, 17, 17)), model, fe, 1.0, grid) == 0.0

    def test_constant_field_closed_form(self):
        # with no state weight each species integrates its own tilted
        # exponential: (1 - 1/e) for rightward/upward, (e - 1) for the others
        model, fe, domain = planar_setup()
        grid = Grid.from_domain(domain, (512, 512))
        c = np.array([0.7, -0.4, 1.1, 0.25])
        field = np.broadcast_to(c[:, None, None], (4, 513, 513)).copy()
        got = weighted_energy(field, model, fe, 0.0, grid)
        lo, hi = 1.0 - math.exp(-1.0), math.e - 1.0
        expected = c[0] ** 2 * lo + c[1] ** 2 * hi + c[2] ** 2 * lo + c[3] ** 2 * hi
        assert abs(got - expected) <= 1e-6

    def test_norm_equivalence_sandwich(self):
        model, fe, domain = planar_setup()
        grid = Grid.from_domain(domain, (24, 24))
        alpha = 2.5
        quad = EnergyQuadrature(model, fe, alpha, grid)
        w_min, w_max = weight_extrema(model, fe, alpha, domain)
        rng = np.random.default_rng(99)
        for _ in range(1000):
            field = rng.normal(size=(4, 25, 25))
            energy = quad.functional(field)
            norm_sq = quad.l2_norm(field) ** 2
            assert w_min * norm_sq - 1e-12 <= energy <= w_max * norm_sq + 1e-12


class TestDecayConstants:
    def test_planar_relaxation_rate(self):
        model, fe, domain = planar_setup()
        lam, c1, c2 = decay_constants(model, fe, domain, decompose(model, fe))
        assert abs(lam - 1.5) <= 1e-12
        assert c1 > 0.0
        assert c2 > 0.0

    def test_coercivity_mesh_independent(self):
        model, fe, domain = planar_setup()
        dec = decompose(model, fe)
        _, c1_coarse, _ = decay_constants(model, fe, domain, dec, samples_per_axis=8)
        _, c1_fine, _ = decay_constants(model, fe, domain, dec, samples_per_axis=32)
        assert abs(c1_coarse - c1_fine) <= 0.01 * c1_fine

    def test_collisionless_degenerate(self):
        model = DiscreteVelocityModel([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        domain = BoxDomain([0.0, 0.0], [1.0, 1.0])
        fe = [1.0, 2.0, 3.0, 4.0]
        dec = decompose(model, fe)
        lam, c1, c2 = decay_constants(model, fe, domain, dec)
        assert lam == 0.0 and c2 == 0.0 and c1 > 0.0
        cert = build_certificate(model, fe, domain, dec)
        assert cert.alpha == pytest.approx(ALPHA_FLOOR * 1.1)
        assert cert.decay_rate > 0.0


class TestSelectAlpha:
    def test_dominated_coupling_returns_floor(self):
        assert select_alpha(1.5, 2.0, 1.0, margin=0.1) == ALPHA_FLOOR * 1.1

    def test_arithmetic_case(self):
        margin = 0.1
        assert select_alpha(1.5, 1.0, 4.0, margin) == pytest.approx(1.0 + margin)

    def test_no_relaxation_raises(self):
        with pytest.raises(CertificateError):
            select_alpha(0.0, 1.0, 4.0)

    def test_bad_margin(self):
        with pytest.raises(ParameterError):
            select_alpha(1.0, 1.0, 2.0, margin=0.0)


class TestCertificate:
    def test_auto_alpha_is_strictly_dissipative(self):
        model, fe, domain = planar_setup()
        cert = build_certificate(model, fe, domain)
        assert cert.valid and cert.decay_rate > 0.0
        assert (
            2.0 * cert.min_relaxation * cert.alpha
            - cert.coupling_bound
            + cert.transport_coercivity
            > 0.0
        )
        assert 0.0 < cert.weight_min <= cert.weight_max
        assert cert.overshoot == pytest.approx(math.sqrt(cert.weight_max / cert.weight_min))

    def test_small_alpha_rejected_when_strict(self):
        model, fe, domain = planar_setup()
        with pytest.raises(CertificateError):
            build_certificate(model, fe, domain, alpha=1e-4)
        cert = build_certificate(model, fe, domain, alpha=1e-4, strict=False)
        assert not cert.valid

    def test_weights_monotone_in_alpha(self):
        model, fe, domain = planar_setup()
        prev_min, prev_max = weight_extrema(model, fe, 0.5, domain)
        for alpha in (1.0, 2.0, 8.0):
            w_min, w_max = weight_extrema(model, fe, alpha, domain)
            assert w_min > prev_min and w_max > prev_max
            prev_min, prev_max = w_min, w_max

    def test_weight_extrema_are_exact_corner_values(self):
        model, fe, domain = planar_setup()
        alpha = 1.0
        w_min, w_max = weight_extrema(model, fe, alpha, domain)
        corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        values = []
        for x in corners:
            values.extend(np.diag(weight_matrix(model, fe, alpha, x)))
        assert w_min == pytest.approx(min(values), abs=0.0)
        assert w_max == pytest.approx(max(values), abs=0.0)
