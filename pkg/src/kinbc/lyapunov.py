"""Weighted energy functional and the exponential decay certificate.

The certificate combines an entropy-weighted energy (weight ``alpha`` per
unit of ``diag(1/f_e)``) with an exponentially tilted transport energy.
Its constants are the slowest relaxation rate, a transport coercivity
floor, and a coupling bound obtained from a Young-inequality split; a
large enough ``alpha`` makes the net interior dissipation strictly
negative, and the certified decay rate follows from the weight extrema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import CertificateError, ParameterError
from .model import steady_values
from .stability import decompose, eigh_symmetric

ALPHA_FLOOR = 1e-6
DEFAULT_MARGIN = 0.1
DEFAULT_SAMPLES_PER_AXIS = 8


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and alpha >= 0.0):
        raise ParameterError(f"alpha must be finite and nonnegative, got {alpha}")


def exp_weight(model, x):
    """Per-species transport weight ``exp(-u_i . x)`` at one point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.dim:
        raise ParameterError(f"point has {x.size} coordinates, expected {model.dim}")
    return np.exp(-model.velocities @ x)


def weight_matrix(model, f_e, alpha, x):
    """Diagonal weight ``diag(alpha/fe_i + exp(-u_i . x))`` of the functional."""
    _check_alpha(alpha)
    fe = steady_values(f_e, model.n_species)
    return np.diag(alpha / fe + exp_weight(model, x))


class EnergyQuadrature:
    """Trapezoidal quadrature of the plain and weighted energies on a grid.

    Precomputes the node quadrature weights and the per-species weight
    field once, so repeated evaluation along a simulation is cheap.
    """

    def __init__(self, model, f_e, alpha, grid):
        _check_alpha(alpha)
        fe = steady_values(f_e, model.n_species)
        if grid.dim != model.dim:
            raise ParameterError("grid dimension does not match the model")
        self.grid = grid
        quad = grid.node_weights
        exp_fields = []
        for k in range(model.n_species):
            u = model.velocities[k]
            factors = [np.exp(-u[j] * grid.axis_nodes[j]) for j in range(grid.dim)]
            exp_fields.append(reduce(np.multiply.outer, factors))
        exp_fields = np.stack(exp_fields)
        self._quad = quad
        self._weighted = quad[None] * ((alpha / fe).reshape((-1,) + (1,) * grid.dim) + exp_fields)

    def _check_field(self, field):
        field = np.asarray(field, dtype=float)
        if field.shape != (self._weighted.shape[0],) + self.grid.nodes_per_axis:
            raise ParameterError(
                f"field shape {field.shape} does not match (n_species, *grid nodes)"
            )
        return field

    def l2_norm(self, field):
        field = self._check_field(field)
        return math.sqrt(float(np.sum(self._quad[None] * field**2)))

    def species_norms(self, field):
        field = self._check_field(field)
        sums = np.sum(self._quad[None] * field**2, axis=tuple(range(1, field.ndim)))
        return np.sqrt(sums)

    def functional(self, field):
        field = self._check_field(field)
        return float(np.sum(self._weighted * field**2))

    def record(self, field):
        """(l2_norm, species_norms, functional) sharing one squared-field pass."""
        field = self._check_field(field)
        sq = field * field
        per_species = np.sum(self._quad[None] * sq, axis=tuple(range(1, sq.ndim)))
        l2 = math.sqrt(float(np.sum(per_species)))
        return l2, np.sqrt(per_species), float(np.sum(self._weighted * sq))


def weighted_energy(field, model, f_e, alpha, grid):
    """The weighted energy functional of a nodal field (one-off convenience)."""
    return EnergyQuadrature(model, f_e, alpha, grid).functional(field)


def sample_points(domain, samples_per_axis=DEFAULT_SAMPLES_PER_AXIS):
    """Closed-box sample lattice (corners included) for the constant scans."""
    grids = np.meshgrid(
        *[np.linspace(lo, hi, samples_per_axis) for lo, hi in zip(domain.lower, domain.upper)],
        indexing="ij",
    )
    return np.stack([g.ravel() for g in grids], axis=1)


def _sym_operator_norm(matrix):
    if matrix.size == 0:
        return 0.0
    w, _ = eigh_symmetric(matrix)
    return float(np.max(np.abs(w)))


def _operator_norm(matrix):
    if matrix.size == 0:
        return 0.0
    gram = matrix.T @ matrix
    w, _ = eigh_symmetric(gram)
    return math.sqrt(max(float(w[-1]), 0.0))


def decay_constants(model, f_e, domain, decomposition, samples_per_axis=DEFAULT_SAMPLES_PER_AXIS):
    """Certificate constants ``(min_relaxation, transport_coercivity, coupling_bound)``.

    The coercivity floor is the smallest eigenvalue over the sample
    lattice of ``Pinv^T (sum_j U_j^2) exp(-sum_j U_j x_j) Pinv``; the
    coupling bound is the Young-split constant
    ``2 |mu_12 R|^2 / c1 + |mu_22 R + R mu_22|`` maximized over the same
    lattice, with ``mu = Pinv^T exp(...) Pinv`` and ``R`` the relaxation
    block.  Sampled extrema, not proven bounds: pair with the refinement
    check in the tests.
    """
    fe = steady_values(f_e, model.n_species)
    del fe  # validated; constants depend on f_e only through the decomposition
    if domain.dim != model.dim:
        raise ParameterError("domain dimension does not match the model")
    points = sample_points(domain, samples_per_axis)
    p_inv = decomposition.transform_inv
    n = decomposition.n_species
    r = decomposition.rank
    usq = np.sum(model.velocities**2, axis=1)
    rates = np.diag(decomposition.relaxation_rates) if r else np.zeros((0, 0))

    c1 = math.inf
    c2 = 0.0
    for x in points:
        e = np.exp(-model.velocities @ x)
        coercive = p_inv.T @ np.diag(usq * e) @ p_inv
        w, _ = eigh_symmetric(coercive)
        c1 = min(c1, float(w[0]))
        mu = p_inv.T @ np.diag(e) @ p_inv
        mu12 = mu[: n - r, n - r :]
        mu22 = mu[n - r :, n - r :]
        candidate = _sym_operator_norm(mu22 @ rates + rates @ mu22)
        if n - r:
            candidate += 2.0 * _operator_norm(mu12 @ rates) ** 2 / c1
        c2 = max(c2, candidate)
    lam = float(np.min(decomposition.relaxation_rates)) if r else 0.0
    return lam, c1, c2


def select_alpha(min_relaxation, transport_coercivity, coupling_bound, margin=DEFAULT_MARGIN):
    """Smallest safe weight (plus a relative margin) making dissipation strict.

    Guarantees ``2 * lam * alpha - c2 + c1 > 0``.  When the coupling bound
    is already dominated any positive alpha works and the floor is
    returned; without relaxation (rank 0) that condition cannot be bought
    with alpha, so a positive requirement raises.
    """
    if margin <= 0.0:
        raise ParameterError(f"margin must be positive, got {margin}")
    if coupling_bound <= transport_coercivity:
        return ALPHA_FLOOR * (1.0 + margin)
    if min_relaxation <= 0.0:
        raise CertificateError(
            "no relaxation modes: the weighted certificate cannot absorb the coupling bound; "
            "use the transport-only functional"
        )
    return max(ALPHA_FLOOR, (coupling_bound - transport_coercivity) / (2.0 * min_relaxation)) * (
        1.0 + margin
    )


def weight_extrema(model, f_e, alpha, domain):
    """Extreme eigenvalues of the diagonal weight over the closed box.

    The weight entries are monotone exponentials per coordinate, so the
    entrywise extrema sit at box corners and the scan is exact.
    """
    _check_alpha(alpha)
    fe = steady_values(f_e, model.n_species)
    corners = domain.corners()
    values = alpha / fe[None, :] + np.exp(-corners @ model.velocities.T)
    return float(np.min(values)), float(np.max(values))


@dataclass(frozen=True)
class LyapunovCertificate:
    """Computable exponential-decay certificate for an admissible closure."""

    alpha: float
    min_relaxation: float
    transport_coercivity: float
    coupling_bound: float
    weight_min: float
    weight_max: float
    decay_rate: float

    @property
    def dissipation_margin(self):
        """min(2*lam*alpha - c2 + c1, c1/2): interior dissipation per unit energy."""
        return min(
            2.0 * self.min_relaxation * self.alpha - self.coupling_bound + self.transport_coercivity,
            0.5 * self.transport_coercivity,
        )

    @property
    def overshoot(self):
        """Norm overshoot factor sqrt(weight_max / weight_min)."""
        return math.sqrt(self.weight_max / self.weight_min)

    @property
    def valid(self):
        return self.decay_rate > 0.0


def build_certificate(
    model,
    f_e,
    domain,
    decomposition=None,
    alpha="auto",
    margin=DEFAULT_MARGIN,
    samples_per_axis=DEFAULT_SAMPLES_PER_AXIS,
    strict=True,
):
    """Assemble the full decay certificate, selecting alpha when asked.

    With ``strict`` a nonpositive certified rate raises ``CertificateError``
    (an explicitly chosen alpha can be too small); otherwise the
    certificate is returned with its nonpositive rate for inspection.
    """
    if decomposition is None:
        decomposition = decompose(model, f_e)
    lam, c1, c2 = decay_constants(model, f_e, domain, decomposition, samples_per_axis)
    if isinstance(alpha, str):
        if alpha != "auto":
            raise ParameterError(f"alpha must be a number or 'auto', got {alpha!r}")
        alpha_value = select_alpha(lam, c1, c2, margin)
    else:
        alpha_value = float(alpha)
        if not (math.isfinite(alpha_value) and alpha_value > 0.0):
            raise ParameterError(f"alpha must be positive and finite, got {alpha_value}")
    w_min, w_max = weight_extrema(model, f_e, alpha_value, domain)
    dissipation = min(2.0 * lam * alpha_value - c2 + c1, 0.5 * c1)
    certificate = LyapunovCertificate(
        alpha=alpha_value,
        min_relaxation=lam,
        transport_coercivity=c1,
        coupling_bound=c2,
        weight_min=w_min,
        weight_max=w_max,
        decay_rate=dissipation / w_max,
    )
    if strict and not certificate.valid:
        raise CertificateError(
            f"alpha = {alpha_value:g} is too small: interior dissipation margin "
            f"{dissipation:.6g} is not positive (needs alpha > "
            f"{(c2 - c1) / (2 * lam) if lam > 0 else math.inf:.6g})"
        )
    return certificate
