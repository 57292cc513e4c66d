"""Dissipation-structure decomposition of the linearized collision source.

Conjugating the Onsager matrix at a steady state with the square root of
the entropy Hessian gives a symmetric eigenproblem whose positive
eigenvalues are the relaxation rates.  The eigenbasis builds an
invertible transform that block-diagonalizes the source Jacobian into a
conserved block (zeros) and a dissipated block, in both the similarity
and the entropy-weighted sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NumericalError, ParameterError
from .model import onsager_matrix, source_jacobian, steady_values

JACOBI_OFF_THRESHOLD = 1e-14
JACOBI_MAX_SWEEPS = 100

# Eigenvalues above max(SPLIT_FLOOR, SPLIT_REL * largest) count as dissipated modes.
SPLIT_REL = 1e-9
SPLIT_FLOOR = 1e-14

_SYMMETRY_TOL = 1e-12
_PSD_FLOOR = -1e-12


def eigh_symmetric(matrix, *, off_threshold=JACOBI_OFF_THRESHOLD, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigendecompose a small symmetric matrix with cyclic Jacobi rotations.

    Returns ``(eigenvalues, basis)`` with eigenvalues ascending and the
    *rows* of ``basis`` orthonormal eigenvectors, i.e.
    ``matrix == basis.T @ np.diag(eigenvalues) @ basis``.

    Dependency-free and bit-stable; intended for the small (n <= dozens)
    matrices this package works with.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {a.shape}")
    scale = float(np.max(np.abs(a), initial=0.0))
    if float(np.max(np.abs(a - a.T), initial=0.0)) > _SYMMETRY_TOL * max(1.0, scale):
        raise ParameterError("matrix is not symmetric within tolerance")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    fro = float(np.linalg.norm(a))

    converged = False
    off_entries = np.empty_like(a)
    for _ in range(max_sweeps):
        np.copyto(off_entries, a)
        np.fill_diagonal(off_entries, 0.0)
        off = float(np.linalg.norm(off_entries))
        if off <= off_threshold * max(fro, 1.0e-300):
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Entries already far below the convergence target cannot be
                # rotated stably (tau overflows); zeroing them perturbs the
                # spectrum by less than the off-diagonal threshold.
                if abs(apq) <= 1e-3 * off_threshold * max(fro, 1.0e-300) / n:
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1.0e8:
                    t = 0.5 / tau
                else:
                    t = 1.0 / (tau + math.copysign(math.sqrt(1.0 + tau * tau), tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p = v[:, p].copy()
                v[:, p] = c * vec_p - s * v[:, q]
                v[:, q] = s * vec_p + c * v[:, q]
    if not converged:
        raise NumericalError(f"Jacobi eigensolver did not converge within {max_sweeps} sweeps")

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order].T


def inverse_state_matrix(f_e):
    """Diagonal matrix with entries ``1/f_e_i`` (the entropy Hessian at ``f_e``)."""
    fe = steady_values(f_e)
    return np.diag(1.0 / fe)


@dataclass(frozen=True)
class StabilityDecomposition:
    """Block decomposition of the source Jacobian at a steady state.

    ``transform @ J @ transform_inv == -blockdiag(0, diag(relaxation_rates))``
    and ``state_weights @ J == -transform.T @ blockdiag(...) @ transform``,
    with ``state_weights = diag(1/f_e)`` and ``rank`` dissipated modes.
    """

    transform: np.ndarray
    transform_inv: np.ndarray
    state_weights: np.ndarray
    relaxation_rates: np.ndarray
    rank: int

    @property
    def n_species(self):
        return self.transform.shape[0]

    def block_matrix(self):
        """Full ``blockdiag(0_{n-r}, diag(relaxation_rates))``."""
        n = self.n_species
        block = np.zeros((n, n))
        r = self.rank
        if r:
            block[n - r :, n - r :] = np.diag(self.relaxation_rates)
        return block


def decompose(model, f_e):
    """Build the stability decomposition at a validated steady state.

    The conjugated Onsager matrix ``D^{1/2} L(f_e) D^{1/2}`` with
    ``D = diag(1/f_e)`` is eigendecomposed; zero modes come first, and
    the strictly positive eigenvalues become the relaxation rates.
    """
    fe = steady_values(f_e, model.n_species)
    dissipation = onsager_matrix(model, fe)
    half_weights = 1.0 / np.sqrt(fe)
    conjugated = half_weights[:, None] * dissipation * half_weights[None, :]
    eigenvalues, basis = eigh_symmetric(conjugated)

    if eigenvalues.size and eigenvalues[0] < _PSD_FLOOR:
        raise ModelError(
            f"dissipation matrix is not positive semi-definite: eigenvalue {eigenvalues[0]:.3e}"
        )
    threshold = max(SPLIT_FLOOR, SPLIT_REL * float(eigenvalues[-1]) if eigenvalues.size else 0.0)
    rank = int(np.count_nonzero(eigenvalues > threshold))

    transform = basis @ np.diag(half_weights)
    transform_inv = np.diag(1.0 / half_weights) @ basis.T
    rates = eigenvalues[eigenvalues.size - rank :].copy() if rank else np.zeros(0)
    return StabilityDecomposition(
        transform=transform,
        transform_inv=transform_inv,
        state_weights=np.diag(1.0 / fe),
        relaxation_rates=rates,
        rank=rank,
    )


def decomposition_residuals(decomposition, model, f_e):
    """Max-abs residuals of the two defining identities of the decomposition.

    Returns ``(similarity_residual, weighted_residual)`` for
    ``P J P^{-1} + B`` and ``D J + P^T B P`` respectively, where ``B`` is
    the block matrix, ``P`` the transform and ``D = diag(1/f_e)``.
    """
    fe = steady_values(f_e, model.n_species)
    jac = source_jacobian(model, fe)
    block = decomposition.block_matrix()
    p = decomposition.transform
    p_inv = decomposition.transform_inv
    similarity = p @ jac @ p_inv + block
    weighted = decomposition.state_weights @ jac + p.T @ block @ p
    res_sim = float(np.max(np.abs(similarity), initial=0.0))
    res_weighted = float(np.max(np.abs(weighted), initial=0.0))
    return res_sim, res_weighted
