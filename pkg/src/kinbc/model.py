"""Discrete-velocity kinetic models and their collision algebra.

A model is a finite set of particle velocities together with binary
collision channels.  Each channel exchanges one unordered particle pair
with another at a symmetric nonnegative rate, so the quadratic source
term conserves mass and dissipates the entropy
``sum_k f_k (log f_k - 1)``.  The source factors as
``Q(f) = -L(f) log f`` with ``L(f)`` symmetric positive semi-definite
and a state-independent null space; that factorization is what the
stability and certificate machinery downstream relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModelError, ParameterError

DEFAULT_STEADY_TOL = 1e-10

# Relative gap below which the logarithmic mean falls back to the
# arithmetic mean; avoids cancellation in (a - b) / (log a - log b).
_LOG_MEAN_DEGENERATE = 1e-12


def log_mean(a, b):
    """Logarithmic mean ``(a - b) / (log a - log b)`` of two positive numbers."""
    if a <= 0.0 or b <= 0.0:
        raise DomainError("log_mean requires positive arguments")
    if abs(a - b) < _LOG_MEAN_DEGENERATE * max(a, b):
        return 0.5 * (a + b)
    return (a - b) / (math.log(a) - math.log(b))


def _positive_vector(values, n=None, what="state"):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{what} must be a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.size != n:
        raise DomainError(f"{what} has {arr.size} components, expected {n}")
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0.0):
        raise DomainError(f"{what} must have finite, strictly positive components")
    return arr


def _canonical_key(i, j, k, l):
    first = (min(i, j), max(i, j))
    second = (min(k, l), max(k, l))
    return (first, second) if first <= second else (second, first)


@dataclass(frozen=True)
class CollisionChannel:
    """One collision family: pair ``a`` exchanges with pair ``b`` at ``rate``."""

    pair_a: tuple[int, int]
    pair_b: tuple[int, int]
    rate: float

    def balance_vector(self, n_species):
        """Production direction: +1 per particle of pair ``b``, -1 per pair ``a``."""
        w = np.zeros(n_species)
        w[self.pair_b[0]] += 1.0
        w[self.pair_b[1]] += 1.0
        w[self.pair_a[0]] -= 1.0
        w[self.pair_a[1]] -= 1.0
        return w


class DiscreteVelocityModel:
    """Immutable discrete-velocity model.

    Parameters
    ----------
    velocities : array_like, shape (n, d)
        One nonzero velocity vector per species.  Zero velocities are
        rejected: the transport estimates need every particle to move.
    collisions : iterable or mapping, optional
        Collision statements ``(i, j, k, l, rate)`` (or a mapping from
        ``(i, j, k, l)`` to rate) with 0-based species indices meaning
        that pair ``(i, j)`` exchanges with pair ``(k, l)``.  Both pairs
        are unordered and interchangeable; the symmetry closure is
        applied automatically, so state each family exactly once.
    """

    def __init__(self, velocities, collisions=()):
        v = np.array(velocities, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ParameterError(f"velocities must be a nonempty (n, d) array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("velocities must be finite")
        zero_rows = np.flatnonzero(~np.any(v != 0.0, axis=1))
        if zero_rows.size:
            raise ParameterError(
                f"species {zero_rows[0]} has the zero velocity vector; "
                "every discrete velocity must be nonzero"
            )
        v.setflags(write=False)
        self._velocities = v

        if hasattr(collisions, "items"):
            statements = [(i, j, k, l, rate) for (i, j, k, l), rate in collisions.items()]
        else:
            statements = [tuple(entry) for entry in collisions]

        n = v.shape[0]
        channels = []
        seen = set()
        for entry in statements:
            if len(entry) != 5:
                raise ParameterError(f"collision statement must be (i, j, k, l, rate), got {entry!r}")
            i, j, k, l = (int(x) for x in entry[:4])
            rate = float(entry[4])
            for idx in (i, j, k, l):
                if not 0 <= idx < n:
                    raise ParameterError(f"collision index {idx} out of range for {n} species")
            if not math.isfinite(rate) or rate < 0.0:
                raise ParameterError(f"collision rate must be finite and nonnegative, got {rate}")
            key = _canonical_key(i, j, k, l)
            if key in seen:
                raise ParameterError(
                    f"collision family {key} stated more than once; state each family exactly once"
                )
            seen.add(key)
            channels.append(CollisionChannel(key[0], key[1], rate))
        self._channels = tuple(channels)

        m = len(channels)
        self._pairs_a = np.array([c.pair_a for c in channels], dtype=int).reshape(m, 2)
        self._pairs_b = np.array([c.pair_b for c in channels], dtype=int).reshape(m, 2)
        self._rates = np.array([c.rate for c in channels], dtype=float)
        self._balances = (
            np.array([c.balance_vector(n) for c in channels]).reshape(m, n)
            if m
            else np.zeros((0, n))
        )

    @property
    def n_species(self):
        return self._velocities.shape[0]

    @property
    def dim(self):
        return self._velocities.shape[1]

    @property
    def velocities(self):
        """(n, d) read-only velocity array."""
        return self._velocities

    @property
    def channels(self):
        return self._channels

    def transport_diagonal(self, axis):
        """Diagonal of the transport matrix along ``axis``: the axis components of all velocities."""
        if not 0 <= axis < self.dim:
            raise ParameterError(f"axis {axis} out of range for dimension {self.dim}")
        return np.array(self._velocities[:, axis])

    def collision_rate(self, i, j, k, l):
        """Closed transition rate for any index ordering of a stated family (0 if absent)."""
        key = _canonical_key(int(i), int(j), int(k), int(l))
        for channel in self._channels:
            if (channel.pair_a, channel.pair_b) == key:
                return channel.rate
        return 0.0

    def __repr__(self):
        return (
            f"DiscreteVelocityModel(n_species={self.n_species}, dim={self.dim}, "
            f"channels={len(self._channels)})"
        )


def build_coplanar(U, sigma):
    """Four-velocity planar model with one head-on collision channel.

    Velocities ``(U, 0), (-U, 0), (0, U), (0, -U)``; the horizontal pair
    exchanges with the vertical pair at rate ``sigma``, so
    ``Q(f) = sigma * (f3*f4 - f1*f2) * (1, 1, -1, -1)`` (1-based indices).
    """
    if not (math.isfinite(U) and U > 0.0):
        raise ParameterError(f"speed U must be positive and finite, got {U}")
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ParameterError(f"collision rate sigma must be positive and finite, got {sigma}")
    velocities = [[U, 0.0], [-U, 0.0], [0.0, U], [0.0, -U]]
    return DiscreteVelocityModel(velocities, [(0, 1, 2, 3, sigma)])


def _pair_products(f, pairs):
    return f[pairs[:, 0]] * f[pairs[:, 1]]


def source_term(model, f):
    """Collision source ``Q(f)`` for a strictly positive state ``f``."""
    f = _positive_vector(f, model.n_species)
    if not model.channels:
        return np.zeros(model.n_species)
    pa = _pair_products(f, model._pairs_a)
    pb = _pair_products(f, model._pairs_b)
    return (model._rates * (pa - pb)) @ model._balances


def source_jacobian(model, f_e):
    """Analytic Jacobian of the collision source at a positive state.

    At a validated steady state this equals ``-L(f_e) @ diag(1/f_e)``,
    which is what the block decomposition downstream verifies.
    """
    fe = steady_values(f_e, model.n_species)
    n = model.n_species
    m = len(model.channels)
    if m == 0:
        return np.zeros((n, n))
    rows = np.arange(m)
    dpa = np.zeros((m, n))
    np.add.at(dpa, (rows, model._pairs_a[:, 0]), fe[model._pairs_a[:, 1]])
    np.add.at(dpa, (rows, model._pairs_a[:, 1]), fe[model._pairs_a[:, 0]])
    dpb = np.zeros((m, n))
    np.add.at(dpb, (rows, model._pairs_b[:, 0]), fe[model._pairs_b[:, 1]])
    np.add.at(dpb, (rows, model._pairs_b[:, 1]), fe[model._pairs_b[:, 0]])
    return (model._rates[:, None] * model._balances).T @ (dpa - dpb)


def onsager_matrix(model, f):
    """Symmetric PSD matrix ``L(f)`` with ``Q(f) = -L(f) @ log(f)``.

    Built channel by channel as ``rate * logmean(prod_a, prod_b) * w w^T``
    where ``w`` is the channel balance vector; the logarithmic mean makes
    the factorization exact and keeps the null space state-independent.
    """
    f = _positive_vector(f, model.n_species)
    n = model.n_species
    if not model.channels:
        return np.zeros((n, n))
    pa = _pair_products(f, model._pairs_a)
    pb = _pair_products(f, model._pairs_b)
    phi = np.array([log_mean(x, y) for x, y in zip(pa, pb)])
    return (model._rates * phi * model._balances.T) @ model._balances


def entropy(model, f):
    """Entropy ``sum_k f_k (log f_k - 1)``."""
    f = _positive_vector(f, model.n_species)
    return float(np.sum(f * (np.log(f) - 1.0)))


def entropy_gradient(model, f):
    f = _positive_vector(f, model.n_species)
    return np.log(f)


def entropy_hessian(model, f):
    """Diagonal entropy Hessian ``diag(1/f_k)``."""
    f = _positive_vector(f, model.n_species)
    return np.diag(1.0 / f)


def is_steady_state(model, f, tol=DEFAULT_STEADY_TOL):
    """True iff ``max |Q(f)| <= tol``."""
    if tol < 0.0:
        raise ParameterError(f"tolerance must be nonnegative, got {tol}")
    return bool(np.max(np.abs(source_term(model, f)), initial=0.0) <= tol)


class SteadyState:
    """A validated uniform steady state: strictly positive with vanishing source."""

    def __init__(self, model, values, tol=DEFAULT_STEADY_TOL):
        if tol < 0.0:
            raise ParameterError(f"tolerance must be nonnegative, got {tol}")
        arr = _positive_vector(values, model.n_species, what="steady state")
        residual = float(np.max(np.abs(source_term(model, arr)), initial=0.0))
        if residual > tol:
            raise ModelError(
                f"not a steady state: max |Q(f)| = {residual:.3e} exceeds tolerance {tol:.1e}"
            )
        arr.setflags(write=False)
        self.values = arr
        self.residual = residual
        self.tolerance = tol

    @property
    def n_species(self):
        return self.values.size

    def __repr__(self):
        return f"SteadyState({self.values.tolist()}, residual={self.residual:.2e})"


def steady_values(f_e, n=None):
    """Accept a ``SteadyState`` or a raw positive vector; return the array."""
    if isinstance(f_e, SteadyState):
        arr = f_e.values
        if n is not None and arr.size != n:
            raise DomainError(f"steady state has {arr.size} components, expected {n}")
        return arr
    return _positive_vector(f_e, n, what="steady state")
