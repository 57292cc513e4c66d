"""Shared generators for randomized property tests (all explicitly seeded)."""

import numpy as np

from kinbc import DiscreteVelocityModel, SteadyState


def random_admissible_model(rng, max_dim=3, max_species=6, max_channels=4):
    """Random nonzero velocities plus a handful of symmetric collision channels."""
    d = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(2, max_species + 1))
    while True:
        v = rng.uniform(-2.0, 2.0, size=(n, d))
        if np.all(np.max(np.abs(v), axis=1) > 0.1):
            break
    collisions = []
    seen = set()
    for _ in range(int(rng.integers(0, max_channels + 1))):
        i, j, k, l = (int(x) for x in rng.integers(0, n, size=4))
        first = (min(i, j), max(i, j))
        second = (min(k, l), max(k, l))
        key = (first, second) if first <= second else (second, first)
        if key in seen:
            continue
        seen.add(key)
        collisions.append((i, j, k, l, float(rng.uniform(0.05, 1.0))))
    return DiscreteVelocityModel(v, collisions)


def random_positive_state(rng, n, spread=1.0):
    return np.exp(rng.uniform(-spread, spread, size=n))


def random_steady_state(rng, model):
    """Random steady state: log-state projected onto the channel-balance kernel."""
    n = model.n_species
    balances = np.array(
        [c.balance_vector(n) for c in model.channels if c.rate > 0.0]
    ).reshape(-1, n)
    balances = balances[np.any(balances != 0.0, axis=1)]
    y = rng.uniform(-0.8, 0.8, size=n)
    if balances.size:
        _, s, vt = np.linalg.svd(balances, full_matrices=False)
        basis = vt[s > 1e-12 * s[0]]
        y = y - basis.T @ (basis @ y)
    return SteadyState(model, np.exp(y))
