"""Node-based rectangular grids and trapezoidal quadrature helpers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError


def trapezoid_weights(count, spacing):
    """Composite trapezoid weights for ``count`` uniformly spaced nodes."""
    if count < 2:
        raise ParameterError(f"need at least 2 nodes for quadrature, got {count}")
    w = np.full(count, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


def tensor_weights(counts, spacings):
    """Outer product of 1-d trapezoid weights; shape ``counts``."""
    weights = np.ones(())
    for count, spacing in zip(counts, spacings):
        weights = np.multiply.outer(weights, trapezoid_weights(count, spacing))
    return weights


@dataclass(frozen=True)
class Grid:
    """Uniform node-based grid on an axis-aligned box (boundary nodes included)."""

    lower: tuple
    upper: tuple
    cells: tuple

    def __post_init__(self):
        lower = tuple(float(x) for x in self.lower)
        upper = tuple(float(x) for x in self.upper)
        cells = tuple(int(c) for c in self.cells)
        if not (len(lower) == len(upper) == len(cells)) or not lower:
            raise ParameterError("lower, upper and cells must have the same nonzero length")
        if any(not np.isfinite(a) or not np.isfinite(b) or a >= b for a, b in zip(lower, upper)):
            raise ParameterError("grid bounds must be finite with lower < upper")
        if any(c < 2 for c in cells):
            raise ParameterError(f"need at least 2 cells per axis, got {cells}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_domain(cls, domain, cells):
        return cls(tuple(domain.lower), tuple(domain.upper), tuple(cells))

    @property
    def dim(self):
        return len(self.cells)

    @property
    def nodes_per_axis(self):
        return tuple(c + 1 for c in self.cells)

    @property
    def spacings(self):
        return tuple((u - l) / c for l, u, c in zip(self.lower, self.upper, self.cells))

    @cached_property
    def axis_nodes(self):
        """Per-axis node coordinate arrays (read-only)."""
        nodes = []
        for l, u, c in zip(self.lower, self.upper, self.cells):
            arr = np.linspace(l, u, c + 1)
            arr.setflags(write=False)
            nodes.append(arr)
        return tuple(nodes)

    @cached_property
    def node_weights(self):
        """Trapezoid quadrature weights over all nodes (read-only)."""
        w = tensor_weights(self.nodes_per_axis, self.spacings)
        w.setflags(write=False)
        return w
