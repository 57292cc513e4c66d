"""Explicit first-order upwind integrator with control-law boundary closure.

Node-based grid: boundary values are explicit states.  Each step applies
the transport + linearized-source update everywhere the upwind stencil
exists, then overwrites every incoming boundary node from the control
law evaluated on the just-updated outgoing traces.  Characteristic
species at a face simply have no transport term along that axis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .boundary import apply_law_to_traces, validate_law
from .errors import CFLError, DivergenceError, ParameterError
from .grid import tensor_weights
from .lyapunov import EnergyQuadrature
from .model import source_jacobian, steady_values

_CFL_SLACK = 1e-12


@dataclass(frozen=True)
class SimulationState:
    t: float
    field: np.ndarray
    step: int


@dataclass
class RunRecord:
    """Recorded time series plus the final state of one simulation."""

    times: np.ndarray
    l2_norm: np.ndarray
    lyapunov: np.ndarray
    boundary_form: np.ndarray
    species_norms: np.ndarray
    final_state: SimulationState
    steps: int
    wall_time: float

    @property
    def n_records(self):
        return self.times.size


def cfl_number(model, grid, dt):
    """max over species of sum_j |u_kj| * dt / dx_j."""
    if dt < 0.0 or not np.isfinite(dt):
        raise ParameterError(f"dt must be nonnegative and finite, got {dt}")
    spacings = np.asarray(grid.spacings)
    return float(np.max(np.sum(np.abs(model.velocities) / spacings[None, :], axis=1) * dt))


class UpwindSolver:
    """Upwind integrator for one model / steady state / law on one grid."""

    def __init__(self, model, steady_state, domain, grid, law):
        if model.dim != domain.dim:
            raise ParameterError("model and domain dimensions differ")
        if grid.dim != domain.dim:
            raise ParameterError("grid and domain dimensions differ")
        if not (
            np.allclose(grid.lower, domain.lower, rtol=0.0, atol=1e-12)
            and np.allclose(grid.upper, domain.upper, rtol=0.0, atol=1e-12)
        ):
            raise ParameterError("grid bounds must coincide with the domain box")
        self.model = model
        self.f_e = steady_values(steady_state, model.n_species)
        self.domain = domain
        self.grid = grid
        self.law = law
        self.classification = validate_law(law, model, domain)
        self.jacobian = source_jacobian(model, self.f_e)
        self._face_nodes = {
            face: tuple(grid.axis_nodes[a] for a in domain.face_axes(face))
            for face in domain.faces
        }
        d = grid.dim
        self._upper_slices = {
            axis: tuple(slice(1, None) if j == axis else slice(None) for j in range(d))
            for axis in range(d)
        }
        self._lower_slices = {
            axis: tuple(slice(None, -1) if j == axis else slice(None) for j in range(d))
            for axis in range(d)
        }
        self._face_slicers = {}
        for face in domain.faces:
            idx = 0 if face.side < 0 else -1
            self._face_slicers[face] = tuple(
                idx if j == face.axis else slice(None) for j in range(d)
            )

    def initial_state(self, field):
        field = np.array(field, dtype=float)
        expected = (self.model.n_species,) + self.grid.nodes_per_axis
        if field.shape != expected:
            raise ParameterError(f"field shape {field.shape} does not match {expected}")
        if not np.all(np.isfinite(field)):
            raise ParameterError("initial field must be finite")
        return SimulationState(t=0.0, field=field, step=0)

    def _boundary_coefficients(self, alpha):
        """Per-face quadrature x weight x speed arrays; the recorded boundary
        form is then one weighted sum of squared traces per face."""
        coeffs = {}
        n = self.model.n_species
        for face in self.domain.faces:
            info = self.classification.for_face(face)
            nodes = self._face_nodes[face]
            counts = tuple(arr.size for arr in nodes)
            spacings = [(arr[-1] - arr[0]) / (arr.size - 1) for arr in nodes]
            quad = tensor_weights(counts, spacings) if counts else np.ones(())
            coord = self.domain.face_coordinate(face)
            coeff = np.zeros((n,) + counts)
            for i in range(n):
                speed = info.normal_speeds[i]
                if speed == 0.0:
                    continue
                u = self.model.velocities[i]
                exp_part = np.exp(-u[face.axis] * coord)
                for axis, arr in zip(self.domain.face_axes(face), nodes):
                    exp_part = np.multiply.outer(exp_part, np.exp(-u[axis] * arr))
                coeff[i] = quad * (speed * (alpha / self.f_e[i] + exp_part))
            coeffs[face] = coeff
        return coeffs

    def _trace_views(self, field):
        return {
            face: field[(slice(None),) + slicer] for face, slicer in self._face_slicers.items()
        }

    def step(self, state, dt):
        """One explicit update; refuses time steps beyond the CFL limit."""
        cfl = cfl_number(self.model, self.grid, dt)
        if cfl > 1.0 + _CFL_SLACK:
            raise CFLError(f"CFL number {cfl:.6g} exceeds 1 for dt = {dt}")
        f = state.field
        new = f + dt * np.einsum("ab,b...->a...", self.jacobian, f)
        spacings = self.grid.spacings
        for k in range(self.model.n_species):
            fk = f[k]
            for axis in range(self.grid.dim):
                u = self.model.velocities[k, axis]
                if u == 0.0:
                    continue
                hi = self._upper_slices[axis]
                lo = self._lower_slices[axis]
                diff = fk[hi] - fk[lo]
                c = u * dt / spacings[axis]
                # The stencil-less boundary slice is always an incoming
                # face for this species; the law overwrite below fixes it.
                if u > 0.0:
                    new[k][hi] -= c * diff
                else:
                    new[k][lo] -= c * diff
        apply_law_to_traces(self.law, self.classification, self._face_nodes, self._trace_views(new))
        return SimulationState(t=state.t + dt, field=new, step=state.step + 1)

    def run(
        self,
        initial_field,
        dt,
        t_end,
        *,
        alpha,
        record_every=1,
        divergence_factor=1e6,
    ):
        """Integrate to ``t_end``, recording every ``record_every`` steps.

        Records t, plain L2 norm, weighted functional, discrete boundary
        form, and per-species norms.  Raises ``DivergenceError`` (with the
        partial series attached) if the field becomes non-finite or grows
        by ``divergence_factor``.
        """
        if dt <= 0.0 or not np.isfinite(dt):
            raise ParameterError(f"dt must be positive and finite, got {dt}")
        if t_end < 0.0 or not np.isfinite(t_end):
            raise ParameterError(f"t_end must be nonnegative and finite, got {t_end}")
        record_every = int(record_every)
        if record_every < 1:
            raise ParameterError(f"record_every must be >= 1, got {record_every}")
        cfl = cfl_number(self.model, self.grid, dt)
        if cfl > 1.0 + _CFL_SLACK:
            raise CFLError(f"CFL number {cfl:.6g} exceeds 1 for dt = {dt}")

        start = time.perf_counter()
        energy = EnergyQuadrature(self.model, self.f_e, alpha, self.grid)
        bc_coeffs = self._boundary_coefficients(alpha)
        state = self.initial_state(initial_field)
        ref = float(np.max(np.abs(state.field)))
        ref = ref if ref > 0.0 else 1.0

        times, l2s, lyaps, bcs, species = [], [], [], [], []

        def record(st):
            times.append(st.t)
            l2, per_species, functional = energy.record(st.field)
            l2s.append(l2)
            lyaps.append(functional)
            species.append(per_species)
            traces = self._trace_views(st.field)
            bcs.append(sum(float(np.sum(bc_coeffs[f] * traces[f] ** 2)) for f in self.domain.faces))

        def partial(st):
            return RunRecord(
                times=np.array(times),
                l2_norm=np.array(l2s),
                lyapunov=np.array(lyaps),
                boundary_form=np.array(bcs),
                species_norms=np.array(species).reshape(len(times), self.model.n_species),
                final_state=st,
                steps=st.step,
                wall_time=time.perf_counter() - start,
            )

        record(state)
        steps = int(round(t_end / dt))
        for s in range(1, steps + 1):
            state = self.step(state, dt)
            peak = float(np.max(np.abs(state.field)))
            if not np.isfinite(peak) or peak > divergence_factor * ref:
                bad = np.flatnonzero(
                    ~np.all(np.isfinite(state.field), axis=tuple(range(1, state.field.ndim)))
                )
                worst = int(bad[0]) if bad.size else int(
                    np.argmax(np.max(np.abs(state.field), axis=tuple(range(1, state.field.ndim))))
                )
                raise DivergenceError(
                    f"field diverged at step {s} (species f{worst + 1}): "
                    f"max |f| = {peak:.3e} vs initial {ref:.3e}",
                    step=s,
                    species=worst,
                    partial=partial(state),
                )
            if s % record_every == 0:
                record(state)
        return partial(state)
