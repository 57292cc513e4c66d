"""Decay-rate fitting, CSV/ snapshot emission, and report assembly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError

CSV_DIGITS = ".17g"
MACHINE_MARKER = "--- machine readable (json) ---"


def format_float(x):
    return format(float(x), CSV_DIGITS)


@dataclass(frozen=True)
class FitResult:
    """Least-squares exponential fit of a norm series: ``norm ~ exp(intercept - nu * t)``."""

    nu: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int
    ok: bool
    message: str = ""

    def as_dict(self):
        return {
            "nu": None if math.isnan(self.nu) else self.nu,
            "intercept": None if math.isnan(self.intercept) else self.intercept,
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "window": list(self.window),
            "n_points": self.n_points,
            "ok": self.ok,
            "message": self.message,
        }


def fit_decay(times, norms, window):
    """Fit ``log(norm)`` vs ``t`` over a time window; decay rate is ``-slope``.

    Returns a flagged (not raised) result when the window holds fewer than
    three samples or any nonpositive norm.  A zero-variance response is
    reported as an exact fit (``r_squared = 1``) by convention.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if times.shape != norms.shape or times.ndim != 1:
        raise ParameterError("times and norms must be 1-d arrays of equal length")
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ParameterError(f"fit window must be a finite interval, got {window}")
    mask = (times >= lo) & (times <= hi)
    t = times[mask]
    y = norms[mask]
    bad = FitResult(
        nu=math.nan, intercept=math.nan, r_squared=math.nan,
        window=(lo, hi), n_points=int(t.size), ok=False,
    )
    if t.size < 3:
        return replace(bad, message=f"only {t.size} samples in fit window")
    if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
        return replace(bad, message="nonpositive norms in fit window")
    logs = np.log(y)
    t_mean = float(np.mean(t))
    l_mean = float(np.mean(logs))
    dt = t - t_mean
    dl = logs - l_mean
    denom = float(np.sum(dt * dt))
    if denom == 0.0:
        return replace(bad, message="degenerate time window")
    slope = float(np.sum(dt * dl)) / denom
    intercept = l_mean - slope * t_mean
    ss_tot = float(np.sum(dl * dl))
    ss_res = float(np.sum((logs - (intercept + slope * t)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(
        nu=-slope,
        intercept=intercept,
        r_squared=r_squared,
        window=(lo, hi),
        n_points=int(t.size),
        ok=True,
    )


def csv_text(record):
    """Render a run record as CSV: ``t,l2_norm,lyapunov,boundary_form,norm_f1,...``."""
    n = record.species_norms.shape[1] if record.species_norms.size else 0
    header = "t,l2_norm,lyapunov,boundary_form," + ",".join(f"norm_f{i + 1}" for i in range(n))
    lines = [header]
    for idx in range(record.n_records):
        cells = [
            format_float(record.times[idx]),
            format_float(record.l2_norm[idx]),
            format_float(record.lyapunov[idx]),
            format_float(record.boundary_form[idx]),
        ]
        cells.extend(format_float(v) for v in record.species_norms[idx])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path, record):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(csv_text(record))


def write_snapshot(path, state, grid):
    """Flat field snapshot with a one-line header: n, d, node counts, t."""
    field = state.field
    n = field.shape[0]
    dims = " ".join(str(c) for c in grid.nodes_per_axis)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# {n} {grid.dim} {dims} {format_float(state.t)}\n")
        for value in field.ravel():
            handle.write(format_float(value) + "\n")


def write_report(path, text, payload):
    """Plain-text report followed by a machine-readable JSON section."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
        if not text.endswith("\n"):
            handle.write("\n")
        handle.write("\n" + MACHINE_MARKER + "\n")
        handle.write(json.dumps(payload, indent=2, sort_keys=True))
        handle.write("\n")


def read_report_payload(path):
    """Parse the JSON section back out of a report file (testing aid)."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    _, _, tail = text.partition(MACHINE_MARKER)
    return json.loads(tail)


def certificate_lines(certificate):
    return [
        f"alpha = {certificate.alpha:.6g}",
        f"slowest relaxation rate = {certificate.min_relaxation:.6g}",
        f"transport coercivity = {certificate.transport_coercivity:.6g}",
        f"coupling bound = {certificate.coupling_bound:.6g}",
        f"weight range = [{certificate.weight_min:.6g}, {certificate.weight_max:.6g}]",
        f"certified decay rate = {certificate.decay_rate:.6g}",
        f"norm overshoot factor = {certificate.overshoot:.6g}",
    ]


def certificate_payload(certificate):
    return {
        "alpha": certificate.alpha,
        "min_relaxation": certificate.min_relaxation,
        "transport_coercivity": certificate.transport_coercivity,
        "coupling_bound": certificate.coupling_bound,
        "weight_min": certificate.weight_min,
        "weight_max": certificate.weight_max,
        "decay_rate": certificate.decay_rate,
        "overshoot": certificate.overshoot,
        "valid": certificate.valid,
    }
