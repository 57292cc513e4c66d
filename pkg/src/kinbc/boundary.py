"""Box geometry, boundary trace classification, and feedback law design.

Each species is classified per face by the sign of its normal speed
(incoming / outgoing / characteristic).  A control law assigns incoming
traces as affine feedback of outgoing traces, possibly relocated along
the boundary.  The admissibility checker certifies, trace-independently,
that the weighted boundary quadratic form stays nonnegative, which is
the condition the decay certificate needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LawError, ParameterError
from .grid import tensor_weights
from .model import steady_values

_AXIS_NAMES = "xyz"


def _axis_name(axis, dim):
    if dim <= 3:
        return _AXIS_NAMES[axis]
    return f"x{axis + 1}"


@dataclass(frozen=True)
class Face:
    """One flat face of an axis-aligned box: ``axis`` and side (-1 low, +1 high)."""

    axis: int
    side: int

    def __post_init__(self):
        if self.side not in (-1, 1):
            raise ParameterError(f"face side must be -1 or +1, got {self.side}")
        if self.axis < 0:
            raise ParameterError(f"face axis must be nonnegative, got {self.axis}")

    def normal(self, dim):
        n = np.zeros(dim)
        n[self.axis] = float(self.side)
        return n


class BoxDomain:
    """Axis-aligned box ``(lower_1, upper_1) x ... x (lower_d, upper_d)``."""

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=float).reshape(-1)
        hi = np.array(upper, dtype=float).reshape(-1)
        if lo.size != hi.size or lo.size == 0:
            raise ParameterError("lower and upper must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ParameterError("box bounds must be finite with lower < upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower = lo
        self.upper = hi

    @property
    def dim(self):
        return self.lower.size

    @property
    def faces(self):
        return tuple(Face(axis, side) for axis in range(self.dim) for side in (-1, 1))

    def face_axes(self, face):
        """Free axes parameterizing a face, in ascending order."""
        return tuple(j for j in range(self.dim) if j != face.axis)

    def face_coordinate(self, face):
        """The fixed coordinate value on the face's axis."""
        return float(self.lower[face.axis] if face.side < 0 else self.upper[face.axis])

    def face_bounds(self, face):
        axes = self.face_axes(face)
        return self.lower[list(axes)], self.upper[list(axes)]

    def face_label(self, face):
        return f"{_axis_name(face.axis, self.dim)}={self.face_coordinate(face):g}"

    def embed(self, face, params):
        """Map face-local parameter points (k, d-1) to points in the box (k, d)."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        k = params.shape[0]
        pts = np.empty((k, self.dim))
        pts[:, face.axis] = self.face_coordinate(face)
        for col, axis in enumerate(self.face_axes(face)):
            pts[:, axis] = params[:, col]
        return pts

    def corners(self):
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @staticmethod
    def unit(dim):
        return BoxDomain(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class FaceClassification:
    face: Face
    normal_speeds: tuple
    incoming: tuple
    outgoing: tuple
    characteristic: tuple


@dataclass(frozen=True)
class BoundaryClassification:
    by_face: dict = field(repr=False)

    def for_face(self, face):
        return self.by_face[face]

    @property
    def faces(self):
        return tuple(self.by_face)


def classify(model, domain):
    """Label every species on every face by the sign of its normal speed."""
    if model.dim != domain.dim:
        raise ParameterError(f"model dimension {model.dim} does not match domain dimension {domain.dim}")
    by_face = {}
    for face in domain.faces:
        speeds = face.side * model.velocities[:, face.axis]
        incoming = tuple(int(i) for i in np.flatnonzero(speeds < 0.0))
        outgoing = tuple(int(i) for i in np.flatnonzero(speeds > 0.0))
        characteristic = tuple(int(i) for i in np.flatnonzero(speeds == 0.0))
        by_face[face] = FaceClassification(
            face=face,
            normal_speeds=tuple(float(s) for s in speeds),
            incoming=incoming,
            outgoing=outgoing,
            characteristic=characteristic,
        )
    return BoundaryClassification(by_face=by_face)


@dataclass(frozen=True)
class FeedbackTerm:
    """One affine feedback contribution: ``gain * trace_m(scale * x + offset)``.

    ``offset`` has one entry per face parameter axis; an empty tuple means
    all zeros.  The map sends target-face coordinates to source-face
    coordinates.
    """

    source_face: Face
    source_species: int
    gain: float
    scale: float = 1.0
    offset: tuple = ()


@dataclass(frozen=True)
class FeedbackRule:
    """Assignment of one incoming species on (part of) one face.

    ``window`` is an open sub-box ``(lows, highs)`` of the face parameters;
    ``None`` means the whole face.  Outside every rule window the incoming
    trace defaults to zero.
    """

    face: Face
    species: int
    terms: tuple
    window: tuple = None


@dataclass(frozen=True)
class ControlLaw:
    name: str
    rules: tuple = ()


_BOTTOM = Face(axis=1, side=-1)
_LEFT = Face(axis=0, side=-1)


def zero_inflow_law():
    """Force every incoming trace to zero (holds all inflows at the steady level)."""
    return ControlLaw("zero", ())


def _window_map(window, source_lo=0.0, source_hi=1.0):
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ParameterError(f"window must be a finite interval (lo, hi), got {window}")
    scale = (source_hi - source_lo) / (hi - lo)
    offset = source_lo - lo * scale
    return lo, hi, scale, offset


def window_crossfeed_law(k1, window=(1.0 / 3.0, 2.0 / 3.0)):
    """Feed the bottom-window inflow from the measured left-edge outflow.

    On the unit square: the vertical inflow on the bottom window is set to
    ``k1`` times the horizontal outflow of the left edge, stretched so the
    window covers the full edge; all other inflows are zero.
    """
    lo, hi, scale, offset = _window_map(window)
    term = FeedbackTerm(source_face=_LEFT, source_species=1, gain=float(k1), scale=scale, offset=(offset,))
    rule = FeedbackRule(face=_BOTTOM, species=2, terms=(term,), window=((lo,), (hi,)))
    return ControlLaw("crossfeed", (rule,))


def window_crossfeed_reflect_law(k2, k3, window=(1.0 / 3.0, 2.0 / 3.0)):
    """Bottom-window inflow from the left-edge outflow plus local reflection.

    Same geometry as the crossfeed law, with an additional local term:
    ``k3`` times the outgoing vertical trace measured on the window itself.
    """
    lo, hi, scale, offset = _window_map(window)
    crossfeed = FeedbackTerm(source_face=_LEFT, source_species=1, gain=float(k2), scale=scale, offset=(offset,))
    reflect = FeedbackTerm(source_face=_BOTTOM, source_species=3, gain=float(k3), scale=1.0, offset=(0.0,))
    rule = FeedbackRule(face=_BOTTOM, species=2, terms=(crossfeed, reflect), window=((lo,), (hi,)))
    return ControlLaw("crossfeed_reflect", (rule,))


def crossfeed_gain_bound(f_e, alpha):
    """Largest crossfeed gain certified admissible for the given weights."""
    fe = steady_values(f_e, 4)
    _check_alpha(alpha)
    return math.sqrt(3.0 * fe[2] * (alpha + fe[1]) / (fe[1] * (alpha + fe[2])))


def crossfeed_reflect_gain_bounds(f_e, alpha):
    """Certified gain bounds (crossfeed, reflect) for the two-term law."""
    fe = steady_values(f_e, 4)
    _check_alpha(alpha)
    bound_cross = math.sqrt(3.0 * fe[2] * (alpha + fe[1]) / (2.0 * fe[1] * (alpha + fe[2])))
    bound_reflect = math.sqrt(fe[2] * (alpha + fe[3]) / (2.0 * fe[3] * (alpha + fe[2])))
    return bound_cross, bound_reflect


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and alpha >= 0.0):
        raise ParameterError(f"alpha must be finite and nonnegative, got {alpha}")


def _rule_window(rule, domain):
    """Rule window as (lows, highs) arrays over the face parameter axes."""
    lo_face, hi_face = domain.face_bounds(rule.face)
    if rule.window is None:
        return np.asarray(lo_face, dtype=float), np.asarray(hi_face, dtype=float)
    lows = np.asarray(rule.window[0], dtype=float).reshape(-1)
    highs = np.asarray(rule.window[1], dtype=float).reshape(-1)
    return lows, highs


def _term_offset(term, n_params):
    if not term.offset:
        return np.zeros(n_params)
    return np.asarray(term.offset, dtype=float).reshape(-1)


def validate_law(law, model, domain, classification=None):
    """Raise ``LawError`` unless the law is well-formed for model + geometry."""
    if classification is None:
        classification = classify(model, domain)
    n = model.n_species
    n_params = domain.dim - 1
    seen_windows = {}
    for rule in law.rules:
        if not 0 <= rule.species < n:
            raise LawError(f"rule species {rule.species} out of range for {n} species")
        if rule.face not in classification.by_face:
            raise LawError(f"rule face {rule.face} is not a face of the domain")
        info = classification.for_face(rule.face)
        if rule.species not in info.incoming:
            raise LawError(
                f"species {rule.species + 1} is not incoming on face "
                f"{domain.face_label(rule.face)}; it cannot be assigned there"
            )
        lows, highs = _rule_window(rule, domain)
        lo_face, hi_face = domain.face_bounds(rule.face)
        if lows.size != n_params or highs.size != n_params:
            raise LawError(f"rule window must have {n_params} bounds per side")
        if np.any(lows >= highs) or np.any(lows < lo_face - 1e-9) or np.any(highs > hi_face + 1e-9):
            raise LawError(f"rule window {rule.window} is not a sub-interval of its face")
        key = (rule.face, rule.species)
        for other_lo, other_hi in seen_windows.get(key, []):
            if np.all(lows < other_hi) and np.all(other_lo < highs):
                raise LawError(
                    f"overlapping windows for species {rule.species + 1} on face "
                    f"{domain.face_label(rule.face)}"
                )
        seen_windows.setdefault(key, []).append((lows, highs))

        for term in rule.terms:
            if not 0 <= term.source_species < n:
                raise LawError(f"term source species {term.source_species} out of range")
            if term.source_face not in classification.by_face:
                raise LawError(f"term source face {term.source_face} is not a face of the domain")
            src_info = classification.for_face(term.source_face)
            if term.source_species not in src_info.outgoing:
                raise LawError(
                    f"species {term.source_species + 1} is not outgoing on face "
                    f"{domain.face_label(term.source_face)}; it cannot be measured there"
                )
            if not (math.isfinite(term.gain) and math.isfinite(term.scale)) or term.scale == 0.0:
                raise LawError("term gain must be finite and scale finite nonzero")
            offset = _term_offset(term, n_params)
            if offset.size != n_params:
                raise LawError(f"term offset must have {n_params} components")
            src_lo, src_hi = domain.face_bounds(term.source_face)
            image_a = term.scale * lows + offset
            image_b = term.scale * highs + offset
            img_lo = np.minimum(image_a, image_b)
            img_hi = np.maximum(image_a, image_b)
            if np.any(img_lo < src_lo - 1e-9) or np.any(img_hi > src_hi + 1e-9):
                raise LawError(
                    f"affine map of window {rule.window} leaves the source face "
                    f"{domain.face_label(term.source_face)}"
                )
    return classification


@dataclass(frozen=True)
class AdmissibilityResult:
    admissible: bool
    margin: float
    violation: str = None

    def __bool__(self):
        return self.admissible


def _face_sample_params(domain, face, samples_per_axis):
    axes = domain.face_axes(face)
    if not axes:
        return np.zeros((1, 0))
    grids = np.meshgrid(
        *[np.linspace(domain.lower[a], domain.upper[a], samples_per_axis + 1) for a in axes],
        indexing="ij",
    )
    return np.stack([g.ravel() for g in grids], axis=1)


def _species_weights(model, fe, alpha, points, species, unit_weights):
    """Boundary weight alpha/fe + exp(-u . x) for one species at points (k, d)."""
    if unit_weights:
        return np.ones(points.shape[0])
    u = model.velocities[species]
    return alpha / fe[species] + np.exp(-points @ u)


def check_admissible(law, model, f_e, alpha, domain=None, *, unit_weights=False, samples_per_axis=64):
    """Trace-independent sufficient check that the boundary form stays nonnegative.

    Every feedback term loads the outgoing budget it measures: a term with
    gain ``g`` relocating by an affine map of slope ``a``, combined with
    ``M - 1`` siblings into one incoming value, consumes
    ``M * g^2 * w_in * |s_in| / |a|^(d-1)`` of the source's pointwise
    budget ``w_out * |s_out|``, where ``w`` are the boundary weights and
    ``s`` the normal speeds.  Admissible iff no sampled source point is
    overloaded; the margin is the smallest remaining slack.
    """
    if domain is None:
        domain = BoxDomain.unit(model.dim)
    _check_alpha(alpha)
    fe = steady_values(f_e, model.n_species)
    classification = validate_law(law, model, domain)
    n_params = domain.dim - 1

    # Evaluation points per face: a lattice plus the images of every rule
    # window's endpoints/midpoint, so thin windows are never missed.
    points = {face: [_face_sample_params(domain, face, samples_per_axis)] for face in domain.faces}
    for rule in law.rules:
        lows, highs = _rule_window(rule, domain)
        probe = np.stack([lows, 0.5 * (lows + highs), highs]) if n_params else np.zeros((1, 0))
        for term in rule.terms:
            offset = _term_offset(term, n_params)
            points[term.source_face].append(term.scale * probe + offset)
    face_points = {face: np.vstack(pts) for face, pts in points.items()}

    margin = math.inf
    violation = None
    worst = None
    for face in domain.faces:
        info = classification.for_face(face)
        params = face_points[face]
        embedded = domain.embed(face, params)
        for m in info.outgoing:
            speed_out = info.normal_speeds[m]
            budget = _species_weights(model, fe, alpha, embedded, m, unit_weights) * speed_out
            load = np.zeros_like(budget)
            for rule in law.rules:
                target_info = classification.for_face(rule.face)
                speed_in = abs(target_info.normal_speeds[rule.species])
                lows, highs = _rule_window(rule, domain)
                n_terms = len(rule.terms)
                for term in rule.terms:
                    if term.source_face != face or term.source_species != m:
                        continue
                    offset = _term_offset(term, n_params)
                    back = (params - offset) / term.scale if n_params else params
                    inside = (
                        np.all((back > lows) & (back < highs), axis=1)
                        if n_params
                        else np.ones(params.shape[0], dtype=bool)
                    )
                    if not np.any(inside):
                        continue
                    w_in = _species_weights(
                        model, fe, alpha, domain.embed(rule.face, back), rule.species, unit_weights
                    )
                    jac = abs(term.scale) ** n_params
                    load[inside] += n_terms * term.gain**2 * w_in[inside] * speed_in / jac
            slack = budget - load
            idx = int(np.argmin(slack))
            if slack[idx] < margin:
                margin = float(slack[idx])
                worst = (face, m, load[idx], budget[idx])
    if worst is not None and margin < 0.0:
        face, m, load_val, budget_val = worst
        violation = (
            f"outgoing budget of f{m + 1} on {domain.face_label(face)} exceeded: "
            f"load {load_val:.6g} > budget {budget_val:.6g}"
        )
    if not math.isfinite(margin):
        margin = 0.0  # no outgoing species anywhere: nothing to certify
    return AdmissibilityResult(admissible=margin >= 0.0, margin=margin, violation=violation)


def _face_nodes_from_counts(domain, face, counts):
    axes = domain.face_axes(face)
    if len(counts) != len(axes):
        raise ParameterError(
            f"trace for face {domain.face_label(face)} has {len(counts)} axes, expected {len(axes)}"
        )
    return tuple(np.linspace(domain.lower[a], domain.upper[a], c) for a, c in zip(axes, counts))


def boundary_form(traces, model, f_e, alpha, domain):
    """Trapezoid quadrature of the weighted boundary quadratic form.

    ``traces`` maps every face to an ``(n, *face_nodes)`` array of boundary
    values on a uniform node grid.  Returns the surface integral of
    ``sum_i (alpha/fe_i + exp(-u_i . x)) * s_i * f_i^2``; nonnegativity of
    this form is what an admissible law guarantees.
    """
    _check_alpha(alpha)
    fe = steady_values(f_e, model.n_species)
    classification = classify(model, domain)
    total = 0.0
    for face in domain.faces:
        if face not in traces:
            raise ParameterError(f"missing trace for face {domain.face_label(face)}")
        tr = np.asarray(traces[face], dtype=float)
        if tr.shape[0] != model.n_species:
            raise ParameterError("trace species count does not match the model")
        counts = tr.shape[1:]
        nodes = _face_nodes_from_counts(domain, face, counts)
        spacings = [(arr[-1] - arr[0]) / (arr.size - 1) for arr in nodes]
        quad = tensor_weights(counts, spacings) if counts else np.ones(())
        info = classification.for_face(face)
        coord = domain.face_coordinate(face)
        integrand = np.zeros(counts)
        for i in range(model.n_species):
            s = info.normal_speeds[i]
            if s == 0.0:
                continue
            u = model.velocities[i]
            exp_part = np.exp(-u[face.axis] * coord)
            for axis, arr in zip(domain.face_axes(face), nodes):
                exp_part = np.multiply.outer(exp_part, np.exp(-u[axis] * arr))
            w = alpha / fe[i] + exp_part
            integrand = integrand + w * s * tr[i] ** 2
        total += float(np.sum(quad * integrand))
    return total


def apply_law_to_traces(law, classification, face_nodes, traces):
    """Overwrite incoming trace values in place from the outgoing traces.

    ``face_nodes`` maps faces to their node coordinate arrays (one per face
    parameter axis); ``traces`` maps faces to ``(n, *nodes)`` arrays that
    are modified in place.  Incoming species default to zero, then every
    rule fills its window from the (current) outgoing traces.
    """
    for face, info in classification.by_face.items():
        for i in info.incoming:
            traces[face][i] = 0.0
    for rule in law.rules:
        nodes = face_nodes[rule.face]
        target = traces[rule.face][rule.species]
        if len(nodes) == 0:
            value = 0.0
            for term in rule.terms:
                value += term.gain * float(traces[term.source_face][term.source_species])
            traces[rule.face][rule.species] = value
            continue
        if len(nodes) > 1:
            raise LawError("affine feedback rules support at most one face parameter axis")
        x = nodes[0]
        if rule.window is None:
            mask = np.ones(x.size, dtype=bool)
        else:
            lo, hi = float(rule.window[0][0]), float(rule.window[1][0])
            mask = (x > lo) & (x < hi)
        if not np.any(mask):
            continue
        values = np.zeros(x.size)
        for term in rule.terms:
            offset = _term_offset(term, 1)[0]
            mapped = term.scale * x + offset
            src_nodes = face_nodes[term.source_face][0]
            src = traces[term.source_face][term.source_species]
            values += term.gain * np.interp(mapped, src_nodes, src)
        target[mask] = values[mask]
