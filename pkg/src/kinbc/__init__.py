"""Boundary feedback design and upwind simulation for linearized
discrete-velocity kinetic models on axis-aligned boxes."""

from .boundary import (
    AdmissibilityResult,
    BoundaryClassification,
    BoxDomain,
    ControlLaw,
    Face,
    FeedbackRule,
    FeedbackTerm,
    apply_law_to_traces,
    boundary_form,
    check_admissible,
    classify,
    crossfeed_gain_bound,
    crossfeed_reflect_gain_bounds,
    validate_law,
    window_crossfeed_law,
    window_crossfeed_reflect_law,
    zero_inflow_law,
)
from .config import (
    RunConfig,
    build_domain,
    build_grid,
    build_initial_field,
    build_law,
    build_model,
    build_steady_state,
    load_config,
    parse_config,
    serialize_config,
)
from .errors import (
    CertificateError,
    CFLError,
    ConfigError,
    DivergenceError,
    DomainError,
    KinbcError,
    LawError,
    ModelError,
    NumericalError,
    ParameterError,
)
from .grid import Grid
from .lyapunov import (
    EnergyQuadrature,
    LyapunovCertificate,
    build_certificate,
    decay_constants,
    select_alpha,
    weight_extrema,
    weight_matrix,
    weighted_energy,
)
from .model import (
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
from .report import FitResult, fit_decay, write_csv, write_report, write_snapshot
from .solver import RunRecord, SimulationState, UpwindSolver, cfl_number
from .stability import (
    StabilityDecomposition,
    decompose,
    decomposition_residuals,
    eigh_symmetric,
    inverse_state_matrix,
)

__version__ = "0.1.0"
