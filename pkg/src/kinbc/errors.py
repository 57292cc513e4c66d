"""Exception types shared across the package."""


class KinbcError(Exception):
    """Base class for all package errors."""


class ParameterError(KinbcError, ValueError):
    """An argument or configuration value is invalid."""


class ConfigError(ParameterError):
    """A run configuration failed to parse or validate."""


class DomainError(KinbcError, ValueError):
    """A state vector left the admissible cone of strictly positive densities."""


class ModelError(KinbcError):
    """A structural requirement of the model failed (steadiness, dissipativity)."""


class CertificateError(ModelError):
    """No valid decay certificate exists for the requested weights."""


class LawError(KinbcError, ValueError):
    """A boundary feedback law is malformed for the given model and geometry."""


class NumericalError(KinbcError):
    """An iterative numerical procedure failed to converge."""


class CFLError(ParameterError):
    """Explicit time step violates the CFL stability constraint."""


class DivergenceError(NumericalError):
    """The simulated field blew up or became non-finite.

    Carries the step/species where divergence was detected and, when
    available, the partial time series recorded up to that point.
    """

    def __init__(self, message, *, step=None, species=None, partial=None):
        super().__init__(message)
        self.step = step
        self.species = species
        self.partial = partial
