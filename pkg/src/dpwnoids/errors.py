"""Exception hierarchy shared by all modules."""


class DpwError(Exception):
    """Base class for everything raised on purpose by this package."""


class InvalidOperandError(DpwError):
    """Operands cannot interoperate (e.g. mismatched weight rho)."""


class DomainError(DpwError):
    """Evaluation point outside the annulus of convergence."""


class NotNearIdentityError(DpwError):
    """Matrix log requested outside its convergence radius."""


class InvalidInputError(DpwError):
    """Input violates a documented precondition."""


class ConvergenceError(DpwError):
    """An iteration failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PoleError(DpwError):
    """Evaluation at (or too close to) a pole of the active potential."""

    def __init__(self, message, location=None, kind=None):
        super().__init__(message)
        self.location = location
        self.kind = kind  # "end" | "gauge-zero" | None


class InvalidBasepointError(DpwError):
    """Base point sits on the singular set."""


class GaugeError(DpwError):
    """Gauge evaluation failed (non-invertible sample, bad region)."""


class BranchError(DpwError):
    """A square-root branch cut cannot be kept away from the path."""


class TransportError(DpwError):
    """ODE transport failed (step underflow near a singularity)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class MonodromyStructureError(DpwError):
    """The monodromy is not divisible by the rescaling factor.

    Signals a violation of the unitarity/closing conditions rather than
    numerical noise.
    """


class QuadratureError(DpwError):
    """Contour quadrature failed to converge; carries the best estimate."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConstructionError(DpwError):
    """A built-in family failed its own validation."""


class ContinuationError(DpwError):
    """Continuation broke down; carries the last good point."""

    def __init__(self, message, t_last=None, x_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.x_last = x_last


class MonodromyLeakError(DpwError):
    """Immersion values from homotopically distinct paths disagree."""


class ConfigError(DpwError):
    """Unusable run configuration or artifact file."""
