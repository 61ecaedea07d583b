"""Exception hierarchy shared by all modules."""


class S1AvgError(Exception):
    """Base class for every error raised by this package."""


class ValenceError(S1AvgError):
    """Operands of a tensor operation have incompatible valences or degrees."""


class DomainError(S1AvgError):
    """A point (or a finite-difference stencil point) lies outside the chart."""


class SingularPointError(S1AvgError):
    """The generating vector field vanishes (or nearly so) at a query point."""


class ClosureError(S1AvgError):
    """A sampled orbit does not close after one period: period data inconsistent."""


class PeriodDetectionError(S1AvgError):
    """No return to the section was found within the search window."""


class IntegrationError(S1AvgError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""


class NotInvariantError(S1AvgError):
    """A gauge field that must be S1-invariant is not."""


class SolvabilityError(S1AvgError):
    """A solvability hypothesis (e.g. the ASP condition) is violated."""


class DegenerateError(S1AvgError):
    """A frame, a symplectic matrix or a nondegeneracy hypothesis fails at a probe."""


class ConfigError(S1AvgError):
    """Invalid run configuration (unknown keys, bad values)."""
