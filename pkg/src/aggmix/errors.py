"""Exception hierarchy shared by all modules."""


class AggmixError(Exception):
    """Base class for every error raised by the package."""


class DomainError(AggmixError, ValueError):
    """A parameter or argument lies outside the supported domain."""


class SupportError(DomainError):
    """A mixture density violates a support hypothesis."""


class ConvergenceError(AggmixError, RuntimeError):
    """A series, transform or iteration failed to reach its tolerance."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature could not meet the requested tolerance."""


class AliasingError(ConvergenceError):
    """Cepstral coefficients changed under grid doubling."""


class DivergenceError(AggmixError, ArithmeticError):
    """An integral diverges (singular frequency, inadmissible density)."""


class NonIntegrableLogError(DivergenceError):
    """The log spectrum is not integrable (the spectrum vanishes)."""


class InconclusiveError(AggmixError):
    """A regression-based diagnostic fit too poorly to decide."""


class RejectionBudgetError(AggmixError, RuntimeError):
    """Rejection sampling acceptance rate fell below the budget."""
