"""Exception hierarchy shared by all dualdiv modules."""


class DualDivError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DualDivError, ValueError):
    """An argument lies outside the domain of the function or model."""


class QuadratureError(DualDivError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class EstimationError(DualDivError, RuntimeError):
    """An estimator could not produce a usable value."""


class DegenerateEscortError(DomainError):
    """The escort parameter coincides with the null value, so the test statistic is degenerate."""
