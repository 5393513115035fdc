"""Custom exceptions for the WVG Shapley toolkit."""


class WVGShapleyError(Exception):
    """Base exception for the toolkit."""
    exit_code = 1


class ConfigurationError(WVGShapleyError):
    """Raised when a run configuration, flag or config file is invalid."""
    exit_code = 2


class DistributionSpecError(ConfigurationError):
    """Raised when a distribution spec string cannot be parsed."""
    pass


class GameSizeError(ConfigurationError):
    """Raised when an exact enumerator is asked for too many agents."""
    pass


class DomainError(WVGShapleyError, ValueError):
    """Raised when an argument lies outside a law's support or valid range."""
    exit_code = 2


class ConvergenceError(WVGShapleyError):
    """Raised when quadrature, a series or an iterative evaluator fails to converge."""
    exit_code = 3


class RunawayRenewalError(ConvergenceError):
    """Raised when a renewal replication exceeds the draw guard."""
    pass


class OutputError(WVGShapleyError):
    """Raised when results or manifests cannot be written, read or validated."""
    exit_code = 4
