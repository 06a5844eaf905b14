"""Exception hierarchy shared by every module."""


class SmsError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SmsError, ValueError):
    """Invalid mesh, solver or experiment configuration."""


class ContractError(SmsError, ValueError):
    """A caller broke an operation's precondition (sizes, ranges)."""


class EvaluationError(SmsError, ValueError):
    """A sampled field produced non-finite values."""


class HypothesisViolation(SmsError, ValueError):
    """Input data violates a structural hypothesis (e.g. V not bounded below by a positive constant)."""


class SolverError(SmsError, RuntimeError):
    """An iterative solver failed to converge.

    ``residual`` carries the last relative residual (or None if unavailable),
    ``diagnostics`` free-form iterate information.
    """

    def __init__(self, message, residual=None, diagnostics=None):
        super().__init__(message)
        self.residual = residual
        self.diagnostics = diagnostics or {}
