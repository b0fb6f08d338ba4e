"""Exception types shared across the toolkit."""


class SerrinError(Exception):
    """Base class for all toolkit-specific failures."""


class InvalidInputError(SerrinError, ValueError):
    """Arguments are malformed (non-finite, wrong sign, wrong shape)."""


class InvalidDomainError(SerrinError, ValueError):
    """A curve or domain violates a geometric precondition."""


class ConfigError(SerrinError, ValueError):
    """A scenario configuration file is malformed."""


class UnsupportedRegimeError(SerrinError, ValueError):
    """Boundary data falls outside the regimes the model fitter covers.

    Carries the classification tag so callers can distinguish the unproven
    decreasing regime from outright inadmissible data.
    """

    def __init__(self, message, case=None):
        super().__init__(message)
        self.case = case


class RootBracketError(SerrinError, RuntimeError):
    """The compatibility root could not be bracketed or polished."""


class OutOfRangeError(SerrinError, ValueError):
    """A value lies outside the range the inverse map is defined on."""


class SingularEvaluationError(SerrinError, ValueError):
    """Evaluation was requested inside a singular neighbourhood."""


class InconsistentModelError(SerrinError, ValueError):
    """Field values or derived quantities contradict the fitted model."""


class SolverFailureError(SerrinError, RuntimeError):
    """The linear solver did not meet its residual contract.

    ``residuals`` holds the relative residual history that was observed.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
