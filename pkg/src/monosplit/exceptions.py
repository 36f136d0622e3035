"""Exception hierarchy shared by every monosplit module."""


class MonosplitError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(MonosplitError, ValueError):
    """An argument breaks a documented precondition (e.g. mismatched dims)."""


class InvalidParameter(MonosplitError, ValueError):
    """A scalar or matrix parameter is outside its admissible range."""


class InvalidPlanError(InvalidParameter):
    """A step-size plan violates one or more admissibility inequalities.

    Attributes
    ----------
    violated : list of str
        Names of the violated inequalities, e.g. ``"eps3 in (2, 3)"``.
    """

    def __init__(self, violated):
        self.violated = list(violated)
        super().__init__("invalid plan: " + "; ".join(self.violated))


class NumericError(MonosplitError, ArithmeticError):
    """A numerical computation produced a non-finite or singular result."""


class DivergenceError(NumericError):
    """An iteration left the finite region.

    Attributes
    ----------
    iteration : int
        Index of the iterate that failed the finiteness check.
    trace : IterationTrace or None
        Records collected before the failure.
    """

    def __init__(self, iteration, message=None, trace=None):
        self.iteration = iteration
        self.trace = trace
        super().__init__(message or f"iteration diverged at k={iteration}")


class OracleFailure(MonosplitError, RuntimeError):
    """The reference solver could not certify a solution."""


class ConfigError(MonosplitError, ValueError):
    """A benchmark or CLI configuration is inconsistent."""
