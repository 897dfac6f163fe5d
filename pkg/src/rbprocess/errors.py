"""Exception hierarchy shared by the library and the CLI.

The CLI maps :class:`ConfigurationError` to exit code 1 and
:class:`NumericalError` (and subclasses) to exit code 2.
"""


class RbProcessError(Exception):
    pass


class ConfigurationError(RbProcessError, ValueError):
    """Invalid construction parameters or experiment configuration."""


class PreconditionError(RbProcessError, ValueError):
    """An operation was called outside its documented domain."""


class CoverageError(PreconditionError):
    """A lag series does not cover the lags a prediction needs."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"lag series is missing lags {self.missing}")


class SizeError(PreconditionError):
    """Brute-force enumeration requested beyond its size cap."""


class NumericalError(RbProcessError, ArithmeticError):
    pass


class ErgodicityError(NumericalError):
    """Stationary quantities could not be computed (chain not ergodic or no convergence)."""


class DegeneracyError(NumericalError):
    """Singular critic system, typically because the all-ones vector is in the feature span."""


class NumericalDivergenceError(NumericalError):
    def __init__(self, step, what="parameters"):
        self.step = step
        super().__init__(f"non-finite {what} at step {step}")
