"""Exception types shared across the package."""


class FgboError(Exception):
    """Base class for package errors."""


class ContractViolationError(FgboError):
    """An argument violated a documented precondition (wrong shape, index out
    of range, point outside the search box, ...)."""


class ConfigurationError(FgboError):
    """A configuration value is invalid or inconsistent (bad schedule
    parameters, unknown config keys, malformed decomposition spec, ...)."""


class NumericalFailureError(FgboError):
    """A linear-algebra step failed beyond recoverable jitter, or produced a
    value outside numerical tolerance (e.g. a clearly negative variance).

    ``jitter`` carries the last diagonal jitter attempted when the failure
    came from a factorization, else None.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter
