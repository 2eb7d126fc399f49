"""Exception types shared by all subpackages."""


class InvalidArgument(ValueError):
    """Raised when an input violates an operation's precondition."""


class NumericalFailure(RuntimeError):
    """Raised when an iterative or factorization step breaks down.

    ``details`` carries whatever diagnostics the raising routine had at hand
    (last residual, offending parameter, iteration count, ...).
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class InvalidState(RuntimeError):
    """Raised when an object is used before the data it needs was built."""
