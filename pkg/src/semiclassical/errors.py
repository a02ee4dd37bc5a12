"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation problems -> 2, numerical
failures -> 3, I/O -> 4.
"""


class SemiclassicalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SemiclassicalError, ValueError):
    """Inputs violate a documented precondition or invariant."""


class GridError(ValidationError):
    """The grid cannot represent the requested state with the required accuracy."""


class NumericalError(SemiclassicalError, RuntimeError):
    """A computation failed at run time (NaN, step rejection, ...)."""


class CausticError(NumericalError):
    """Classical characteristics crossed; the single-valued action no longer exists."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
