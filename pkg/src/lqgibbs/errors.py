"""Exception types raised by lqgibbs."""


class LqGibbsError(Exception):
    """Base class for all package errors."""


class InvalidMesh(LqGibbsError, ValueError):
    pass


class Unsupported(LqGibbsError, ValueError):
    pass


class DegenerateElement(LqGibbsError, ValueError):
    pass


class InvalidProblem(LqGibbsError, ValueError):
    pass


class OutOfDomain(LqGibbsError, ValueError):
    pass


class DomainError(LqGibbsError, ValueError):
    pass


class PreconditionError(LqGibbsError, ValueError):
    pass


class NumericalError(LqGibbsError, ArithmeticError):
    pass


class ParseError(LqGibbsError, ValueError):
    """Malformed mesh file; ``line`` is the 1-based offending line (0 if unknown)."""

    def __init__(self, message, line=0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class NonConvergence(LqGibbsError, RuntimeError):
    """A Newton stage ran out of iterations.

    ``stage`` is the ``(q, eps)`` pair that failed; ``partial`` holds whatever
    the caller had finished before the failure (e.g. sweep rows).
    """

    def __init__(self, message, stage=None, partial=None):
        self.stage = stage
        self.partial = partial
        super().__init__(message)
