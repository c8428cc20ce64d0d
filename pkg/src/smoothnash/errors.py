"""Exception types raised by the solvers."""


class SmoothNashError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SmoothNashError, ValueError):
    """An input violates a documented precondition."""


class ResourceLimitError(SmoothNashError):
    """A search space or tensor exceeds a configured size guard."""


class NotFoundError(SmoothNashError):
    """A search finished without producing an equilibrium."""


class SolverFailureError(SmoothNashError):
    """An LP subroutine failed numerically."""


class InternalConsistencyError(SmoothNashError):
    """An internal invariant was violated (for example a payoff cache miss)."""


class ParseError(SmoothNashError, ValueError):
    """A game file could not be parsed."""
