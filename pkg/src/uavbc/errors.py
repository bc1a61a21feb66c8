"""Exception types shared across the optimization stack."""


class UavbcError(Exception):
    """Base class for all package errors."""


class ConfigurationError(UavbcError):
    """A scenario or parameter value is invalid."""


class Infeasible(UavbcError):
    """The problem (or subproblem) has no feasible point."""

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class Unbounded(UavbcError):
    """The linear program is unbounded above."""


class StartInfeasible(UavbcError):
    """The supplied start point is not strictly feasible."""


class SolverFailure(UavbcError):
    """A numerical method failed to converge; carries diagnostics."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvariantViolation(UavbcError):
    """A runtime invariant (e.g. monotone objective) was broken."""
