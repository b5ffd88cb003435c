"""Exception hierarchy.

Every error raised by the library derives from :class:`BetaconvError`; the
CLI maps subclasses onto exit codes via :attr:`BetaconvError.exit_code`.
"""


class BetaconvError(Exception):
    exit_code = 2


class ParameterError(BetaconvError, ValueError):
    """Invalid distribution or operator parameter."""

    exit_code = 1


class DomainError(BetaconvError, ValueError):
    """Argument outside the domain of a function."""

    exit_code = 1


class EmptySampleError(DomainError):
    pass


class SpecError(BetaconvError, ValueError):
    """An experiment or model specification violates a hypothesis."""

    exit_code = 1


class ScheduleError(BetaconvError, ValueError):
    exit_code = 1


class DivergenceError(BetaconvError, ArithmeticError):
    """A fractional integral failed its convergence certificate."""


class ConsistencyError(BetaconvError, ArithmeticError):
    """Two independent numerical routes disagree."""


class ResolutionError(BetaconvError, ArithmeticError):
    """A grid is too coarse (or too short) for the requested operation."""


class RecoveryInstabilityError(BetaconvError, ArithmeticError):
    pass


class InsufficientTailError(BetaconvError, ValueError):
    """Too few observations in the lower tail to estimate an index."""


class VerificationFailure(BetaconvError):
    exit_code = 3


class BoundaryWarning(UserWarning):
    """Equal indices, where the leading-order law needs a finer argument."""
