"""Exception types raised across the package."""


class ActiveNewtonError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ActiveNewtonError, ValueError):
    """Array shapes are inconsistent with the problem dimension."""


class RankDeficient(ActiveNewtonError):
    """Constraint gradients are (numerically) linearly dependent."""


class NoConvergence(ActiveNewtonError):
    """An inner iteration did not reach its tolerance."""


class PreconditionViolated(ActiveNewtonError, ValueError):
    """Inputs fall outside the domain where an operation is defined."""


class Unsupported(ActiveNewtonError):
    """The requested operation is not available for this variant."""


class InfeasiblePoint(ActiveNewtonError, ValueError):
    """A point required to lie in the feasible set does not."""


class SingularLinearization(ActiveNewtonError):
    """The linearized system is singular (transversality fails)."""


class InsufficientData(ActiveNewtonError, ValueError):
    """Not enough usable samples to fit a convergence order."""


class Degenerate(ActiveNewtonError):
    """A brute-force oracle found no solution or several solutions."""


class ResampleLimit(ActiveNewtonError):
    """Random instance generation exceeded its rejection budget."""


class IdentificationStall(ActiveNewtonError):
    """Projection iterations never settled on a stable active set.

    The iterate records collected before giving up are kept on
    ``records`` so callers can still report the trace.
    """

    def __init__(self, message, records=()):
        super().__init__(message)
        self.records = list(records)
