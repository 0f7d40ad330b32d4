"""Exception and warning types raised across the package."""


class QSealError(Exception):
    """Base class for all package errors."""


class ArityExceeded(QSealError, ValueError):
    pass


class NotNormalized(QSealError, ValueError):
    pass


class NotProductState(QSealError):
    pass


class RegisterEntangled(QSealError):
    """A register is part of a joint state and cannot be handled on its own."""


class CapacityExceeded(QSealError, ValueError):
    pass


class MalformedHeader(QSealError, ValueError):
    pass


class RNonSeparating(QSealError, ValueError):
    """The mask ``r`` annihilates every row of G, so ``c . r = 1`` has no solution in C."""


class BranchBudgetExceeded(QSealError):
    pass


class ProtocolViolation(QSealError):
    """Raised when a session breaks message order; carries the transcript so far."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class EmptySubsetWithUnitDemand(UserWarning):
    """A subset projector was built from an empty accepted set."""
