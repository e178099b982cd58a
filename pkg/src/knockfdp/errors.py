"""Exception types shared across the package."""


class KnockfdpError(Exception):
    """Base class for all package-specific errors."""


class EmptyAfterPreprocessing(KnockfdpError):
    """Raised when dropping zero statistics leaves nothing to work with."""


class UnknownOriginalId(KnockfdpError, KeyError):
    """Raised when a query references an id that was never uploaded."""


class DroppedZeroId(UnknownOriginalId):
    """Raised when a query references an id whose statistic was zero.

    Kept distinct from :class:`UnknownOriginalId` so callers can tell a typo
    from a variable that was silently removed during preprocessing.
    """


class InfeasibleK(KnockfdpError):
    """Raised when no v in [p] satisfies the tail constraint for the given k."""


class InvalidStepSize(KnockfdpError, ValueError):
    """Raised when a calibration step size is not strictly positive."""


class PlanMismatch(KnockfdpError):
    """Raised when a (v, k) plan's horizon differs from the statistics' p."""


class OracleSizeExceeded(KnockfdpError):
    """Raised when a brute-force oracle is asked to enumerate too large a problem."""
