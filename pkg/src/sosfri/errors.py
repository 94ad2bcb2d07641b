"""Exception and warning types raised across the package."""


class SosFriError(ValueError):
    """Base class for all errors raised by this package."""


class GridResolutionError(SosFriError):
    """A fine grid is too coarse for the pulse or sampling period it must resolve."""


class SupportMismatchError(SosFriError):
    """Sampling kernel support is incompatible with the stream kind."""


class BurstSpacingError(SosFriError):
    """Adjacent bursts are closer than the isolation threshold."""


class RankDeficientError(SosFriError):
    """A linear system that must have full column rank does not."""


class KernelDomainError(SosFriError):
    """A kernel was asked for a representation it cannot provide."""


class WaterfillingError(SosFriError):
    """The waterfilling search failed to bracket a valid multiplier."""


class ConditioningWarning(UserWarning):
    """Emitted when a diagonal correction is close to singular."""
