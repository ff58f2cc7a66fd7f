"""Exception types raised across the package."""


class CdprError(Exception):
    """Base class for all package errors."""


class DegenerateConfiguration(CdprError, ValueError):
    """End effector coincides with a cable anchor (zero-length cable)."""


class InfeasibleEquilibrium(CdprError, ValueError):
    """No nonnegative, bounded tensions balance gravity at this position."""


class ActionOutOfBounds(CdprError, ValueError):
    pass


class StepBeforeReset(CdprError, RuntimeError):
    pass


class AllCandidatesDiverged(CdprError, RuntimeError):
    pass


class DimensionMismatch(CdprError, ValueError):
    pass


class ActionOutOfSupport(CdprError, ValueError):
    pass


class NonFiniteGradient(CdprError, FloatingPointError):
    pass


class EmptyBatch(CdprError, ValueError):
    pass


class InsufficientReplay(CdprError, ValueError):
    pass


class TrajectoryLeavesWorkspace(CdprError, ValueError):
    pass


class EmptySequence(CdprError, ValueError):
    pass


class ConfigError(CdprError, ValueError):
    """Bad or unknown configuration key/value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class PolicyFileError(CdprError, ValueError):
    """Corrupt, truncated or inconsistent policy file."""


class FormatVersionMismatch(PolicyFileError):
    pass


class TruncatedPayload(PolicyFileError):
    pass


class HeaderMismatch(PolicyFileError, DimensionMismatch):
    """Header fields disagree with each other or with the payload."""
