"""Exceptions raised by the merge toolkit."""


class MergeError(Exception):
    """Base class for all toolkit errors."""


class NotReached(MergeError, ValueError):
    """A trajectory never reaches the requested position."""


class OutOfSpan(MergeError, ValueError):
    """A requested time or position lies outside a trajectory's span."""


class HorizonTooShort(MergeError, ValueError):
    """The control horizon is shorter than the configured minimum."""


class OutOfWindow(MergeError, ValueError):
    """A control law was evaluated outside its validity window."""


class DegenerateSpeed(MergeError, ValueError):
    """The following vehicle is too slow for a time gap to be defined."""


class NeverResolved(MergeError):
    """The identification verdict was still pending at the merging time."""


class SchemaError(MergeError, ValueError):
    """A trajectory file does not follow the canonical schema."""


class EmptyFile(MergeError, ValueError):
    """A trajectory file has no rows."""


class NoConflict(MergeError):
    """No conflicting mainline vehicle was found for an on-ramp vehicle."""


class RejectionOverflow(MergeError):
    """Scenario generation gave up after too many rejected samples."""


class DegenerateSamples(MergeError, ValueError):
    """Samples are too small or constant for the requested statistic."""


class InvalidConfig(MergeError, ValueError):
    """Configuration values are out of range or inconsistent."""
