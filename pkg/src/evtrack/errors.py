"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "EvTrackError",
    "MalformedHeader",
    "TruncatedRecord",
    "MalformedRecord",
    "MalformedRow",
    "OutOfBoundsEvent",
    "NonMonotoneTimestamp",
    "IoFailure",
    "NonPositiveDt",
    "MissingPreOcclusionSize",
    "OutOfRange",
    "EmptyGroundTruth",
    "InvalidSpec",
    "InvalidConfig",
]


class EvTrackError(Exception):
    """Base class for all package-specific errors."""


class MalformedHeader(EvTrackError):
    """File header is missing, has a bad magic, or violates the layout."""


class TruncatedRecord(EvTrackError):
    """File ends before the declared record count is satisfied."""


class MalformedRecord(EvTrackError):
    """A record's fields violate the format (bad polarity, nonzero padding, garbage)."""


class MalformedRow(EvTrackError):
    """A CSV row has the wrong arity or unparseable fields."""


class OutOfBoundsEvent(EvTrackError):
    """An event's pixel coordinates fall outside the sensor geometry."""


class NonMonotoneTimestamp(EvTrackError):
    """Timestamps decrease where a non-decreasing sequence is required."""


class IoFailure(EvTrackError):
    """Underlying OS-level read or write failed."""


class NonPositiveDt(EvTrackError):
    """A time delta that must be positive (or non-negative) is not."""


class MissingPreOcclusionSize(EvTrackError):
    """Occlusion resolution needs a size recorded at occlusion onset and none exists."""


class OutOfRange(EvTrackError):
    """A query time lies outside the supported interval."""


class EmptyGroundTruth(EvTrackError):
    """Evaluation was asked to run against an empty ground-truth set."""


class InvalidSpec(EvTrackError):
    """A scene specification is structurally or physically invalid."""


class InvalidConfig(EvTrackError):
    """A configuration document has unknown keys or out-of-domain values."""
