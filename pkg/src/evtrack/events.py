"""Event and event-stream containers.

An event is the sensor primitive: a microsecond timestamp, a pixel
coordinate and a polarity bit. Streams keep events in column arrays so
slicing and windowing stay vectorised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import NonMonotoneTimestamp, OutOfBoundsEvent

__all__ = ["SensorGeometry", "Event", "EventStream"]


@dataclass(frozen=True)
class SensorGeometry:
    """Sensor pixel-array dimensions."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be at least 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Event:
    """One sensor event: time in microseconds, pixel position, polarity 0/1."""

    t: int
    x: int
    y: int
    p: int


class EventStream:
    """Time-ordered events over a fixed sensor geometry.

    Columns are numpy arrays (t: uint64 microseconds, x/y: uint16,
    p: uint8). Timestamps are non-decreasing; coordinates lie inside the
    geometry; polarity is 0 or 1. These invariants are checked on
    construction unless ``validate=False``.
    """

    __slots__ = ("geometry", "t", "x", "y", "p")

    def __init__(
        self,
        geometry: SensorGeometry,
        t: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        p: np.ndarray,
        *,
        validate: bool = True,
    ) -> None:
        self.geometry = geometry
        self.t = np.ascontiguousarray(t, dtype=np.uint64)
        self.x = np.ascontiguousarray(x, dtype=np.uint16)
        self.y = np.ascontiguousarray(y, dtype=np.uint16)
        self.p = np.ascontiguousarray(p, dtype=np.uint8)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns must have equal length")
        if validate:
            self.validate()

    @classmethod
    def from_events(cls, geometry: SensorGeometry, events: Iterable[Event]) -> "EventStream":
        evs = list(events)
        return cls(
            geometry,
            np.array([e.t for e in evs], dtype=np.uint64),
            np.array([e.x for e in evs], dtype=np.uint16),
            np.array([e.y for e in evs], dtype=np.uint16),
            np.array([e.p for e in evs], dtype=np.uint8),
        )

    @classmethod
    def empty(cls, geometry: SensorGeometry) -> "EventStream":
        z = np.array([], dtype=np.uint64)
        return cls(geometry, z, z, z, z, validate=False)

    def validate(self) -> None:
        """Raise if any stream invariant is violated."""
        if len(self.t) == 0:
            return
        if np.any(self.t[1:] < self.t[:-1]):
            i = int(np.argmax(self.t[1:] < self.t[:-1]))
            raise NonMonotoneTimestamp(
                f"timestamp decreases at record {i + 1}: {self.t[i]} -> {self.t[i + 1]}"
            )
        if np.any(self.x >= self.geometry.width) or np.any(self.y >= self.geometry.height):
            bad = np.flatnonzero(
                (self.x >= self.geometry.width) | (self.y >= self.geometry.height)
            )[0]
            raise OutOfBoundsEvent(
                f"event {int(bad)} at ({int(self.x[bad])}, {int(self.y[bad])}) outside "
                f"{self.geometry.width}x{self.geometry.height}"
            )
        if np.any(self.p > 1):
            bad = int(np.flatnonzero(self.p > 1)[0])
            raise OutOfBoundsEvent(f"event {bad} has polarity {int(self.p[bad])}, expected 0 or 1")

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.t)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def slice_time(self, t_start: int, t_end: int) -> "EventStream":
        """Events with t_start <= t < t_end, positions found by binary search."""
        lo = int(np.searchsorted(self.t, t_start, side="left"))
        hi = int(np.searchsorted(self.t, t_end, side="left"))
        return EventStream(
            self.geometry, self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi],
            validate=False,
        )
