"""Axis-aligned boxes and the geometric primitives built on them."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = ["BoxF", "overlap_area", "overlap_ratio", "iou", "union_box", "lerp_box"]


@dataclass(frozen=True)
class BoxF:
    """Axis-aligned box: top-left corner (x, y), width w, height h.

    Coordinates are continuous; w and h are non-negative.
    """

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def translate(self, dx: float, dy: float) -> "BoxF":
        return BoxF(self.x + dx, self.y + dy, self.w, self.h)


def overlap_area(a: BoxF, b: BoxF) -> float:
    """Area of the intersection of two boxes, 0 when they do not meet."""
    ow = min(a.right, b.right) - max(a.x, b.x)
    oh = min(a.bottom, b.bottom) - max(a.y, b.y)
    if ow <= 0.0 or oh <= 0.0:
        return 0.0
    return ow * oh


def overlap_ratio(a: BoxF, b: BoxF) -> float:
    """Intersection area normalised by the smaller box's area.

    Returns 0 when either box is degenerate, so a zero-area box never
    matches anything.
    """
    smaller = min(a.area, b.area)
    if smaller <= 0.0:
        return 0.0
    return overlap_area(a, b) / smaller


def iou(a: BoxF, b: BoxF) -> float:
    """Intersection over union; 0 when both boxes are degenerate."""
    inter = overlap_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def union_box(boxes: Iterable[BoxF]) -> BoxF:
    """Smallest box covering every input box. Requires at least one box."""
    it = iter(boxes)
    try:
        first = next(it)
    except StopIteration:
        raise ValueError("union_box needs at least one box") from None
    x0, y0, x1, y1 = first.x, first.y, first.right, first.bottom
    for b in it:
        x0 = min(x0, b.x)
        y0 = min(y0, b.y)
        x1 = max(x1, b.right)
        y1 = max(y1, b.bottom)
    return BoxF(x0, y0, x1 - x0, y1 - y0)


def lerp_box(a: BoxF, b: BoxF, lam: float) -> BoxF:
    """Componentwise linear interpolation: a at lam=0, b at lam=1."""
    return BoxF(
        a.x + (b.x - a.x) * lam,
        a.y + (b.y - a.y) * lam,
        a.w + (b.w - a.w) * lam,
        a.h + (b.h - a.h) * lam,
    )


def interpolate_boxes(times: Sequence[int], boxes: Sequence[BoxF], t: int) -> BoxF:
    """Linear interpolation of a box trajectory at time t.

    ``times`` must be sorted non-decreasing and as long as ``boxes``.
    The caller is responsible for range-checking t against the span;
    here t outside [times[0], times[-1]] is a ValueError.
    """
    if len(times) == 0 or len(times) != len(boxes):
        raise ValueError("times and boxes must be equal-length and non-empty")
    if t < times[0] or t > times[-1]:
        raise ValueError(f"t={t} outside [{times[0]}, {times[-1]}]")
    j = bisect.bisect_right(times, t)
    if j >= len(times):
        return boxes[-1]
    if j == 0:  # t == times[0] handled above; defensive
        return boxes[0]
    t0, t1 = times[j - 1], times[j]
    if t1 == t0:
        return boxes[j - 1]
    lam = (t - t0) / (t1 - t0)
    return lerp_box(boxes[j - 1], boxes[j], lam)
