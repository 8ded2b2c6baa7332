"""Binary-frame accumulation, median denoising, and region proposals.

Events are aggregated into fixed-period 1-bit frames; a median filter
removes isolated noise pixels; proposals come from maximal runs in the
column and row histograms of the filtered frame, tightened and filtered
by size and set-pixel density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np
from scipy import ndimage

from .boxes import BoxF
from .errors import IoFailure
from .events import EventStream, SensorGeometry

__all__ = [
    "FramerConfig",
    "BinaryFrame",
    "RegionProposal",
    "accumulate_frame",
    "median_filter",
    "extract_proposals",
    "iter_frames",
    "proposals_from_stream",
    "write_pgm",
]


@dataclass(frozen=True)
class FramerConfig:
    frame_period_us: int = 66_000
    median_kernel: int = 3
    hist_threshold: int = 2
    min_box_side: int = 3
    min_density: float = 0.05

    def __post_init__(self) -> None:
        if self.frame_period_us <= 0:
            raise ValueError("frame_period_us must be > 0")
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ValueError("median_kernel must be odd and >= 1")
        if self.hist_threshold < 1:
            raise ValueError("hist_threshold must be >= 1")
        if self.min_box_side < 1:
            raise ValueError("min_box_side must be >= 1")
        if not (0.0 <= self.min_density <= 1.0):
            raise ValueError("min_density must be in [0, 1]")


@dataclass(frozen=True)
class BinaryFrame:
    """One aggregation window as a 1-bit activity image."""

    t_start: int
    t_end: int
    geometry: SensorGeometry
    pixels: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.geometry.height, self.geometry.width):
            raise ValueError(
                f"pixel grid {self.pixels.shape} does not match geometry "
                f"{self.geometry.height}x{self.geometry.width}"
            )


@dataclass(frozen=True)
class RegionProposal:
    """Candidate object box extracted from one frame, stamped at frame end."""

    box: BoxF
    t: int


def accumulate_frame(
    events: EventStream, t_start: int, t_end: int, geometry: SensorGeometry | None = None
) -> BinaryFrame:
    """OR-accumulate the events of [t_start, t_end) into a binary frame.

    Polarity is ignored: any event at a pixel sets it. Events outside
    the window are excluded by binary search on the (sorted) times.
    """
    geometry = geometry or events.geometry
    window = events.slice_time(t_start, t_end)
    pixels = np.zeros((geometry.height, geometry.width), dtype=bool)
    pixels[window.y.astype(np.intp), window.x.astype(np.intp)] = True
    return BinaryFrame(t_start, t_end, geometry, pixels)


def median_filter(frame: BinaryFrame, kernel: int) -> BinaryFrame:
    """Majority vote over a kernel x kernel neighborhood, zero-padded borders."""
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 1")
    if kernel == 1:
        return frame
    filtered = ndimage.median_filter(
        frame.pixels.astype(np.uint8), size=kernel, mode="constant", cval=0
    ).astype(bool)
    return BinaryFrame(frame.t_start, frame.t_end, frame.geometry, filtered)


def _runs_at_least(hist: np.ndarray, threshold: int) -> list[tuple[int, int]]:
    """Maximal [start, end) runs where hist >= threshold."""
    mask = hist >= threshold
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def extract_proposals(frame: BinaryFrame, cfg: FramerConfig) -> list[RegionProposal]:
    """Region proposals from the frame's two 1-D projection histograms.

    Candidate boxes are the cross product of X-runs and Y-runs of the
    column/row histograms at the threshold; each candidate is tightened
    by re-running the histograms locally, then dropped if a side is
    under min_box_side or the set-pixel density is under min_density.
    Results are sorted by (y, x) of the top-left corner.
    """
    px = frame.pixels
    hx = px.sum(axis=0)
    hy = px.sum(axis=1)
    x_runs = _runs_at_least(hx, cfg.hist_threshold)
    y_runs = _runs_at_least(hy, cfg.hist_threshold)
    boxes: list[tuple[int, int, int, int]] = []
    for y0, y1 in y_runs:
        for x0, x1 in x_runs:
            sub = px[y0:y1, x0:x1]
            cols = np.flatnonzero(sub.sum(axis=0) >= cfg.hist_threshold)
            rows = np.flatnonzero(sub.sum(axis=1) >= cfg.hist_threshold)
            if cols.size == 0 or rows.size == 0:
                continue
            bx0 = x0 + int(cols[0])
            bx1 = x0 + int(cols[-1]) + 1
            by0 = y0 + int(rows[0])
            by1 = y0 + int(rows[-1]) + 1
            w = bx1 - bx0
            h = by1 - by0
            if w < cfg.min_box_side or h < cfg.min_box_side:
                continue
            count = int(px[by0:by1, bx0:bx1].sum())
            # Tolerance guards the equality case against float rounding
            # of min_density * w * h.
            if count < cfg.min_density * w * h - 1e-9:
                continue
            if (bx0, by0, w, h) not in boxes:
                boxes.append((bx0, by0, w, h))
    boxes.sort(key=lambda b: (b[1], b[0]))
    return [RegionProposal(BoxF(float(x), float(y), float(w), float(h)), frame.t_end) for x, y, w, h in boxes]


def iter_frames(stream: EventStream, cfg: FramerConfig) -> Iterator[BinaryFrame]:
    """Back-to-back frames [k*P, (k+1)*P) covering every event exactly once.

    Windows start at t=0 and run through the window containing the last
    event; windows with no events yield all-zero frames. An empty
    stream yields nothing.
    """
    if len(stream) == 0:
        return
    period = cfg.frame_period_us
    t_max = int(stream.t[-1])
    n_frames = t_max // period + 1
    bounds = np.arange(0, (n_frames + 1) * period, period, dtype=np.uint64)
    splits = np.searchsorted(stream.t, bounds, side="left")
    for k in range(n_frames):
        lo, hi = int(splits[k]), int(splits[k + 1])
        pixels = np.zeros((stream.geometry.height, stream.geometry.width), dtype=bool)
        pixels[stream.y[lo:hi].astype(np.intp), stream.x[lo:hi].astype(np.intp)] = True
        yield BinaryFrame(k * period, (k + 1) * period, stream.geometry, pixels)


def proposals_from_stream(
    stream: EventStream, cfg: FramerConfig
) -> Iterator[tuple[int, list[RegionProposal]]]:
    """Filtered per-frame proposals for the whole stream, in frame order."""
    for frame in iter_frames(stream, cfg):
        filtered = median_filter(frame, cfg.median_kernel)
        yield frame.t_end, extract_proposals(filtered, cfg)


def write_pgm(frame: BinaryFrame, sink: str | BinaryIO) -> None:
    """Debug export as binary PGM (P5), set pixels scaled to 255."""
    data = (frame.pixels.astype(np.uint8) * 255).tobytes()
    header = f"P5\n{frame.geometry.width} {frame.geometry.height}\n255\n".encode("ascii")
    try:
        if isinstance(sink, str):
            with open(sink, "wb") as fh:
                fh.write(header)
                fh.write(data)
        else:
            sink.write(header)
            sink.write(data)
    except OSError as exc:
        raise IoFailure(f"PGM write failed: {exc}") from exc
