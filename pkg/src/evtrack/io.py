"""Reading and writing the package's on-disk formats.

Formats: the EVS0 fixed-record binary event format, the event CSV
("t_us,x,y,p"), the track snapshot CSV
("track_id,t_us,x,y,w,h,state,vx,vy"), the ground-truth CSV
("object_id,t_us,x,y,w,h,class"), and the evaluation report CSV
("theta,precision,recall,f1,detection_prob").
"""

from __future__ import annotations

import io as _stdio
import struct
from typing import BinaryIO, Sequence, TextIO

import numpy as np

from .boxes import BoxF
from .eot import LOCKED, TRACKING, TrackSnapshot
from .errors import (
    IoFailure,
    MalformedHeader,
    MalformedRecord,
    MalformedRow,
    TruncatedRecord,
)
from .evaluation import EvalReport, GroundTruthRecord
from .events import EventStream, SensorGeometry

__all__ = [
    "EVS0_MAGIC",
    "read_events",
    "write_events",
    "read_tracks",
    "write_tracks",
    "read_ground_truth",
    "write_ground_truth",
    "write_report",
]

EVS0_MAGIC = b"EVS0"
_HEADER = struct.Struct("<4sHHII")
_RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("pad", "u1", (3,))]
)
EVENT_CSV_HEADER = "t_us,x,y,p"
TRACK_CSV_HEADER = "track_id,t_us,x,y,w,h,state,vx,vy"
GT_CSV_HEADER = "object_id,t_us,x,y,w,h,class"
REPORT_CSV_HEADER = "theta,precision,recall,f1,detection_prob"

assert _RECORD_DTYPE.itemsize == 16


def _read_bytes(source: str | BinaryIO) -> bytes:
    try:
        if isinstance(source, str):
            with open(source, "rb") as fh:
                return fh.read()
        return source.read()
    except OSError as exc:
        raise IoFailure(f"read failed: {exc}") from exc


def _write_bytes(sink: str | BinaryIO, data: bytes) -> None:
    try:
        if isinstance(sink, str):
            with open(sink, "wb") as fh:
                fh.write(data)
        else:
            sink.write(data)
    except OSError as exc:
        raise IoFailure(f"write failed: {exc}") from exc


def _read_text(source: str | TextIO) -> str:
    try:
        if isinstance(source, str):
            with open(source, "r", encoding="ascii") as fh:
                return fh.read()
        return source.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"read failed: {exc}") from exc


def _write_text(sink: str | TextIO, text: str) -> None:
    try:
        if isinstance(sink, str):
            with open(sink, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        else:
            sink.write(text)
    except OSError as exc:
        raise IoFailure(f"write failed: {exc}") from exc


def read_events(
    source: str | BinaryIO | TextIO,
    fmt: str = "binary",
    geometry: SensorGeometry | None = None,
) -> EventStream:
    """Parse an event stream from EVS0 binary or CSV.

    Args:
        source: path or open file (binary for "binary", text for
            "csv").
        fmt: "binary" or "csv".
        geometry: required for CSV (the format has no header geometry);
            for binary it overrides the header fields when given.

    Raises:
        MalformedHeader: bad magic, short header, nonzero reserved
            field, or wrong CSV header line.
        TruncatedRecord: fewer payload bytes than the declared record
            count (trailing extra bytes are ignored).
        MalformedRecord: nonzero record padding, polarity > 1, or
            unparseable CSV fields.
        OutOfBoundsEvent, NonMonotoneTimestamp: stream invariant
            violations.
    """
    if fmt == "binary":
        return _read_events_binary(source, geometry)
    if fmt == "csv":
        if geometry is None:
            raise ValueError("CSV event input requires an explicit geometry")
        return _read_events_csv(source, geometry)
    raise ValueError(f"unknown event format {fmt!r}")


def _read_events_binary(
    source: str | BinaryIO, geometry: SensorGeometry | None
) -> EventStream:
    data = _read_bytes(source)
    if len(data) < _HEADER.size:
        raise MalformedHeader(f"file has {len(data)} bytes, header needs {_HEADER.size}")
    magic, width, height, reserved, count = _HEADER.unpack_from(data, 0)
    if magic != EVS0_MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}, expected {EVS0_MAGIC!r}")
    if reserved != 0:
        raise MalformedHeader(f"reserved header field must be 0, got {reserved}")
    if width < 1 or height < 1:
        raise MalformedHeader(f"invalid geometry {width}x{height}")
    need = _HEADER.size + count * _RECORD_DTYPE.itemsize
    if len(data) < need:
        raise TruncatedRecord(
            f"declared {count} records need {need} bytes, file has {len(data)}"
        )
    rec = np.frombuffer(data, dtype=_RECORD_DTYPE, count=count, offset=_HEADER.size)
    if count and rec["pad"].any():
        bad = int(np.flatnonzero(rec["pad"].any(axis=1))[0])
        raise MalformedRecord(f"record {bad} has nonzero reserved bytes")
    if count and (rec["p"] > 1).any():
        bad = int(np.flatnonzero(rec["p"] > 1)[0])
        raise MalformedRecord(f"record {bad} has polarity {int(rec['p'][bad])}")
    geo = geometry or SensorGeometry(width, height)
    return EventStream(geo, rec["t"], rec["x"], rec["y"], rec["p"])


def _read_events_csv(source: str | TextIO, geometry: SensorGeometry) -> EventStream:
    text = _read_text(source)
    lines = text.splitlines()
    if not lines or lines[0].strip() != EVENT_CSV_HEADER:
        got = lines[0].strip() if lines else "<empty>"
        raise MalformedHeader(f"expected header {EVENT_CSV_HEADER!r}, got {got!r}")
    t, x, y, p = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MalformedRecord(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            vals = [int(part) for part in parts]
        except ValueError as exc:
            raise MalformedRecord(f"line {lineno}: non-integer field") from exc
        if any(v < 0 for v in vals):
            raise MalformedRecord(f"line {lineno}: negative field")
        if vals[3] > 1:
            raise MalformedRecord(f"line {lineno}: polarity {vals[3]}")
        t.append(vals[0])
        x.append(vals[1])
        y.append(vals[2])
        p.append(vals[3])
    return EventStream(
        geometry,
        np.array(t, dtype=np.uint64),
        np.array(x, dtype=np.uint16),
        np.array(y, dtype=np.uint16),
        np.array(p, dtype=np.uint8),
    )


def write_events(
    stream: EventStream, sink: str | BinaryIO | TextIO, fmt: str = "binary"
) -> None:
    """Serialize a stream as EVS0 binary or CSV (see read_events)."""
    if fmt == "binary":
        if len(stream) > 0xFFFFFFFF:
            raise ValueError("EVS0 record count field is 32-bit")
        rec = np.zeros(len(stream), dtype=_RECORD_DTYPE)
        rec["t"] = stream.t
        rec["x"] = stream.x
        rec["y"] = stream.y
        rec["p"] = stream.p
        header = _HEADER.pack(
            EVS0_MAGIC, stream.geometry.width, stream.geometry.height, 0, len(stream)
        )
        _write_bytes(sink, header + rec.tobytes())
    elif fmt == "csv":
        out = _stdio.StringIO()
        out.write(EVENT_CSV_HEADER + "\n")
        for i in range(len(stream)):
            out.write(f"{int(stream.t[i])},{int(stream.x[i])},{int(stream.y[i])},{int(stream.p[i])}\n")
        _write_text(sink, out.getvalue())
    else:
        raise ValueError(f"unknown event format {fmt!r}")


_VALID_STATES = (TRACKING, LOCKED)


def write_tracks(snapshots: Sequence[TrackSnapshot], sink: str | TextIO) -> None:
    """Track snapshots as CSV, floats with 4 decimal places."""
    out = _stdio.StringIO()
    out.write(TRACK_CSV_HEADER + "\n")
    for s in snapshots:
        b = s.box
        out.write(
            f"{s.track_id},{s.t},{b.x:.4f},{b.y:.4f},{b.w:.4f},{b.h:.4f},"
            f"{s.state},{s.vx:.4f},{s.vy:.4f}\n"
        )
    _write_text(sink, out.getvalue())


def read_tracks(source: str | TextIO) -> list[TrackSnapshot]:
    """Parse a track snapshot CSV written by write_tracks.

    Raises:
        MalformedHeader: wrong header line.
        MalformedRow: wrong arity, unparseable fields, or unknown state.
    """
    text = _read_text(source)
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACK_CSV_HEADER:
        got = lines[0].strip() if lines else "<empty>"
        raise MalformedHeader(f"expected header {TRACK_CSV_HEADER!r}, got {got!r}")
    snaps: list[TrackSnapshot] = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise MalformedRow(f"line {lineno}: expected 9 fields, got {len(parts)}")
        try:
            track_id = int(parts[0])
            t = int(parts[1])
            x, y, w, h = (float(v) for v in parts[2:6])
            state = parts[6]
            vx, vy = float(parts[7]), float(parts[8])
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: unparseable field") from exc
        if state not in _VALID_STATES:
            raise MalformedRow(f"line {lineno}: unknown state {state!r}")
        snaps.append(TrackSnapshot(track_id, t, BoxF(x, y, w, h), state, vx, vy))
    return snaps


def write_ground_truth(records: Sequence[GroundTruthRecord], sink: str | TextIO) -> None:
    """Ground-truth records as CSV; the class column may be empty."""
    out = _stdio.StringIO()
    out.write(GT_CSV_HEADER + "\n")
    for r in records:
        b = r.box
        out.write(
            f"{r.object_id},{r.t},{b.x:.4f},{b.y:.4f},{b.w:.4f},{b.h:.4f},{r.class_label}\n"
        )
    _write_text(sink, out.getvalue())


def read_ground_truth(source: str | TextIO) -> list[GroundTruthRecord]:
    """Parse a ground-truth CSV written by write_ground_truth."""
    text = _read_text(source)
    lines = text.splitlines()
    if not lines or lines[0].strip() != GT_CSV_HEADER:
        got = lines[0].strip() if lines else "<empty>"
        raise MalformedHeader(f"expected header {GT_CSV_HEADER!r}, got {got!r}")
    records: list[GroundTruthRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise MalformedRow(f"line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            oid = int(parts[0])
            t = int(parts[1])
            x, y, w, h = (float(v) for v in parts[2:6])
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: unparseable field") from exc
        records.append(GroundTruthRecord(oid, t, BoxF(x, y, w, h), parts[6].strip()))
    return records


def write_report(report: EvalReport, sink: str | TextIO) -> None:
    """Evaluation sweep as CSV, one row per threshold."""
    out = _stdio.StringIO()
    out.write(REPORT_CSV_HEADER + "\n")
    for r in report.rows:
        out.write(
            f"{r.theta:.2f},{r.precision:.6f},{r.recall:.6f},{r.f1:.6f},"
            f"{r.detection_prob:.6f}\n"
        )
    _write_text(sink, out.getvalue())
