"""Command-line pipeline: synthesize, convert, track, evaluate, interpolate.

Data goes to the path named by -o, or to stdout when -o is omitted;
diagnostics always go to stderr. Exit codes: 0 success, 1 usage error,
2 malformed input, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import BinaryIO, Sequence, TextIO

from . import config as config_mod
from . import io as io_mod
from . import synth as synth_mod
from .boxes import interpolate_boxes
from .ceot import process as ceot_process
from .eot import run_eot
from .errors import (
    EmptyGroundTruth,
    EvTrackError,
    InvalidConfig,
    InvalidSpec,
    IoFailure,
    MalformedHeader,
    MalformedRecord,
    MalformedRow,
    NonMonotoneTimestamp,
    OutOfBoundsEvent,
    OutOfRange,
    TruncatedRecord,
)
from .evaluation import pr_sweep
from .events import SensorGeometry

logger = logging.getLogger(__name__)

__all__ = ["main"]

_INPUT_ERRORS = (
    MalformedHeader,
    TruncatedRecord,
    MalformedRecord,
    MalformedRow,
    OutOfBoundsEvent,
    NonMonotoneTimestamp,
    InvalidSpec,
    InvalidConfig,
    IoFailure,
    EmptyGroundTruth,
    OutOfRange,
)


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _sniff_format(path: str | None, override: str | None) -> str:
    """Pick evs0/csv from an explicit flag or a file extension."""
    if override:
        return override
    if path is None:
        return "csv"
    lower = path.lower()
    if lower.endswith((".evs", ".evs0", ".bin")):
        return "evs0"
    if lower.endswith(".csv"):
        return "csv"
    raise UsageError(
        f"cannot infer format of {path!r}; pass --from/--to or --format"
    )


def _geometry_from_args(args: argparse.Namespace) -> SensorGeometry | None:
    if args.width is None and args.height is None:
        return None
    if args.width is None or args.height is None:
        raise UsageError("--width and --height must be given together")
    return SensorGeometry(args.width, args.height)


def _load_run_config(args: argparse.Namespace) -> config_mod.RunConfig:
    cfg = (
        config_mod.load_config(args.config)
        if getattr(args, "config", None)
        else config_mod.RunConfig()
    )
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _open_text_out(path: str | None) -> tuple[TextIO, bool]:
    if path is None:
        return sys.stdout, False
    try:
        return open(path, "w", encoding="ascii", newline=""), True
    except OSError as exc:
        raise IoFailure(f"cannot open {path!r} for writing: {exc}") from exc


def _open_binary_out(path: str | None) -> tuple[BinaryIO, bool]:
    if path is None:
        return sys.stdout.buffer, False
    try:
        return open(path, "wb"), True
    except OSError as exc:
        raise IoFailure(f"cannot open {path!r} for writing: {exc}") from exc


def _io_format(fmt: str) -> str:
    """CLI format names (evs0/csv) to io-layer names (binary/csv)."""
    return "binary" if fmt == "evs0" else "csv"


def _write_events_out(stream, path: str | None, fmt: str) -> None:
    if fmt == "evs0":
        sink, close = _open_binary_out(path)
    else:
        sink, close = _open_text_out(path)
    try:
        io_mod.write_events(stream, sink, fmt=_io_format(fmt))
    finally:
        if close:
            sink.close()


def _cmd_convert(args: argparse.Namespace) -> int:
    in_fmt = _sniff_format(args.input, args.from_format)
    out_fmt = _sniff_format(args.output, args.to_format)
    geometry = _geometry_from_args(args)
    if in_fmt == "csv" and geometry is None:
        raise UsageError("csv input requires --width and --height")
    stream = io_mod.read_events(args.input, fmt=_io_format(in_fmt), geometry=geometry)
    logger.info("read %d events (%s)", len(stream), in_fmt)
    _write_events_out(stream, args.output, out_fmt)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if (args.spec is None) == (args.standard is None):
        raise UsageError("pass exactly one of a spec file or --standard")
    if args.standard is not None:
        suite = synth_mod.standard_suite(seed=args.seed if args.seed is not None else 7)
        if args.standard not in suite:
            raise UsageError(
                f"unknown standard scene {args.standard!r}; "
                f"choose from {', '.join(sorted(suite))}"
            )
        spec = suite[args.standard]
    else:
        spec = synth_mod.load_spec(args.spec)
        if args.seed is not None:
            import dataclasses

            spec = dataclasses.replace(spec, rng_seed=args.seed)
    stream, gt = synth_mod.generate(spec)
    logger.info("generated %d events, %d ground-truth records", len(stream), len(gt))
    fmt = _sniff_format(args.output, args.format)
    _write_events_out(stream, args.output, fmt)
    if args.gt is not None:
        sink, close = _open_text_out(args.gt)
        try:
            io_mod.write_ground_truth(gt, sink)
        finally:
            if close:
                sink.close()
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    fmt = _sniff_format(args.input, args.format)
    geometry = _geometry_from_args(args)
    if fmt == "csv" and geometry is None:
        raise UsageError("csv input requires --width and --height")
    stream = io_mod.read_events(args.input, fmt=_io_format(fmt), geometry=geometry)
    logger.info("read %d events", len(stream))
    if args.algo == "eot":
        snaps = run_eot(stream, cfg.framer, cfg.eot, progress=args.verbose)
    else:
        snaps = ceot_process(stream, cfg.ceot, backend=args.backend)
    logger.info("emitted %d snapshots", len(snaps))
    sink, close = _open_text_out(args.output)
    try:
        io_mod.write_tracks(snaps, sink)
    finally:
        if close:
            sink.close()
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    predictions = io_mod.read_tracks(args.tracks)
    gt = io_mod.read_ground_truth(args.gt)
    thresholds = [args.theta] if args.theta is not None else list(cfg.thresholds)
    include_tracking = args.include_tracking or cfg.include_tracking
    report = pr_sweep(
        predictions, gt, thresholds=thresholds, include_tracking=include_tracking
    )
    sink, close = _open_text_out(args.output)
    try:
        io_mod.write_report(report, sink)
    finally:
        if close:
            sink.close()
    return 0


def _cmd_interp(args: argparse.Namespace) -> int:
    predictions = io_mod.read_tracks(args.tracks)
    by_id: dict[int, list] = {}
    for snap in predictions:
        by_id.setdefault(snap.track_id, []).append(snap)
    lines = []
    for track_id in sorted(by_id):
        snaps = sorted(by_id[track_id], key=lambda s: s.t)
        times = [s.t for s in snaps]
        if not times[0] <= args.t <= times[-1]:
            continue
        box = interpolate_boxes(times, [s.box for s in snaps], args.t)
        lines.append(
            f"{track_id},{args.t},{box.x:.4f},{box.y:.4f},{box.w:.4f},{box.h:.4f}"
        )
    if not lines:
        raise OutOfRange(f"no track's snapshot span covers t={args.t}")
    sink, close = _open_text_out(args.output)
    try:
        sink.write("track_id,t_us,x,y,w,h\n")
        for line in lines:
            sink.write(line + "\n")
    finally:
        if close:
            sink.close()
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="evtrack",
        description="Event-stream multi-object tracking pipeline.",
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="progress diagnostics on stderr"
    )
    parser.add_argument(
        "--print-default-config",
        action="store_true",
        help="emit the canonical default config JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("convert", help="convert events between csv and evs0 binary")
    p.add_argument("input", help="input events file")
    p.add_argument("-o", "--output", help="output path (stdout when omitted)")
    p.add_argument("--from", dest="from_format", choices=("evs0", "csv"))
    p.add_argument("--to", dest="to_format", choices=("evs0", "csv"))
    p.add_argument("--width", type=int, help="sensor width (csv input)")
    p.add_argument("--height", type=int, help="sensor height (csv input)")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("spec", nargs="?", help="scene spec JSON file")
    p.add_argument("--standard", help="named scene from the standard suite (s1..s6)")
    p.add_argument("-o", "--output", help="events output path (stdout when omitted)")
    p.add_argument("--gt", help="also write ground truth CSV here")
    p.add_argument("--format", choices=("evs0", "csv"), help="events output format")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("track", help="run a tracker over an event stream")
    p.add_argument("input", help="input events file")
    p.add_argument("--algo", required=True, choices=("eot", "ceot"))
    p.add_argument("--config", help="run config JSON")
    p.add_argument("-o", "--output", help="tracks CSV path (stdout when omitted)")
    p.add_argument("--format", choices=("evs0", "csv"), help="input format override")
    p.add_argument("--width", type=int, help="sensor width (csv input)")
    p.add_argument("--height", type=int, help="sensor height (csv input)")
    p.add_argument(
        "--backend",
        choices=("auto", "python", "numba"),
        default="auto",
        help="event-by-event tracker backend",
    )
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="score tracks against ground truth")
    p.add_argument("tracks", help="tracker output CSV")
    p.add_argument("gt", help="ground truth CSV")
    p.add_argument("-o", "--output", help="report CSV path (stdout when omitted)")
    p.add_argument("--config", help="run config JSON (threshold sweep)")
    p.add_argument("--theta", type=float, help="score a single IoU threshold")
    p.add_argument(
        "--include-tracking",
        action="store_true",
        help="score provisional snapshots too, not just locked ones",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("interp", help="interpolate track boxes at a timestamp")
    p.add_argument("tracks", help="tracker output CSV")
    p.add_argument("--t", type=int, required=True, help="query timestamp, microseconds")
    p.add_argument("-o", "--output", help="output path (stdout when omitted)")
    p.set_defaults(func=_cmd_interp)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.print_default_config:
            sys.stdout.write(config_mod.default_config_json())
            return 0
        if args.command is None:
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (EvTrackError, ValueError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
