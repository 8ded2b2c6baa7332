"""Scoring of tracker output against ground truth.

Predictions and ground truth are matched per frame by greedy
descending-IoU one-to-one matching; precision/recall/F1 are swept over
IoU thresholds, and detection probability counts ground-truth objects
matched at least once anywhere along their trajectory. Ground truth is
linearly interpolated to the prediction timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .boxes import BoxF, interpolate_boxes, iou
from .errors import EmptyGroundTruth
from .eot import LOCKED, TRACKING, TrackSnapshot

__all__ = [
    "GroundTruthRecord",
    "MatchResult",
    "EvalRow",
    "EvalReport",
    "default_thresholds",
    "match_frame",
    "pr_sweep",
    "detection_probability",
    "format_report",
]

MATCHING_RULE = "greedy descending-IoU one-to-one"


@dataclass(frozen=True)
class GroundTruthRecord:
    """One annotated box of one object at one time."""

    object_id: int
    t: int
    box: BoxF
    class_label: str = ""


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int, float], ...]  # (pred index, gt index, iou) of TPs


@dataclass(frozen=True)
class EvalRow:
    theta: float
    precision: float
    recall: float
    f1: float
    detection_prob: float
    detected_object_ids: tuple[int, ...]


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    object_ids: tuple[int, ...]
    n_frames: int


def default_thresholds() -> list[float]:
    """IoU sweep 0.05 .. 0.95 in steps of 0.05."""
    return [round(0.05 * i, 2) for i in range(1, 20)]


def match_frame(
    pred: Sequence[BoxF], gt: Sequence[BoxF], theta: float
) -> MatchResult:
    """One-to-one matching of one frame's boxes at an IoU threshold.

    All pred/gt pairs are ranked by descending IoU and matched
    greedily; matched pairs with IoU >= theta are true positives,
    leftover predictions false positives, leftover ground truth false
    negatives. Ties are broken by (pred index, gt index) for
    determinism.
    """
    scored = []
    for pi, pb in enumerate(pred):
        for gi, gb in enumerate(gt):
            v = iou(pb, gb)
            if v > 0.0:
                scored.append((v, pi, gi))
    scored.sort(key=lambda s: (-s[0], s[1], s[2]))
    used_p: set[int] = set()
    used_g: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    for v, pi, gi in scored:
        if v < theta or pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        pairs.append((pi, gi, v))
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(pred) - tp, fn=len(gt) - tp, pairs=tuple(pairs))


def _gt_trajectories(
    gt_records: Sequence[GroundTruthRecord],
) -> dict[int, tuple[list[int], list[BoxF]]]:
    trajs: dict[int, tuple[list[int], list[BoxF]]] = {}
    for rec in gt_records:
        times, boxes = trajs.setdefault(rec.object_id, ([], []))
        times.append(rec.t)
        boxes.append(rec.box)
    for oid, (times, _) in trajs.items():
        if any(times[i] > times[i + 1] for i in range(len(times) - 1)):
            raise ValueError(f"ground truth for object {oid} is not time-ordered")
    return trajs


def _frames(
    snapshots: Sequence[TrackSnapshot],
    gt_records: Sequence[GroundTruthRecord],
    include_tracking: bool,
) -> list[tuple[int, list[BoxF], list[int], list[BoxF]]]:
    """Per prediction timestamp: (t, pred boxes, alive gt ids, gt boxes)."""
    states = (LOCKED, TRACKING) if include_tracking else (LOCKED,)
    by_t: dict[int, list[BoxF]] = {}
    for s in snapshots:
        if s.state in states:
            by_t.setdefault(s.t, []).append(s.box)
    trajs = _gt_trajectories(gt_records)
    frames = []
    for t in sorted(by_t):
        gt_ids: list[int] = []
        gt_boxes: list[BoxF] = []
        for oid in sorted(trajs):
            times, boxes = trajs[oid]
            if times[0] <= t <= times[-1]:
                gt_ids.append(oid)
                gt_boxes.append(interpolate_boxes(times, boxes, t))
        frames.append((t, by_t[t], gt_ids, gt_boxes))
    return frames


def pr_sweep(
    snapshots: Sequence[TrackSnapshot],
    gt_records: Sequence[GroundTruthRecord],
    thresholds: Sequence[float] | None = None,
    *,
    include_tracking: bool = False,
) -> EvalReport:
    """Precision/recall/F1 and detection probability over an IoU sweep.

    Frames are the distinct prediction timestamps; ground truth is
    interpolated to them, an object counting only while its annotation
    span covers the frame. Precision and recall with an empty
    denominator are reported as 0.

    Args:
        snapshots: tracker output rows (all tracks, all times).
        gt_records: ground-truth annotations.
        thresholds: strictly increasing IoU thresholds in (0, 1);
            default 0.05..0.95 step 0.05.
        include_tracking: also count tracking-state snapshots as
            predictions (default locked only).

    Raises:
        EmptyGroundTruth: if gt_records is empty.
    """
    if not gt_records:
        raise EmptyGroundTruth("evaluation requires at least one ground-truth record")
    if thresholds is None:
        thresholds = default_thresholds()
    thresholds = list(thresholds)
    if any(not (0.0 < th < 1.0) for th in thresholds):
        raise ValueError("thresholds must lie in (0, 1)")
    if any(thresholds[i] >= thresholds[i + 1] for i in range(len(thresholds) - 1)):
        raise ValueError("thresholds must be strictly increasing")

    frames = _frames(snapshots, gt_records, include_tracking)
    all_ids = tuple(sorted({r.object_id for r in gt_records}))
    rows: list[EvalRow] = []
    for th in thresholds:
        tp = fp = fn = 0
        detected: set[int] = set()
        for _, pred_boxes, gt_ids, gt_boxes in frames:
            m = match_frame(pred_boxes, gt_boxes, th)
            tp += m.tp
            fp += m.fp
            fn += m.fn
            for _, gi, _ in m.pairs:
                detected.add(gt_ids[gi])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        rows.append(
            EvalRow(
                theta=th,
                precision=precision,
                recall=recall,
                f1=f1,
                detection_prob=len(detected) / len(all_ids),
                detected_object_ids=tuple(sorted(detected)),
            )
        )
    return EvalReport(rows=tuple(rows), object_ids=all_ids, n_frames=len(frames))


def detection_probability(
    snapshots: Sequence[TrackSnapshot],
    gt_records: Sequence[GroundTruthRecord],
    theta: float,
    *,
    include_tracking: bool = False,
) -> float:
    """Fraction of GT objects with at least one TP match at threshold theta."""
    report = pr_sweep(
        snapshots, gt_records, [theta], include_tracking=include_tracking
    )
    return report.rows[0].detection_prob


def format_report(report: EvalReport) -> str:
    """Human-readable table of the sweep."""
    lines = [
        f"matching: {MATCHING_RULE}; {report.n_frames} frames, "
        f"{len(report.object_ids)} ground-truth objects",
        f"{'theta':>6} {'precision':>10} {'recall':>10} {'f1':>10} {'det_prob':>10}",
    ]
    for r in report.rows:
        lines.append(
            f"{r.theta:>6.2f} {r.precision:>10.6f} {r.recall:>10.6f} "
            f"{r.f1:>10.6f} {r.detection_prob:>10.6f}"
        )
    return "\n".join(lines)
