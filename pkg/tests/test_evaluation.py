"""Evaluation: greedy per-frame matching and the precision/recall sweep."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from evtrack.boxes import BoxF, iou
from evtrack.eot import LOCKED, TRACKING, TrackSnapshot
from evtrack.errors import EmptyGroundTruth
from evtrack.evaluation import (
    GroundTruthRecord,
    default_thresholds,
    detection_probability,
    format_report,
    match_frame,
    pr_sweep,
)


def snap(track_id, t, box, state=LOCKED):
    return TrackSnapshot(track_id=track_id, t=t, box=box, state=state, vx=0.0, vy=0.0)


def greedy_oracle(pred, gt, theta):
    """Independent restatement: repeatedly take the best remaining pair."""
    remaining = {
        (pi, gi): iou(pb, gb)
        for (pi, pb), (gi, gb) in itertools.product(enumerate(pred), enumerate(gt))
    }
    remaining = {k: v for k, v in remaining.items() if v > 0.0 and v >= theta}
    pairs = []
    while remaining:
        (pi, gi), v = min(remaining.items(), key=lambda kv: (-kv[1], kv[0]))
        pairs.append((pi, gi, v))
        remaining = {k: w for k, w in remaining.items() if k[0] != pi and k[1] != gi}
    return pairs


def random_boxes(rng, n):
    return [
        BoxF(float(rng.integers(0, 40)), float(rng.integers(0, 40)),
             float(rng.integers(1, 20)), float(rng.integers(1, 20)))
        for _ in range(n)
    ]


class TestDefaultThresholds:
    def test_nineteen_steps_of_five_percent(self):
        th = default_thresholds()
        assert th[0] == 0.05
        assert th[-1] == 0.95
        assert len(th) == 19
        assert all(round(b - a, 2) == 0.05 for a, b in zip(th, th[1:]))


class TestMatchFrame:
    def test_perfect_match(self):
        b = BoxF(0, 0, 10, 10)
        m = match_frame([b], [b], 0.5)
        assert (m.tp, m.fp, m.fn) == (1, 0, 0)
        assert m.pairs == ((0, 0, 1.0),)

    def test_below_threshold_is_fp_plus_fn(self):
        m = match_frame([BoxF(0, 0, 10, 10)], [BoxF(8, 0, 10, 10)], 0.5)
        assert (m.tp, m.fp, m.fn) == (0, 1, 1)

    def test_greedy_takes_best_pair_first(self):
        # Both predictions overlap gt0 only; the closer one wins it and
        # the other is left unmatched even though it also clears theta.
        gt = [BoxF(0, 0, 10, 10), BoxF(20, 0, 10, 10)]
        pred = [BoxF(1, 0, 10, 10), BoxF(2, 0, 10, 10)]
        m = match_frame(pred, gt, 0.5)
        assert (m.tp, m.fp, m.fn) == (1, 1, 1)
        assert m.pairs == ((0, 0, pytest.approx(90 / 110)),)

    def test_one_to_one_even_when_pred_covers_two(self):
        pred = [BoxF(0, 0, 10, 20)]
        gt = [BoxF(0, 0, 10, 10), BoxF(0, 10, 10, 10)]
        m = match_frame(pred, gt, 0.4)
        assert (m.tp, m.fp, m.fn) == (1, 0, 1)
        # Equal IoU 0.5 with both; tie broken toward the lower gt index.
        assert m.pairs == ((0, 0, 0.5),)

    def test_tie_break_pred_then_gt_index(self):
        b = BoxF(0, 0, 10, 10)
        m = match_frame([b, b], [b, b], 0.5)
        assert m.pairs == ((0, 0, 1.0), (1, 1, 1.0))

    def test_empty_inputs(self):
        assert match_frame([], [], 0.5) == match_frame([], [], 0.5)
        assert (match_frame([], [], 0.5).tp, match_frame([], [], 0.5).fp) == (0, 0)
        m = match_frame([BoxF(0, 0, 5, 5)], [], 0.5)
        assert (m.tp, m.fp, m.fn) == (0, 1, 0)
        m = match_frame([], [BoxF(0, 0, 5, 5)], 0.5)
        assert (m.tp, m.fp, m.fn) == (0, 0, 1)

    def test_disjoint_boxes_never_match(self):
        m = match_frame([BoxF(0, 0, 5, 5)], [BoxF(50, 50, 5, 5)], 0.01)
        assert m.tp == 0

    def test_matches_independent_greedy_restatement(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            pred = random_boxes(rng, int(rng.integers(0, 6)))
            gt = random_boxes(rng, int(rng.integers(0, 6)))
            theta = float(rng.uniform(0.05, 0.95))
            m = match_frame(pred, gt, theta)
            expect = greedy_oracle(pred, gt, theta)
            assert [(pi, gi) for pi, gi, _ in m.pairs] == [
                (pi, gi) for pi, gi, _ in expect
            ]
            assert m.tp == len(expect)
            assert m.tp + m.fp == len(pred)
            assert m.tp + m.fn == len(gt)
            assert len({pi for pi, _, _ in m.pairs}) == m.tp
            assert len({gi for _, gi, _ in m.pairs}) == m.tp
            assert all(v >= theta for _, _, v in m.pairs)


class TestPrSweep:
    def test_perfect_tracking_scores_one_everywhere(self):
        gt = [
            GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(0, 100_000, BoxF(100, 0, 10, 10)),
        ]
        snaps = [
            snap(0, 0, BoxF(0, 0, 10, 10)),
            snap(0, 50_000, BoxF(50, 0, 10, 10)),  # interpolated gt position
            snap(0, 100_000, BoxF(100, 0, 10, 10)),
        ]
        report = pr_sweep(snaps, gt)
        assert report.n_frames == 3
        assert report.object_ids == (0,)
        for row in report.rows:
            assert row.precision == 1.0
            assert row.recall == 1.0
            assert row.f1 == 1.0
            assert row.detection_prob == 1.0
            assert row.detected_object_ids == (0,)

    def test_rows_follow_threshold_order(self):
        gt = [GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10))]
        report = pr_sweep([snap(0, 0, BoxF(0, 0, 10, 10))], gt, [0.1, 0.9])
        assert [r.theta for r in report.rows] == [0.1, 0.9]

    def test_locked_only_unless_opted_in(self):
        gt = [
            GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(0, 100_000, BoxF(0, 0, 10, 10)),
        ]
        snaps = [snap(0, 50_000, BoxF(0, 0, 10, 10), state=TRACKING)]
        strict = pr_sweep(snaps, gt, [0.5])
        assert strict.n_frames == 0
        assert strict.rows[0].recall == 0.0
        loose = pr_sweep(snaps, gt, [0.5], include_tracking=True)
        assert loose.n_frames == 1
        assert loose.rows[0].recall == 1.0

    def test_object_counts_only_inside_its_annotation_span(self):
        gt = [
            GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(0, 100_000, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(1, 200_000, BoxF(50, 50, 10, 10)),
            GroundTruthRecord(1, 300_000, BoxF(50, 50, 10, 10)),
        ]
        snaps = [
            snap(0, 50_000, BoxF(0, 0, 10, 10)),  # inside object 0's span
            snap(0, 150_000, BoxF(0, 0, 10, 10)),  # between spans: pure FP
        ]
        report = pr_sweep(snaps, gt, [0.5])
        row = report.rows[0]
        assert row.precision == 0.5  # 1 TP of 2 predictions
        assert row.recall == 1.0  # the only live gt was found
        assert row.detection_prob == 0.5  # object 1 never seen
        assert row.detected_object_ids == (0,)

    def test_no_predictions_scores_zero(self):
        gt = [GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10))]
        report = pr_sweep([], gt, [0.5])
        assert report.n_frames == 0
        assert report.rows[0].precision == 0.0
        assert report.rows[0].recall == 0.0
        assert report.rows[0].f1 == 0.0

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(EmptyGroundTruth):
            pr_sweep([snap(0, 0, BoxF(0, 0, 10, 10))], [])

    @pytest.mark.parametrize("bad", [[0.0], [1.0], [-0.1], [0.5, 0.5], [0.6, 0.3]])
    def test_threshold_validation(self, bad):
        gt = [GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10))]
        with pytest.raises(ValueError):
            pr_sweep([], gt, bad)

    def test_unordered_ground_truth_rejected(self):
        gt = [
            GroundTruthRecord(0, 100_000, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10)),
        ]
        with pytest.raises(ValueError):
            pr_sweep([snap(0, 0, BoxF(0, 0, 10, 10))], gt, [0.5])

    def test_precision_and_recall_never_increase_with_theta(self):
        # Denominators are fixed per sweep (leftovers always count), so
        # both metrics inherit monotonicity from the TP count.
        rng = np.random.default_rng(7)
        for _ in range(20):
            gt = []
            snaps = []
            for oid in range(int(rng.integers(1, 4))):
                base = random_boxes(rng, 1)[0]
                gt.append(GroundTruthRecord(oid, 0, base))
                gt.append(GroundTruthRecord(oid, 200_000, base.translate(20.0, 0.0)))
            for t in (0, 100_000, 200_000):
                for b in random_boxes(rng, int(rng.integers(0, 4))):
                    snaps.append(snap(int(rng.integers(0, 5)), t, b))
            report = pr_sweep(snaps, gt)
            precisions = [r.precision for r in report.rows]
            recalls = [r.recall for r in report.rows]
            assert all(a >= b for a, b in zip(precisions, precisions[1:]))
            assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_ground_truth_tracks_itself_perfectly(self, scenes):
        # Replaying a scene's own truth as predictions is the identity
        # case: every metric is 1 at every threshold.
        _, gt = scenes["s1"]
        snaps = [snap(r.object_id, r.t, r.box) for r in gt]
        report = pr_sweep(snaps, gt)
        assert all(r.precision == 1.0 and r.recall == 1.0 for r in report.rows)
        assert all(r.detection_prob == 1.0 for r in report.rows)


class TestDetectionProbability:
    def test_matches_sweep_row(self):
        gt = [
            GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10)),
            GroundTruthRecord(1, 0, BoxF(50, 0, 10, 10)),
        ]
        snaps = [snap(0, 0, BoxF(0, 0, 10, 10))]
        assert detection_probability(snaps, gt, 0.5) == 0.5
        assert detection_probability(snaps, gt, 0.5) == pr_sweep(snaps, gt, [0.5]).rows[0].detection_prob


class TestFormatReport:
    def test_layout(self):
        gt = [GroundTruthRecord(0, 0, BoxF(0, 0, 10, 10))]
        report = pr_sweep([snap(0, 0, BoxF(0, 0, 10, 10))], gt, [0.5])
        text = format_report(report)
        lines = text.splitlines()
        assert "1 frames, 1 ground-truth objects" in lines[0]
        assert lines[1].split() == ["theta", "precision", "recall", "f1", "det_prob"]
        assert lines[2] == "  0.50   1.000000   1.000000   1.000000   1.000000"
