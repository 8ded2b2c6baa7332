"""Frame-based Events Overlap Tracker.

Assignment is by overlap between velocity-predicted track boxes and
region proposals; matched tracks update through weighted averages of
prediction and measurement; pairs of tracks merging into one proposal
enter an occlusion mode resolved with the pre-occlusion sizes; stale
tracks are freed after a grace period or when they leave the sensor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .boxes import BoxF, interpolate_boxes, overlap_area, overlap_ratio, union_box
from .errors import MissingPreOcclusionSize, NonPositiveDt, OutOfRange
from .events import EventStream, SensorGeometry
from .framer import FramerConfig, RegionProposal, proposals_from_stream

logger = logging.getLogger(__name__)

__all__ = [
    "TRACKING",
    "LOCKED",
    "Track",
    "TrackSnapshot",
    "EotConfig",
    "OcclusionContext",
    "AssignmentPlan",
    "EotState",
    "assign_proposals",
    "update_track",
    "merge_shared_proposals",
    "compute_occlusion_context",
    "resolve_occlusion",
    "cleanup",
    "interpolate",
    "step",
    "run_eot",
]

TRACKING = "tracking"
LOCKED = "locked"


@dataclass
class Track:
    """One tracked object. A slot with no object has no Track at all."""

    id: int
    box: BoxF
    vx: float = 0.0
    vy: float = 0.0
    state: str = TRACKING
    t_last: int = 0
    unlock_count: int = 0
    pre_occlusion_size: tuple[float, float] | None = None

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class TrackSnapshot:
    """Serialized view of a non-free track at one frame time."""

    track_id: int
    t: int
    box: BoxF
    state: str
    vx: float
    vy: float


@dataclass(frozen=True)
class EotConfig:
    max_trackers: int = 8
    overlap_ratio_threshold: float = 0.2
    alpha: float = 0.5
    max_unlocks: int = 3
    velocity_position_only: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.overlap_ratio_threshold < 1.0):
            raise ValueError("overlap_ratio_threshold must be in (0, 1)")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must be in [0, 1)")
        if self.max_trackers < 1:
            raise ValueError("max_trackers must be >= 1")
        if self.max_unlocks < 0:
            raise ValueError("max_unlocks must be >= 0")


@dataclass(frozen=True)
class OcclusionContext:
    """Occlusion branch selectors for an evaluated pair (hvo is from a's view)."""

    cd: bool
    wi: bool
    hvo: bool


def predict_box(track: Track, t: int) -> BoxF:
    """Track box advanced by its own velocity to time t."""
    dt_s = (t - track.t_last) / 1e6
    return track.box.translate(track.vx * dt_s, track.vy * dt_s)


@dataclass
class AssignmentPlan:
    """Raw overlap edges between predicted tracks and proposals.

    ``edges[i]`` is (track_index, proposal_index, ratio) for every pair
    over the threshold. ``by_proposal``/``by_track`` index the same
    edges; ``unassigned`` lists proposals with no edge at all.
    """

    edges: list[tuple[int, int, float]] = field(default_factory=list)
    by_proposal: dict[int, list[int]] = field(default_factory=dict)
    by_track: dict[int, list[int]] = field(default_factory=dict)
    unassigned: list[int] = field(default_factory=list)


def assign_proposals(
    tracks: Sequence[Track],
    proposals: Sequence[RegionProposal],
    t: int,
    cfg: EotConfig,
) -> AssignmentPlan:
    """Overlap-ratio matching of predicted track boxes against proposals.

    Each track box is advanced by its velocity over t - t_last; the
    ratio is intersection area over the smaller of the two areas, and
    pairs strictly above the threshold become candidate edges. Shared
    proposals (occlusion candidates) and shared tracks (fragment merge
    groups) are both visible in the returned plan.
    """
    plan = AssignmentPlan()
    predicted = [predict_box(tr, t) for tr in tracks]
    for ti, pbox in enumerate(predicted):
        for pi, prop in enumerate(proposals):
            ratio = overlap_ratio(pbox, prop.box)
            if ratio > cfg.overlap_ratio_threshold:
                plan.edges.append((ti, pi, ratio))
                plan.by_proposal.setdefault(pi, []).append(ti)
                plan.by_track.setdefault(ti, []).append(pi)
    plan.unassigned = [pi for pi in range(len(proposals)) if pi not in plan.by_proposal]
    return plan


def update_track(track: Track, r_new: BoxF, t: int, cfg: EotConfig) -> Track:
    """Weighted-average update of box and velocity from a matched region.

    Position blends the measurement with the velocity-predicted previous
    position; size blends with the previous size (no size rate).
    Velocity blends the per-frame displacement (position delta plus,
    unless disabled, the size delta) against the previous estimate.

    Args:
        track: track being updated; must have been matched.
        r_new: matched region (a proposal box or a merged group box).
        t: frame end time in microseconds.
        cfg: tracker configuration.

    Returns:
        The updated track (new instance). State advances
        tracking -> locked; locked stays locked.

    Raises:
        NonPositiveDt: if t <= track.t_last.
    """
    dt_us = t - track.t_last
    if dt_us <= 0:
        raise NonPositiveDt(f"update at t={t} not after t_last={track.t_last}")
    dt_s = dt_us / 1e6
    a = cfg.alpha
    x = (1.0 - a) * r_new.x + a * (track.box.x + track.vx * dt_s)
    y = (1.0 - a) * r_new.y + a * (track.box.y + track.vy * dt_s)
    w = (1.0 - a) * r_new.w + a * track.box.w
    h = (1.0 - a) * r_new.h + a * track.box.h
    dx = r_new.x - track.box.x
    dy = r_new.y - track.box.y
    if not cfg.velocity_position_only:
        dx += r_new.w - track.box.w
        dy += r_new.h - track.box.h
    vx = (1.0 - a) * dx / dt_s + a * track.vx
    vy = (1.0 - a) * dy / dt_s + a * track.vy
    return replace(
        track,
        box=BoxF(x, y, w, h),
        vx=vx,
        vy=vy,
        state=LOCKED if track.state in (TRACKING, LOCKED) else TRACKING,
        t_last=t,
        unlock_count=0,
    )


def merge_shared_proposals(group: Sequence[BoxF]) -> BoxF:
    """Bounding box over proposals sharing one tracker (plus its predicted box).

    The caller includes the tracker's predicted box in the group; a
    single-element group returns that box unchanged.
    """
    return union_box(group)


def compute_occlusion_context(
    a: Track, b: Track, shared_w: float, prev_shared_w: float
) -> OcclusionContext:
    """Branch selectors from the pair's velocities and the shared width trend.

    cd: the combined velocity exceeds both individual speeds (common
    direction); wi: the shared region grew since the previous occluded
    frame; hvo: a is faster than b.
    """
    cd = math.hypot(a.vx + b.vx, a.vy + b.vy) > max(a.speed(), b.speed())
    wi = shared_w > prev_shared_w
    hvo = a.speed() > b.speed()
    return OcclusionContext(cd=cd, wi=wi, hvo=hvo)


def _occluded_box(track: Track, shared: BoxF, cd: bool, wi: bool, hvo_self: bool) -> BoxF:
    if track.pre_occlusion_size is None:
        raise MissingPreOcclusionSize(f"track {track.id} has no recorded pre-occlusion size")
    w_o, h_o = track.pre_occlusion_size
    if not wi:
        return shared
    if (not cd) or hvo_self:
        return BoxF(shared.x + shared.w - w_o, shared.y + shared.h - h_o, w_o, h_o)
    return BoxF(shared.x, shared.y, w_o, h_o)


def resolve_occlusion(
    a: Track, b: Track, shared: BoxF, ctx: OcclusionContext
) -> tuple[BoxF, BoxF]:
    """Boxes for an occluded pair given the shared region.

    While the shared region shrinks (wi false) both tracks ride it;
    while it grows, each track takes its pre-occlusion size anchored at
    the corner its role implies: the faster (or opposite-direction)
    track at the bottom-right, the slower same-direction track at the
    top-left. ctx.hvo expresses a's view; b's is derived by swapping
    roles.

    Raises:
        MissingPreOcclusionSize: if either track lacks the onset size.
    """
    box_a = _occluded_box(a, shared, ctx.cd, ctx.wi, ctx.hvo)
    box_b = _occluded_box(b, shared, ctx.cd, ctx.wi, b.speed() > a.speed())
    return box_a, box_b


def cleanup(
    tracks: list[Track],
    matched_ids: set[int],
    geometry: SensorGeometry,
    t: int,
    cfg: EotConfig,
) -> list[Track]:
    """Free lost tracks after the frame's assignments.

    tracking-state tracks are freed on their first unmatched frame;
    locked tracks get a grace of max_unlocks unmatched frames. Any
    track whose predicted center leaves the sensor is freed regardless.
    """
    survivors: list[Track] = []
    for tr in tracks:
        if tr.id not in matched_ids:
            if tr.state == TRACKING:
                continue
            tr.unlock_count += 1
            if tr.unlock_count > cfg.max_unlocks:
                continue
        cx, cy = predict_box(tr, t).center
        if not (0.0 <= cx < geometry.width and 0.0 <= cy < geometry.height):
            continue
        survivors.append(tr)
    return survivors


def interpolate(history: Sequence[TrackSnapshot], t: int) -> BoxF:
    """Linearly interpolated box of one track's history at time t.

    Args:
        history: snapshots of a single track, time-ordered.
        t: query time in microseconds, within the history span
            (endpoints included; at a snapshot time the stored box is
            returned exactly).

    Raises:
        OutOfRange: if t is outside [first, last] snapshot time.
    """
    if not history:
        raise OutOfRange("empty history")
    times = [s.t for s in history]
    if t < times[0] or t > times[-1]:
        raise OutOfRange(f"t={t} outside track span [{times[0]}, {times[-1]}]")
    return interpolate_boxes(times, [s.box for s in history], t)


@dataclass
class _PairState:
    """Book-keeping for one occluded pair, keyed by (id_a, id_b), id_a < id_b."""

    onset_box: dict[int, BoxF]
    onset_t: dict[int, int]
    frozen_v: dict[int, tuple[float, float]]
    shared_box: BoxF
    last_shared_w: float


@dataclass
class EotState:
    """Mutable whole-tracker state threaded through step()."""

    tracks: list[Track] = field(default_factory=list)
    pairs: dict[tuple[int, int], _PairState] = field(default_factory=dict)
    next_id: int = 0
    last_t: int | None = None


def _future_overlap(a: Track, b: Track, frame_dt_us: int) -> bool:
    # Velocity-projected boxes at one or two frame steps ahead.
    for n in (1, 2):
        dt_s = frame_dt_us * n / 1e6
        pa = a.box.translate(a.vx * dt_s, a.vy * dt_s)
        pb = b.box.translate(b.vx * dt_s, b.vy * dt_s)
        if overlap_area(pa, pb) > 0.0:
            return True
    return False


def step(
    state: EotState,
    proposals: Sequence[RegionProposal],
    t: int,
    cfg: EotConfig,
    geometry: SensorGeometry,
) -> tuple[EotState, list[TrackSnapshot]]:
    """One tracker frame: assignment, occlusion handling, updates, cleanup.

    Args:
        state: tracker state from the previous frame (mutated and
            returned).
        proposals: region proposals of the frame ending at t.
        t: frame end time in microseconds.
        cfg: tracker configuration.
        geometry: sensor dimensions, for the out-of-bounds check.

    Returns:
        The advanced state and one snapshot per non-free track.
    """
    by_id = {tr.id: tr for tr in state.tracks}
    index_of = {tr.id: i for i, tr in enumerate(state.tracks)}
    plan = assign_proposals(state.tracks, proposals, t, cfg)
    edges = list(plan.edges)
    consumed: set[int] = set()
    matched: set[int] = set()
    frame_dt = t - state.last_t if state.last_t is not None else None

    def _apply_occlusion_frame(key: tuple[int, int], pi: int) -> None:
        pair = state.pairs[key]
        a, b = by_id[key[0]], by_id[key[1]]
        shared = proposals[pi].box
        ctx = compute_occlusion_context(a, b, shared.w, pair.last_shared_w)
        box_a, box_b = resolve_occlusion(a, b, shared, ctx)
        for tr, box in ((a, box_a), (b, box_b)):
            tr.box = box
            tr.state = LOCKED
            tr.unlock_count = 0
            tr.t_last = t
            matched.add(tr.id)
        pair.shared_box = shared
        pair.last_shared_w = shared.w
        consumed.add(pi)

    # Continue or dissolve existing occlusion pairs. A pair persists
    # while exactly one proposal intersects its stored blob region.
    for key in sorted(state.pairs):
        pair = state.pairs[key]
        if key[0] not in by_id or key[1] not in by_id:
            for tid in key:
                if tid in by_id:
                    by_id[tid].pre_occlusion_size = None
            del state.pairs[key]
            continue
        hits = [
            pi
            for pi in range(len(proposals))
            if pi not in consumed and overlap_area(pair.shared_box, proposals[pi].box) > 0.0
        ]
        if len(hits) == 1:
            _apply_occlusion_frame(key, hits[0])
            edges = [e for e in edges if e[0] not in (index_of[key[0]], index_of[key[1]])]
        else:
            # Blob split or vanished: dead-reckon members from their
            # onset boxes with the frozen velocities, then let normal
            # assignment re-acquire them this frame.
            member_idx = (index_of[key[0]], index_of[key[1]])
            edges = [e for e in edges if e[0] not in member_idx]
            for tid in key:
                tr = by_id[tid]
                vx, vy = pair.frozen_v[tid]
                el_s = (tr.t_last - pair.onset_t[tid]) / 1e6
                tr.box = pair.onset_box[tid].translate(vx * el_s, vy * el_s)
                tr.vx, tr.vy = vx, vy
                tr.pre_occlusion_size = None
                pbox = predict_box(tr, t)
                for pi, prop in enumerate(proposals):
                    if pi in consumed:
                        continue
                    ratio = overlap_ratio(pbox, prop.box)
                    if ratio > cfg.overlap_ratio_threshold:
                        edges.append((index_of[tid], pi, ratio))
            del state.pairs[key]

    # Occlusion onset: exactly two unpaired tracks over the threshold
    # on one proposal, predicted to overlap within two frame steps.
    in_pair = {tid for key in state.pairs for tid in key}
    for pi in range(len(proposals)):
        if pi in consumed:
            continue
        contenders = sorted(
            ((e[2], state.tracks[e[0]].id, e[0]) for e in edges if e[1] == pi),
            key=lambda c: (-c[0], c[1]),
        )
        contenders = [c for c in contenders if state.tracks[c[2]].id not in in_pair]
        if len(contenders) < 2:
            continue
        if len(contenders) > 2:
            logger.warning(
                "proposal %d contested by %d tracks at t=%d; occlusion handling "
                "supports pairs only, falling back to best-ratio assignment",
                pi, len(contenders), t,
            )
            continue
        if frame_dt is None:
            continue
        ia, ib = contenders[0][2], contenders[1][2]
        a, b = state.tracks[ia], state.tracks[ib]
        if not _future_overlap(a, b, frame_dt):
            continue
        key = (min(a.id, b.id), max(a.id, b.id))
        for tr in (a, b):
            tr.pre_occlusion_size = (tr.box.w, tr.box.h)
        state.pairs[key] = _PairState(
            onset_box={a.id: a.box, b.id: b.box},
            onset_t={a.id: a.t_last, b.id: b.t_last},
            frozen_v={a.id: (a.vx, a.vy), b.id: (b.vx, b.vy)},
            shared_box=proposals[pi].box,
            last_shared_w=proposals[pi].box.w,
        )
        in_pair.update(key)
        _apply_occlusion_frame(key, pi)
        edges = [e for e in edges if e[0] not in (ia, ib)]

    # Remaining contested proposals: best ratio wins, lower id on ties.
    winner_of: dict[int, int] = {}
    for ti, pi, ratio in edges:
        if pi in consumed:
            continue
        cur = winner_of.get(pi)
        if cur is None:
            winner_of[pi] = ti
        else:
            cur_ratio = next(r for tti, ppi, r in edges if tti == cur and ppi == pi)
            if (ratio, -state.tracks[ti].id) > (cur_ratio, -state.tracks[cur].id):
                winner_of[pi] = ti

    won: dict[int, list[int]] = {}
    for pi, ti in sorted(winner_of.items()):
        won.setdefault(ti, []).append(pi)

    for ti in sorted(won):
        tr = state.tracks[ti]
        group = [proposals[pi].box for pi in won[ti]]
        if len(group) == 1:
            r_eff = group[0]
        else:
            r_eff = merge_shared_proposals(group + [predict_box(tr, t)])
        state.tracks[ti] = update_track(tr, r_eff, t, cfg)
        matched.add(tr.id)

    # Proposals nobody reached bootstrap fresh tracks while capacity lasts.
    leftovers = [
        pi for pi in range(len(proposals)) if pi not in consumed and pi not in winner_of
    ]
    for pi in sorted(leftovers, key=lambda pi: (proposals[pi].box.y, proposals[pi].box.x)):
        if len(state.tracks) >= cfg.max_trackers:
            break
        tr = Track(id=state.next_id, box=proposals[pi].box, state=TRACKING, t_last=t)
        state.next_id += 1
        state.tracks.append(tr)
        matched.add(tr.id)

    state.tracks = cleanup(state.tracks, matched, geometry, t, cfg)
    alive = {tr.id for tr in state.tracks}
    state.pairs = {k: v for k, v in state.pairs.items() if k[0] in alive and k[1] in alive}
    state.last_t = t

    snapshots = [
        TrackSnapshot(tr.id, t, tr.box, tr.state, tr.vx, tr.vy)
        for tr in sorted(state.tracks, key=lambda tr: tr.id)
    ]
    return state, snapshots


def run_eot(
    stream: EventStream,
    framer_cfg: FramerConfig,
    eot_cfg: EotConfig,
    *,
    progress: bool = False,
) -> list[TrackSnapshot]:
    """Frame the stream and run the tracker over every frame in order."""
    state = EotState()
    out: list[TrackSnapshot] = []
    for t_end, proposals in proposals_from_stream(stream, framer_cfg):
        state, snaps = step(state, proposals, t_end, eot_cfg, stream.geometry)
        out.extend(snaps)
        if progress:
            logger.info(
                "frame t=%d: %d proposals, %d tracks", t_end, len(proposals), len(state.tracks)
            )
    return out
