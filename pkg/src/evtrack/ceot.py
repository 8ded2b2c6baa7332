"""Continuous-time event-by-event tracker.

A fixed pool of rectangular trackers follows the event stream directly:
each event drags the position EMA of the tracker it falls in (or the
nearest inactive one), the inter-spike interval EMA gates activity, a
periodic cleanup retires stale trackers and merges duplicates, and
velocity/covariance gates flag occluding pairs whose size and velocity
are then frozen until their projections separate.

Velocity is estimated at cleanup ticks from the center displacement
over a four-tick baseline, not per event: a single event moves the
center EMA by a fraction of a pixel over tens of microseconds, so a
per-event displacement/dt quotient is noise three orders of magnitude
above the px/s scale the occlusion gates test.

The pure-Python path here is the reference; `_ceot_kernel` holds a
compiled mirror used for long streams. Both must produce bit-identical
snapshots.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boxes import BoxF
from .eot import LOCKED, TrackSnapshot
from .errors import NonPositiveDt
from .events import Event, EventStream, SensorGeometry

logger = logging.getLogger(__name__)

__all__ = [
    "CTracker",
    "CTrackerMotion",
    "CeotConfig",
    "AssignmentOutcome",
    "VelocityHistory",
    "VELOCITY_BASELINE_TICKS",
    "VELOCITY_WARMUP_TICKS",
    "assign_event",
    "update_ctracker",
    "periodic_cleanup",
    "occlusion_gates",
    "occlusion_gate_decision",
    "projected_overlap",
    "detect_occlusion",
    "process",
    "calibrate_activity_threshold",
    "splitmix64_next",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

VELOCITY_BASELINE_TICKS = 4

# A slot's velocity EMA is meaningless until several baseline-spanning
# samples have accumulated after its history was last reset (fresh
# slot, merge survivor). Occlusion onset compares velocities, so it is
# only tested between trackers past this warm-up; a not-yet-warmed
# overlapping pair is treated as duplicates and merged.
VELOCITY_WARMUP_TICKS = 2 * VELOCITY_BASELINE_TICKS


def splitmix64_next(state: int) -> tuple[int, float]:
    """Advance a splitmix64 state; returns (new state, uniform in [0, 1)).

    Kept bit-compatible with the compiled kernel's generator so both
    backends draw identical reinitialization coordinates.
    """
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, (z >> 11) * _INV53


@dataclass
class CTracker:
    """Tracker rectangle: center (x, y), half-sizes (dx, dy)."""

    x: float
    y: float
    dx: float
    dy: float
    active: bool
    isi: float  # inter-spike interval EMA, microseconds
    t_last: int

    def contains(self, ex: float, ey: float) -> bool:
        return abs(ex - self.x) <= self.dx and abs(ey - self.y) <= self.dy

    def box(self) -> BoxF:
        return BoxF(self.x - self.dx, self.y - self.dy, 2.0 * self.dx, 2.0 * self.dy)


@dataclass
class CTrackerMotion:
    """Velocity/covariance EMAs plus occlusion bookkeeping for one slot."""

    vx: float = 0.0
    vy: float = 0.0
    cxx: float = 0.0
    cxy: float = 0.0
    cyy: float = 0.0
    occluding_with: int = -1  # partner slot index, -1 when clear
    frozen_vx: float = 0.0
    frozen_vy: float = 0.0
    frozen_dx: float = 0.0
    frozen_dy: float = 0.0

    @property
    def cov(self) -> np.ndarray:
        return np.array([[self.cxx, self.cxy], [self.cxy, self.cyy]])

    @property
    def cov_trace(self) -> float:
        return self.cxx + self.cyy


class VelocityHistory:
    """Ring buffer of per-slot center positions sampled at cleanup ticks.

    Velocity samples are taken against the position
    VELOCITY_BASELINE_TICKS ticks back, giving a baseline long enough
    for real motion to clear the center EMA's jitter.
    """

    def __init__(self, n_slots: int) -> None:
        self.xs = np.zeros((n_slots, VELOCITY_BASELINE_TICKS))
        self.ys = np.zeros((n_slots, VELOCITY_BASELINE_TICKS))
        self.counts = np.zeros(n_slots, dtype=np.int64)

    def reset(self, i: int) -> None:
        self.counts[i] = 0


@dataclass(frozen=True)
class CeotConfig:
    pool_size: int = 8
    alpha: float = 0.95
    alpha_t: float = 0.9
    theta_active: float = 1.0e6  # microseconds * px^2
    cleanup_period_us: int = 25_000
    v_alpha: float = 20.0
    v_beta: float = 10.0
    p_threshold: float = 400.0
    occlusion_timestep_us: int = 25_000
    init_half_size: float = 15.0
    init_isi_us: float = 1.0e5
    size_adapt: str = "ema"  # "ema" | "fixed"
    # An active tracker only receives events its own rectangle contains,
    # and the mean |residual| of such events is about half the
    # half-size, so any gain below 2 contracts the box toward the
    # minimum no matter what it tracks. 2.2 grows the box whenever it
    # covers the object only partially and settles just above full
    # coverage.
    size_gain: float = 2.2
    # Event silhouettes are edge-dominated: a rectangle that collapses
    # onto a single one-pixel event line sees near-zero residuals and
    # the size EMA then holds it there. The floor must keep the
    # rectangle wide enough to straddle neighboring structure so it
    # can climb back out of that state.
    min_half_size: float = 10.0
    occlusion_axis: str = "both"  # "x_only" | "both"
    rng_seed: int = 7

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if not (0.0 < self.alpha_t < 1.0):
            raise ValueError("alpha_t must be in (0, 1)")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.cleanup_period_us <= 0:
            raise ValueError("cleanup_period_us must be > 0")
        if self.occlusion_timestep_us <= 0:
            raise ValueError("occlusion_timestep_us must be > 0")
        if self.size_adapt not in ("ema", "fixed"):
            raise ValueError("size_adapt must be 'ema' or 'fixed'")
        if self.occlusion_axis not in ("x_only", "both"):
            raise ValueError("occlusion_axis must be 'x_only' or 'both'")
        if self.init_half_size <= 0 or self.min_half_size <= 0:
            raise ValueError("half sizes must be > 0")


@dataclass(frozen=True)
class AssignmentOutcome:
    """Routing decision for one event.

    kind is "matched_active" (ids: every active tracker containing the
    event, pool order), "nearest_inactive" (ids: the single closest
    inactive slot), or "dropped" (ids empty).
    """

    kind: str
    ids: tuple[int, ...]


def assign_event(pool: Sequence[CTracker], e: Event) -> AssignmentOutcome:
    """Route an event per the containment-then-nearest rule.

    Active trackers containing the event win (all are reported; the
    first in pool order is the update target). Otherwise the inactive
    tracker with the closest center takes it; with no inactive tracker
    left the event is dropped.
    """
    ex, ey = float(e.x), float(e.y)
    matches = tuple(i for i, tr in enumerate(pool) if tr.active and tr.contains(ex, ey))
    if matches:
        return AssignmentOutcome("matched_active", matches)
    best = -1
    best_d = math.inf
    for i, tr in enumerate(pool):
        if tr.active:
            continue
        ddx = ex - tr.x
        ddy = ey - tr.y
        d = ddx * ddx + ddy * ddy
        if d < best_d:
            best, best_d = i, d
    if best >= 0:
        return AssignmentOutcome("nearest_inactive", (best,))
    return AssignmentOutcome("dropped", ())


def _update(
    tr: CTracker,
    mo: CTrackerMotion,
    ex: float,
    ey: float,
    et: int,
    inside: bool,
    cfg: CeotConfig,
    max_dx: float,
    max_dy: float,
    adapt_size: bool,
) -> None:
    """Core EMA update; float coordinates so cleanup can inject its own events.

    Order is fixed and mirrored by the compiled kernel: position, then
    isi/t_last (inside only), then covariance against the updated
    center, then size, then the activity decision. When size adapts it
    does so on every real event, inside the rectangle or not: far
    events must be able to grow the box toward the object, and for
    events inside a box of half-size d the expected residual is only
    about d/2, so an inside-only update would contract the box to the
    minimum no matter what it tracks. Velocity is not touched here; it
    is sampled at cleanup ticks.
    """
    if et < tr.t_last:
        raise NonPositiveDt("event timestamp precedes tracker's last update")
    dt_us = float(et - tr.t_last)
    a = cfg.alpha
    tr.x = a * tr.x + (1.0 - a) * ex
    tr.y = a * tr.y + (1.0 - a) * ey
    if inside:
        tr.isi = cfg.alpha_t * tr.isi + (1.0 - cfg.alpha_t) * dt_us
        tr.t_last = et
    rx = ex - tr.x
    ry = ey - tr.y
    mo.cxx = a * mo.cxx + (1.0 - a) * rx * rx
    mo.cxy = a * mo.cxy + (1.0 - a) * rx * ry
    mo.cyy = a * mo.cyy + (1.0 - a) * ry * ry
    if adapt_size and cfg.size_adapt == "ema":
        dx_new = a * tr.dx + (1.0 - a) * cfg.size_gain * abs(rx)
        dy_new = a * tr.dy + (1.0 - a) * cfg.size_gain * abs(ry)
        tr.dx = min(max(dx_new, cfg.min_half_size), max_dx)
        tr.dy = min(max(dy_new, cfg.min_half_size), max_dy)
    tr.active = tr.isi * tr.dx * tr.dy < cfg.theta_active


def update_ctracker(
    tr: CTracker,
    mo: CTrackerMotion,
    e: Event,
    inside: bool,
    cfg: CeotConfig,
    geometry: SensorGeometry | None = None,
) -> None:
    """Apply one assigned event to a tracker (mutates tr and mo).

    Args:
        tr, mo: the tracker slot and its motion state.
        e: the assigned event.
        inside: whether the event lies within the tracker rectangle
            (the spatial part of the containment test) — gates the
            isi/t_last update.
        cfg: tracker configuration.
        geometry: sensor dimensions; bounds the adaptive size when
            given.

    Raises:
        NonPositiveDt: if e.t < tr.t_last.
    """
    max_dx = geometry.width / 2.0 if geometry else math.inf
    max_dy = geometry.height / 2.0 if geometry else math.inf
    occluded = mo.occluding_with >= 0
    _update(
        tr, mo, float(e.x), float(e.y), e.t, inside, cfg, max_dx, max_dy,
        adapt_size=tr.active and not occluded,
    )


def occlusion_gates(
    a: tuple[CTracker, CTrackerMotion],
    b: tuple[CTracker, CTrackerMotion],
    cfg: CeotConfig,
) -> tuple[bool, bool, bool]:
    """(D_alpha, D_beta, P_d) for a candidate pair.

    Per axis, the velocity difference must clear v_alpha when both
    velocities share a sign, or v_beta when they differ (sign(0) is
    positive). The y axis participates unless occlusion_axis is
    "x_only". P_d requires both covariance traces under p_threshold.
    """
    _, ma = a
    _, mb = b
    axes = [(ma.vx, mb.vx)]
    if cfg.occlusion_axis == "both":
        axes.append((ma.vy, mb.vy))
    d_alpha = False
    d_beta = False
    for va, vb in axes:
        same_sign = (va >= 0.0) == (vb >= 0.0)
        if same_sign:
            d_alpha = d_alpha or abs(va - vb) > cfg.v_alpha
        else:
            d_beta = d_beta or abs(va - vb) > cfg.v_beta
    p_d = ma.cov_trace < cfg.p_threshold and mb.cov_trace < cfg.p_threshold
    return d_alpha, d_beta, p_d


def occlusion_gate_decision(d_alpha: bool, d_beta: bool, p_d: bool) -> bool:
    """Combine the gates: low covariance and either velocity condition."""
    return p_d and (d_alpha or d_beta)


def projected_overlap(
    a: tuple[CTracker, CTrackerMotion],
    b: tuple[CTracker, CTrackerMotion],
    cfg: CeotConfig,
    *,
    use_frozen: bool = False,
) -> bool:
    """Whether the pair's rectangles overlap one or two timesteps ahead.

    Centers advance by velocity times n * occlusion_timestep for
    n in {1, 2}; overlap is the inclusive per-axis distance test.
    """
    ta, ma = a
    tb, mb = b
    vax, vay = (ma.frozen_vx, ma.frozen_vy) if use_frozen else (ma.vx, ma.vy)
    vbx, vby = (mb.frozen_vx, mb.frozen_vy) if use_frozen else (mb.vx, mb.vy)
    for n in (1, 2):
        dt_s = cfg.occlusion_timestep_us * n / 1e6
        ddx = abs((ta.x + vax * dt_s) - (tb.x + vbx * dt_s))
        ddy = abs((ta.y + vay * dt_s) - (tb.y + vby * dt_s))
        if ddx <= ta.dx + tb.dx and ddy <= ta.dy + tb.dy:
            return True
    return False


def detect_occlusion(
    a: tuple[CTracker, CTrackerMotion],
    b: tuple[CTracker, CTrackerMotion],
    cfg: CeotConfig,
) -> bool:
    """Full occlusion-onset test: gates, duplicate veto, forward projection.

    Occlusion detection is anticipatory — two trackers approaching
    each other edge-first. A pair whose centers already lie inside
    each other's rectangles is two trackers on one object; that
    configuration belongs to the cleanup merge, and flagging it as an
    occlusion would exempt it from merging forever.
    """
    d_alpha, d_beta, p_d = occlusion_gates(a, b, cfg)
    if not occlusion_gate_decision(d_alpha, d_beta, p_d):
        return False
    ta, _ = a
    tb, _ = b
    a_inside_b = abs(ta.x - tb.x) <= tb.dx and abs(ta.y - tb.y) <= tb.dy
    b_inside_a = abs(tb.x - ta.x) <= ta.dx and abs(tb.y - ta.y) <= ta.dy
    if a_inside_b or b_inside_a:
        return False
    return projected_overlap(a, b, cfg)


def _clear_pair(motions: list[CTrackerMotion], i: int) -> None:
    j = motions[i].occluding_with
    motions[i].occluding_with = -1
    if j >= 0:
        motions[j].occluding_with = -1


def _flag_pair(pool: list[CTracker], motions: list[CTrackerMotion], i: int, j: int) -> None:
    """Mark i and j as an occluding pair and snapshot their frozen state."""
    motions[i].occluding_with = j
    motions[j].occluding_with = i
    for s in (i, j):
        motions[s].frozen_vx = motions[s].vx
        motions[s].frozen_vy = motions[s].vy
        motions[s].frozen_dx = pool[s].dx
        motions[s].frozen_dy = pool[s].dy


def _reinit_slot(
    pool: list[CTracker],
    motions: list[CTrackerMotion],
    gen: list[int],
    history: VelocityHistory,
    act_t: list[int],
    i: int,
    t_now: int,
    cfg: CeotConfig,
    geometry: SensorGeometry,
    rng_state: int,
    next_gen: int,
) -> tuple[int, int]:
    rng_state, ux = splitmix64_next(rng_state)
    rng_state, uy = splitmix64_next(rng_state)
    pool[i] = CTracker(
        x=ux * geometry.width,
        y=uy * geometry.height,
        dx=cfg.init_half_size,
        dy=cfg.init_half_size,
        active=False,
        isi=cfg.init_isi_us,
        t_last=t_now,
    )
    motions[i] = CTrackerMotion()
    history.reset(i)
    act_t[i] = -1
    gen[i] = next_gen
    return rng_state, next_gen + 1


def periodic_cleanup(
    pool: list[CTracker],
    motions: list[CTrackerMotion],
    gen: list[int],
    history: VelocityHistory,
    act_t: list[int],
    t_now: int,
    cfg: CeotConfig,
    geometry: SensorGeometry,
    rng_state: int,
    next_gen: int,
) -> tuple[int, int]:
    """One maintenance tick (mutates the pool in place).

    In order: velocity sampling against the center four ticks back
    (EMA skipped for occlusion-flagged slots — their velocity is
    frozen), a synthetic event at every slot's own center (inflating
    the isi of slots that stopped receiving real events), unflagging
    of occlusion pairs whose members died or whose projections
    separated, and merging of overlapping active trackers: mean
    center, the larger tracker's size when it contains the smaller's
    center (else the sum), the longer-established tracker keeps its
    identity, absorbed slot reinitialized at a seeded-random location,
    inactive, with a fresh id. An overlapping pair that instead passes
    the occlusion-onset test (both velocity-warmed) is flagged as
    occluding rather than merged, and a tracker already carrying the
    flag is left out of merging entirely until the flag clears.

    The synthetic event never adapts size: its residual is identically
    zero by construction, so letting it through the size EMA would
    shrink every starved slot to the minimum regardless of what it
    tracks. Size changes are driven by real events only.

    Returns:
        The advanced (rng_state, next_gen) pair.
    """
    max_dx = geometry.width / 2.0
    max_dy = geometry.height / 2.0
    n_hist = VELOCITY_BASELINE_TICKS
    baseline_s = cfg.cleanup_period_us * n_hist / 1e6
    a = cfg.alpha
    for i, (tr, mo) in enumerate(zip(pool, motions)):
        # Only an active tracker is following something; an inactive
        # slot being dragged toward an event cluster moves at hundreds
        # of px/s, and letting those jumps into the velocity EMA is
        # what the occlusion gates would later choke on.
        if not tr.active:
            history.counts[i] = 0
            continue
        slot = int(history.counts[i] % n_hist)
        if history.counts[i] >= n_hist and mo.occluding_with < 0:
            sx = (tr.x - history.xs[i, slot]) / baseline_s
            sy = (tr.y - history.ys[i, slot]) / baseline_s
            mo.vx = a * mo.vx + (1.0 - a) * sx
            mo.vy = a * mo.vy + (1.0 - a) * sy
        history.xs[i, slot] = tr.x
        history.ys[i, slot] = tr.y
        history.counts[i] += 1
    for tr, mo in zip(pool, motions):
        _update(
            tr, mo, tr.x, tr.y, t_now, True, cfg, max_dx, max_dy, adapt_size=False
        )
    for i, tr in enumerate(pool):
        if tr.active and act_t[i] < 0:
            act_t[i] = t_now
    for i, mo in enumerate(motions):
        j = mo.occluding_with
        if j > i:
            if not (pool[i].active and pool[j].active):
                _clear_pair(motions, i)
            elif not projected_overlap((pool[i], motions[i]), (pool[j], motions[j]), cfg):
                _clear_pair(motions, i)
    changed = True
    while changed:
        changed = False
        for i in range(len(pool)):
            # A flagged tracker never merges with anything: its
            # geometry is frozen for the duration of the occlusion and
            # the flagged overlap is exactly what merging would
            # destroy.
            if not pool[i].active or motions[i].occluding_with >= 0:
                continue
            for j in range(i + 1, len(pool)):
                if not pool[j].active or motions[j].occluding_with >= 0:
                    continue
                if (
                    abs(pool[i].x - pool[j].x) <= pool[i].dx + pool[j].dx
                    and abs(pool[i].y - pool[j].y) <= pool[i].dy + pool[j].dy
                ):
                    # Two distinct converging objects reach merge range
                    # before any event lands inside both rectangles, so
                    # the occlusion question must be asked here, first:
                    # a pair that passes the onset test is flagged and
                    # left unmerged.
                    if (
                        history.counts[i] >= VELOCITY_WARMUP_TICKS
                        and history.counts[j] >= VELOCITY_WARMUP_TICKS
                        and detect_occlusion(
                            (pool[i], motions[i]), (pool[j], motions[j]), cfg
                        )
                    ):
                        _flag_pair(pool, motions, i, j)
                        continue
                    # Size template follows the larger tracker; the
                    # tracker active since the earlier tick keeps its
                    # identity (slot id breaks ties), so an established
                    # track is never renamed by absorbing a freshly
                    # spawned overlapping one.
                    if pool[j].dx * pool[j].dy > pool[i].dx * pool[i].dy:
                        big, small = j, i
                    else:
                        big, small = i, j
                    if act_t[i] != act_t[j]:
                        s, o = (i, j) if act_t[i] < act_t[j] else (j, i)
                    else:
                        s, o = (i, j) if gen[i] < gen[j] else (j, i)
                    cx = (pool[i].x + pool[j].x) * 0.5
                    cy = (pool[i].y + pool[j].y) * 0.5
                    small_inside = (
                        abs(pool[small].x - pool[big].x) <= pool[big].dx
                        and abs(pool[small].y - pool[big].y) <= pool[big].dy
                    )
                    if small_inside:
                        ndx, ndy = pool[big].dx, pool[big].dy
                    else:
                        ndx = pool[i].dx + pool[j].dx
                        ndy = pool[i].dy + pool[j].dy
                    # Shift the survivor's stored centers by the merge
                    # jump so the velocity baseline stays continuous;
                    # resetting it here would restart the warm-up each
                    # time a transient duplicate is absorbed and leave
                    # the velocity estimate permanently stunted.
                    shift_x = cx - pool[s].x
                    shift_y = cy - pool[s].y
                    for h in range(VELOCITY_BASELINE_TICKS):
                        history.xs[s, h] = history.xs[s, h] + shift_x
                        history.ys[s, h] = history.ys[s, h] + shift_y
                    pool[s].x, pool[s].y = cx, cy
                    pool[s].dx, pool[s].dy = ndx, ndy
                    rng_state, next_gen = _reinit_slot(
                        pool, motions, gen, history, act_t, o, t_now, cfg,
                        geometry, rng_state, next_gen,
                    )
                    changed = True
                    break
            if changed:
                break
    return rng_state, next_gen


def _process_python(stream: EventStream, cfg: CeotConfig) -> list[TrackSnapshot]:
    geometry = stream.geometry
    max_dx = geometry.width / 2.0
    max_dy = geometry.height / 2.0
    rng_state = cfg.rng_seed & _MASK64
    pool: list[CTracker] = []
    motions: list[CTrackerMotion] = []
    gen: list[int] = []
    for i in range(cfg.pool_size):
        rng_state, ux = splitmix64_next(rng_state)
        rng_state, uy = splitmix64_next(rng_state)
        pool.append(
            CTracker(
                x=ux * geometry.width,
                y=uy * geometry.height,
                dx=cfg.init_half_size,
                dy=cfg.init_half_size,
                active=False,
                isi=cfg.init_isi_us,
                t_last=0,
            )
        )
        motions.append(CTrackerMotion())
        gen.append(i)
    history = VelocityHistory(cfg.pool_size)
    act_t = [-1] * cfg.pool_size
    next_gen = cfg.pool_size

    snaps: list[TrackSnapshot] = []
    next_tick = cfg.cleanup_period_us

    def run_tick(t_now: int, rng_state: int, next_gen: int) -> tuple[int, int]:
        rng_state, next_gen = periodic_cleanup(
            pool, motions, gen, history, act_t, t_now, cfg, geometry,
            rng_state, next_gen,
        )
        for i, tr in enumerate(pool):
            if tr.active:
                snaps.append(
                    TrackSnapshot(
                        gen[i], t_now, tr.box(), LOCKED, motions[i].vx, motions[i].vy
                    )
                )
        return rng_state, next_gen

    ts = stream.t
    exs = stream.x
    eys = stream.y
    for k in range(len(stream)):
        et = int(ts[k])
        ex = float(exs[k])
        ey = float(eys[k])
        while next_tick <= et:
            rng_state, next_gen = run_tick(next_tick, rng_state, next_gen)
            next_tick += cfg.cleanup_period_us
        m0 = -1
        m1 = -1
        for i, tr in enumerate(pool):
            if tr.active and tr.contains(ex, ey):
                if m0 < 0:
                    m0 = i
                elif m1 < 0:
                    m1 = i
                    break
        if m0 >= 0:
            if m1 >= 0:
                if motions[m0].occluding_with == m1:
                    if not projected_overlap(
                        (pool[m0], motions[m0]), (pool[m1], motions[m1]), cfg
                    ):
                        _clear_pair(motions, m0)
                elif motions[m0].occluding_with < 0 and motions[m1].occluding_with < 0:
                    if (
                        history.counts[m0] >= VELOCITY_WARMUP_TICKS
                        and history.counts[m1] >= VELOCITY_WARMUP_TICKS
                        and detect_occlusion(
                            (pool[m0], motions[m0]), (pool[m1], motions[m1]), cfg
                        )
                    ):
                        _flag_pair(pool, motions, m0, m1)
            partner = motions[m0].occluding_with
            targets = (m0, partner) if partner >= 0 else (m0,)
            for s in targets:
                occluded = motions[s].occluding_with >= 0
                _update(
                    pool[s], motions[s], ex, ey, et,
                    pool[s].contains(ex, ey), cfg, max_dx, max_dy,
                    adapt_size=not occluded,
                )
        else:
            best = -1
            best_d = math.inf
            for i, tr in enumerate(pool):
                if tr.active:
                    continue
                ddx = ex - tr.x
                ddy = ey - tr.y
                d = ddx * ddx + ddy * ddy
                if d < best_d:
                    best, best_d = i, d
            if best >= 0:
                # Stand-by slots keep their initial size: adapting on
                # crawl residuals balloons the box and lets it
                # activate while only half-covering its object.
                _update(
                    pool[best], motions[best], ex, ey, et,
                    pool[best].contains(ex, ey), cfg, max_dx, max_dy,
                    adapt_size=False,
                )
    return snaps


def process(
    stream: EventStream, cfg: CeotConfig, backend: str = "auto"
) -> list[TrackSnapshot]:
    """Run the tracker over a whole stream.

    Args:
        stream: time-ordered events.
        cfg: tracker configuration.
        backend: "python" (reference), "numba" (compiled), or "auto"
            (compiled when available). Both backends produce
            bit-identical snapshots.

    Returns:
        Snapshots of every active tracker at every cleanup tick, in
        (tick, pool slot) order, box in top-left form, state "locked".
    """
    if backend not in ("auto", "python", "numba"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend in ("auto", "numba"):
        try:
            from . import _ceot_kernel
        except ImportError:
            if backend == "numba":
                raise
            logger.info("compiled kernel unavailable, using python reference")
            return _process_python(stream, cfg)
        return _ceot_kernel.process_compiled(stream, cfg)
    return _process_python(stream, cfg)


def calibrate_activity_threshold(
    object_stream: EventStream,
    noise_stream: EventStream,
    cfg: CeotConfig,
    *,
    lo: float = 1.0e3,
    hi: float = 1.0e12,
    iterations: int = 40,
    backend: str = "auto",
) -> float:
    """Binary-search a theta_active separating object from noise streams.

    Finds the smallest threshold at which the object stream activates
    any tracker and the largest at which the noise stream activates
    none, then returns their geometric mean.

    Raises:
        ValueError: if no separating threshold exists in [lo, hi].
    """
    from dataclasses import replace

    def activates(stream: EventStream, theta: float) -> bool:
        snaps = process(stream, replace(cfg, theta_active=theta), backend=backend)
        return len(snaps) > 0

    if not activates(object_stream, hi):
        raise ValueError("object stream never activates a tracker in the search range")
    if activates(noise_stream, lo):
        raise ValueError("noise stream activates a tracker even at the lowest threshold")

    # Smallest theta that activates the object stream.
    a_lo, a_hi = lo, hi
    for _ in range(iterations):
        mid = math.sqrt(a_lo * a_hi)
        if activates(object_stream, mid):
            a_hi = mid
        else:
            a_lo = mid
    theta_object = a_hi

    # Largest theta that keeps the noise stream silent.
    b_lo, b_hi = lo, hi
    for _ in range(iterations):
        mid = math.sqrt(b_lo * b_hi)
        if activates(noise_stream, mid):
            b_hi = mid
        else:
            b_lo = mid
    theta_noise = b_lo

    if theta_object >= theta_noise:
        raise ValueError(
            f"no separating threshold: object needs < {theta_object:.3g}, "
            f"noise tolerates only < {theta_noise:.3g}"
        )
    return math.sqrt(theta_object * theta_noise)
