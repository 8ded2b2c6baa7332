"""Compiled mirror of the event-by-event tracker loop.

Transcribes the pure-Python reference in `ceot` onto flat numpy arrays
under numba. Expression order and operand grouping are kept identical
to the reference so both backends produce bit-identical snapshots; any
change here must be made in `ceot` as well (the equivalence test in the
suite guards this).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .boxes import BoxF
from .ceot import VELOCITY_BASELINE_TICKS, VELOCITY_WARMUP_TICKS, CeotConfig
from .eot import LOCKED, TrackSnapshot
from .errors import NonPositiveDt
from .events import EventStream

__all__ = ["process_compiled"]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_N_HIST = VELOCITY_BASELINE_TICKS
_WARMUP = VELOCITY_WARMUP_TICKS


@njit(cache=True)
def _run(
    ts,
    exs,
    eys,
    width,
    height,
    pool_size,
    alpha,
    alpha_t,
    theta_active,
    cleanup_period,
    v_alpha,
    v_beta,
    p_threshold,
    occl_step,
    init_half,
    init_isi,
    size_ema,
    size_gain,
    min_half,
    axis_both,
    seed,
):
    n = pool_size
    max_dx = width / 2.0
    max_dy = height / 2.0

    xs = np.empty(n, np.float64)
    ys = np.empty(n, np.float64)
    dxs = np.empty(n, np.float64)
    dys = np.empty(n, np.float64)
    active = np.zeros(n, np.bool_)
    isi = np.empty(n, np.float64)
    t_last = np.zeros(n, np.int64)
    vx = np.zeros(n, np.float64)
    vy = np.zeros(n, np.float64)
    cxx = np.zeros(n, np.float64)
    cxy = np.zeros(n, np.float64)
    cyy = np.zeros(n, np.float64)
    occ = np.full(n, -1, np.int64)
    fvx = np.zeros(n, np.float64)
    fvy = np.zeros(n, np.float64)
    fdx = np.zeros(n, np.float64)
    fdy = np.zeros(n, np.float64)
    gen = np.empty(n, np.int64)
    hist_x = np.zeros((n, _N_HIST), np.float64)
    hist_y = np.zeros((n, _N_HIST), np.float64)
    hist_cnt = np.zeros(n, np.int64)
    act_t = np.full(n, -1, np.int64)

    rng_box = np.empty(1, np.uint64)
    rng_box[0] = seed
    gen_box = np.empty(1, np.int64)

    def draw():
        rng_box[0] = rng_box[0] + _GAMMA
        z = rng_box[0]
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
        return np.float64(z >> _S11) * _INV53

    for i in range(n):
        ux = draw()
        uy = draw()
        xs[i] = ux * width
        ys[i] = uy * height
        dxs[i] = init_half
        dys[i] = init_half
        isi[i] = init_isi
        gen[i] = i
    gen_box[0] = n

    def upd(i, ex, ey, et, inside, adapt):
        if et < t_last[i]:
            raise NonPositiveDt("event timestamp precedes tracker's last update")
        dt_us = np.float64(et - t_last[i])
        xs[i] = alpha * xs[i] + (1.0 - alpha) * ex
        ys[i] = alpha * ys[i] + (1.0 - alpha) * ey
        if inside:
            isi[i] = alpha_t * isi[i] + (1.0 - alpha_t) * dt_us
            t_last[i] = et
        rx = ex - xs[i]
        ry = ey - ys[i]
        cxx[i] = alpha * cxx[i] + (1.0 - alpha) * rx * rx
        cxy[i] = alpha * cxy[i] + (1.0 - alpha) * rx * ry
        cyy[i] = alpha * cyy[i] + (1.0 - alpha) * ry * ry
        if adapt and size_ema:
            dx_new = alpha * dxs[i] + (1.0 - alpha) * size_gain * abs(rx)
            dy_new = alpha * dys[i] + (1.0 - alpha) * size_gain * abs(ry)
            dxs[i] = min(max(dx_new, min_half), max_dx)
            dys[i] = min(max(dy_new, min_half), max_dy)
        active[i] = isi[i] * dxs[i] * dys[i] < theta_active

    def proj(i, j):
        for nstep in range(1, 3):
            dt_s = occl_step * nstep / 1e6
            ddx = abs((xs[i] + vx[i] * dt_s) - (xs[j] + vx[j] * dt_s))
            ddy = abs((ys[i] + vy[i] * dt_s) - (ys[j] + vy[j] * dt_s))
            if ddx <= dxs[i] + dxs[j] and ddy <= dys[i] + dys[j]:
                return True
        return False

    def onset_ok(i, j):
        d_alpha = False
        d_beta = False
        va = vx[i]
        vb = vx[j]
        if (va >= 0.0) == (vb >= 0.0):
            d_alpha = d_alpha or abs(va - vb) > v_alpha
        else:
            d_beta = d_beta or abs(va - vb) > v_beta
        if axis_both:
            va = vy[i]
            vb = vy[j]
            if (va >= 0.0) == (vb >= 0.0):
                d_alpha = d_alpha or abs(va - vb) > v_alpha
            else:
                d_beta = d_beta or abs(va - vb) > v_beta
        p_d = cxx[i] + cyy[i] < p_threshold and cxx[j] + cyy[j] < p_threshold
        if not (p_d and (d_alpha or d_beta)):
            return False
        i_inside_j = abs(xs[i] - xs[j]) <= dxs[j] and abs(ys[i] - ys[j]) <= dys[j]
        j_inside_i = abs(xs[j] - xs[i]) <= dxs[i] and abs(ys[j] - ys[i]) <= dys[i]
        if i_inside_j or j_inside_i:
            return False
        return proj(i, j)

    n_events = ts.shape[0]
    if n_events:
        cap = (ts[n_events - 1] // cleanup_period + 1) * n
    else:
        cap = 1
    out_gen = np.empty(cap, np.int64)
    out_t = np.empty(cap, np.int64)
    out_x = np.empty(cap, np.float64)
    out_y = np.empty(cap, np.float64)
    out_w = np.empty(cap, np.float64)
    out_h = np.empty(cap, np.float64)
    out_vx = np.empty(cap, np.float64)
    out_vy = np.empty(cap, np.float64)
    out_box = np.zeros(1, np.int64)

    baseline_s = cleanup_period * _N_HIST / 1e6

    def tick(t_now):
        for i in range(n):
            if not active[i]:
                hist_cnt[i] = 0
                continue
            slot = hist_cnt[i] % _N_HIST
            if hist_cnt[i] >= _N_HIST and occ[i] < 0:
                sx = (xs[i] - hist_x[i, slot]) / baseline_s
                sy = (ys[i] - hist_y[i, slot]) / baseline_s
                vx[i] = alpha * vx[i] + (1.0 - alpha) * sx
                vy[i] = alpha * vy[i] + (1.0 - alpha) * sy
            hist_x[i, slot] = xs[i]
            hist_y[i, slot] = ys[i]
            hist_cnt[i] = hist_cnt[i] + 1
        for i in range(n):
            upd(i, xs[i], ys[i], t_now, True, False)
        for i in range(n):
            if active[i] and act_t[i] < 0:
                act_t[i] = t_now
        for i in range(n):
            j = occ[i]
            if j > i:
                if not (active[i] and active[j]):
                    occ[i] = -1
                    occ[j] = -1
                elif not proj(i, j):
                    occ[i] = -1
                    occ[j] = -1
        changed = True
        while changed:
            changed = False
            for i in range(n):
                if not active[i] or occ[i] >= 0:
                    continue
                for j in range(i + 1, n):
                    if not active[j] or occ[j] >= 0:
                        continue
                    if (
                        abs(xs[i] - xs[j]) <= dxs[i] + dxs[j]
                        and abs(ys[i] - ys[j]) <= dys[i] + dys[j]
                    ):
                        if (
                            hist_cnt[i] >= _WARMUP
                            and hist_cnt[j] >= _WARMUP
                            and onset_ok(i, j)
                        ):
                            occ[i] = j
                            occ[j] = i
                            fvx[i] = vx[i]
                            fvy[i] = vy[i]
                            fdx[i] = dxs[i]
                            fdy[i] = dys[i]
                            fvx[j] = vx[j]
                            fvy[j] = vy[j]
                            fdx[j] = dxs[j]
                            fdy[j] = dys[j]
                            continue
                        if dxs[j] * dys[j] > dxs[i] * dys[i]:
                            big = j
                            small = i
                        else:
                            big = i
                            small = j
                        if act_t[i] != act_t[j]:
                            if act_t[i] < act_t[j]:
                                s = i
                                o = j
                            else:
                                s = j
                                o = i
                        elif gen[i] < gen[j]:
                            s = i
                            o = j
                        else:
                            s = j
                            o = i
                        cx = (xs[i] + xs[j]) * 0.5
                        cy = (ys[i] + ys[j]) * 0.5
                        small_inside = (
                            abs(xs[small] - xs[big]) <= dxs[big]
                            and abs(ys[small] - ys[big]) <= dys[big]
                        )
                        if small_inside:
                            ndx = dxs[big]
                            ndy = dys[big]
                        else:
                            ndx = dxs[i] + dxs[j]
                            ndy = dys[i] + dys[j]
                        shift_x = cx - xs[s]
                        shift_y = cy - ys[s]
                        for h in range(_N_HIST):
                            hist_x[s, h] = hist_x[s, h] + shift_x
                            hist_y[s, h] = hist_y[s, h] + shift_y
                        xs[s] = cx
                        ys[s] = cy
                        dxs[s] = ndx
                        dys[s] = ndy
                        ux = draw()
                        uy = draw()
                        xs[o] = ux * width
                        ys[o] = uy * height
                        dxs[o] = init_half
                        dys[o] = init_half
                        active[o] = False
                        isi[o] = init_isi
                        t_last[o] = t_now
                        vx[o] = 0.0
                        vy[o] = 0.0
                        cxx[o] = 0.0
                        cxy[o] = 0.0
                        cyy[o] = 0.0
                        fvx[o] = 0.0
                        fvy[o] = 0.0
                        fdx[o] = 0.0
                        fdy[o] = 0.0
                        hist_cnt[o] = 0
                        act_t[o] = -1
                        gen[o] = gen_box[0]
                        gen_box[0] = gen_box[0] + 1
                        changed = True
                        break
                if changed:
                    break
        for i in range(n):
            if active[i]:
                k = out_box[0]
                out_gen[k] = gen[i]
                out_t[k] = t_now
                out_x[k] = xs[i] - dxs[i]
                out_y[k] = ys[i] - dys[i]
                out_w[k] = 2.0 * dxs[i]
                out_h[k] = 2.0 * dys[i]
                out_vx[k] = vx[i]
                out_vy[k] = vy[i]
                out_box[0] = k + 1

    next_tick = cleanup_period
    for k in range(n_events):
        et = ts[k]
        ex = np.float64(exs[k])
        ey = np.float64(eys[k])
        while next_tick <= et:
            tick(next_tick)
            next_tick += cleanup_period
        m0 = -1
        m1 = -1
        for i in range(n):
            if active[i] and abs(ex - xs[i]) <= dxs[i] and abs(ey - ys[i]) <= dys[i]:
                if m0 < 0:
                    m0 = i
                elif m1 < 0:
                    m1 = i
                    break
        if m0 >= 0:
            if m1 >= 0:
                if occ[m0] == m1:
                    if not proj(m0, m1):
                        occ[m0] = -1
                        occ[m1] = -1
                elif occ[m0] < 0 and occ[m1] < 0:
                    if (
                        hist_cnt[m0] >= _WARMUP
                        and hist_cnt[m1] >= _WARMUP
                        and onset_ok(m0, m1)
                    ):
                        occ[m0] = m1
                        occ[m1] = m0
                        fvx[m0] = vx[m0]
                        fvy[m0] = vy[m0]
                        fdx[m0] = dxs[m0]
                        fdy[m0] = dys[m0]
                        fvx[m1] = vx[m1]
                        fvy[m1] = vy[m1]
                        fdx[m1] = dxs[m1]
                        fdy[m1] = dys[m1]
            partner = occ[m0]
            inside0 = abs(ex - xs[m0]) <= dxs[m0] and abs(ey - ys[m0]) <= dys[m0]
            not_occ0 = occ[m0] < 0
            upd(m0, ex, ey, et, inside0, not_occ0)
            if partner >= 0:
                inside1 = (
                    abs(ex - xs[partner]) <= dxs[partner]
                    and abs(ey - ys[partner]) <= dys[partner]
                )
                upd(partner, ex, ey, et, inside1, False)
        else:
            best = -1
            best_d = np.inf
            for i in range(n):
                if active[i]:
                    continue
                ddx = ex - xs[i]
                ddy = ey - ys[i]
                d = ddx * ddx + ddy * ddy
                if d < best_d:
                    best = i
                    best_d = d
            if best >= 0:
                inside_b = (
                    abs(ex - xs[best]) <= dxs[best] and abs(ey - ys[best]) <= dys[best]
                )
                upd(best, ex, ey, et, inside_b, False)

    m = out_box[0]
    return (
        out_gen[:m],
        out_t[:m],
        out_x[:m],
        out_y[:m],
        out_w[:m],
        out_h[:m],
        out_vx[:m],
        out_vy[:m],
    )


def process_compiled(stream: EventStream, cfg: CeotConfig) -> list[TrackSnapshot]:
    """Run the compiled loop and rebuild snapshot objects."""
    if len(stream) == 0:
        return []
    out = _run(
        stream.t.astype(np.int64),
        stream.x,
        stream.y,
        float(stream.geometry.width),
        float(stream.geometry.height),
        cfg.pool_size,
        cfg.alpha,
        cfg.alpha_t,
        cfg.theta_active,
        np.int64(cfg.cleanup_period_us),
        cfg.v_alpha,
        cfg.v_beta,
        cfg.p_threshold,
        np.int64(cfg.occlusion_timestep_us),
        cfg.init_half_size,
        cfg.init_isi_us,
        cfg.size_adapt == "ema",
        cfg.size_gain,
        cfg.min_half_size,
        cfg.occlusion_axis == "both",
        np.uint64(cfg.rng_seed & ((1 << 64) - 1)),
    )
    out_gen, out_t, out_x, out_y, out_w, out_h, out_vx, out_vy = out
    return [
        TrackSnapshot(
            int(out_gen[k]),
            int(out_t[k]),
            BoxF(out_x[k], out_y[k], out_w[k], out_h[k]),
            LOCKED,
            out_vx[k],
            out_vy[k],
        )
        for k in range(out_gen.shape[0])
    ]
