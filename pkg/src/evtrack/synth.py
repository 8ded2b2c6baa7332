"""Synthetic event scenes with exact analytic ground truth.

Rectangles glide at constant velocity; each emits Poisson-timed events
uniformly over its one-pixel perimeter band (the edge of a moving
object is where a real sensor fires), plus optional uniform background
noise. Ground truth is the closed-form box position sampled at a fixed
cadence, so tracker output can be scored against an exact oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .boxes import BoxF, overlap_area
from .errors import InvalidSpec
from .evaluation import GroundTruthRecord
from .events import EventStream, SensorGeometry

__all__ = [
    "ObjectSpec",
    "SceneSpec",
    "generate",
    "standard_suite",
    "throughput_spec",
    "GT_CADENCE_US",
]

GT_CADENCE_US = 1_000


@dataclass(frozen=True)
class ObjectSpec:
    """One gliding rectangle: start box, velocity, emission rate, lifespan."""

    box0: BoxF
    vx: float = 0.0
    vy: float = 0.0
    edge_event_rate: float = 10_000.0
    appear_t_us: int = 0
    disappear_t_us: int | None = None

    def box_at(self, t_us: int) -> BoxF:
        """Exact box at a timestamp (closed form, no accumulation)."""
        dt_s = (t_us - self.appear_t_us) / 1e6
        return BoxF(
            self.box0.x + self.vx * dt_s,
            self.box0.y + self.vy * dt_s,
            self.box0.w,
            self.box0.h,
        )


@dataclass(frozen=True)
class SceneSpec:
    geometry: SensorGeometry
    duration_us: int
    objects: tuple[ObjectSpec, ...] = ()
    noise_rate: float = 0.0
    rng_seed: int = 7


def _validate(spec: SceneSpec) -> None:
    if spec.duration_us <= 0:
        raise InvalidSpec("duration_us must be > 0")
    if spec.noise_rate < 0:
        raise InvalidSpec("noise_rate must be >= 0")
    for i, obj in enumerate(spec.objects):
        if obj.box0.w <= 0 or obj.box0.h <= 0:
            raise InvalidSpec(f"object {i}: box0 must have positive size")
        if obj.edge_event_rate < 0:
            raise InvalidSpec(f"object {i}: edge_event_rate must be >= 0")
        if obj.appear_t_us < 0:
            raise InvalidSpec(f"object {i}: appear_t_us must be >= 0")
        if obj.disappear_t_us is not None and obj.disappear_t_us <= obj.appear_t_us:
            raise InvalidSpec(f"object {i}: disappear_t_us must exceed appear_t_us")


def _object_events(
    obj: ObjectSpec, spec: SceneSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Poisson perimeter-band events for one object, time-sorted.

    Draw order is fixed (count, times, strip picks, along/perp offsets,
    polarities) so a spec+seed pair always yields the same stream. The
    band is the outermost pixel ring of the box: two full-width
    one-pixel rows plus two one-pixel columns between them; boxes
    thinner than three pixels degenerate to the whole rectangle.
    Events landing outside the sensor are discarded.
    """
    t0 = obj.appear_t_us
    t1 = spec.duration_us
    if obj.disappear_t_us is not None:
        t1 = min(t1, obj.disappear_t_us)
    if t1 <= t0 or obj.edge_event_rate == 0:
        empty_t = np.empty(0, np.int64)
        empty_c = np.empty(0, np.int64)
        return empty_t, empty_c, empty_c, np.empty(0, np.uint8)

    n = int(rng.poisson(obj.edge_event_rate * (t1 - t0) / 1e6))
    ts_f = np.sort(rng.uniform(t0, t1, n))
    w, h = obj.box0.w, obj.box0.h
    if w <= 2.0 or h <= 2.0:
        off_x = rng.uniform(0.0, 1.0, n) * w
        off_y = rng.uniform(0.0, 1.0, n) * h
    else:
        side = h - 2.0
        cuts = np.array([w, 2.0 * w, 2.0 * w + side])
        total = 2.0 * w + 2.0 * side
        u_strip = rng.uniform(0.0, total, n)
        u_along = rng.uniform(0.0, 1.0, n)
        u_perp = rng.uniform(0.0, 1.0, n)
        strip = np.searchsorted(cuts, u_strip, side="right")
        off_x = np.where(
            strip <= 1,
            u_along * w,
            np.where(strip == 2, u_perp, (w - 1.0) + u_perp),
        )
        off_y = np.where(
            strip == 0,
            u_perp,
            np.where(strip == 1, (h - 1.0) + u_perp, 1.0 + u_along * side),
        )
    pol = rng.integers(0, 2, n, dtype=np.uint8)

    dt_s = (ts_f - obj.appear_t_us) / 1e6
    px = np.floor(obj.box0.x + obj.vx * dt_s + off_x).astype(np.int64)
    py = np.floor(obj.box0.y + obj.vy * dt_s + off_y).astype(np.int64)
    keep = (
        (px >= 0)
        & (px < spec.geometry.width)
        & (py >= 0)
        & (py < spec.geometry.height)
    )
    return ts_f.astype(np.int64)[keep], px[keep], py[keep], pol[keep]


def _noise_events(
    spec: SceneSpec, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = int(rng.poisson(spec.noise_rate * spec.duration_us / 1e6))
    ts = np.sort(rng.uniform(0.0, spec.duration_us, n)).astype(np.int64)
    px = rng.integers(0, spec.geometry.width, n, dtype=np.int64)
    py = rng.integers(0, spec.geometry.height, n, dtype=np.int64)
    pol = rng.integers(0, 2, n, dtype=np.uint8)
    return ts, px, py, pol


def _ground_truth(spec: SceneSpec) -> list[GroundTruthRecord]:
    sensor = BoxF(0.0, 0.0, float(spec.geometry.width), float(spec.geometry.height))
    records: list[GroundTruthRecord] = []
    for idx, obj in enumerate(spec.objects):
        t1 = spec.duration_us
        if obj.disappear_t_us is not None:
            t1 = min(t1, obj.disappear_t_us)
        for t in range(obj.appear_t_us, t1 + 1, GT_CADENCE_US):
            box = obj.box_at(t)
            if overlap_area(box, sensor) > 0.0:
                records.append(GroundTruthRecord(idx, t, box))
    return records


def generate(spec: SceneSpec) -> tuple[EventStream, list[GroundTruthRecord]]:
    """Render a scene spec into an event stream plus ground truth.

    Each object gets its own child generator seeded by (scene seed,
    object index) and the noise source by (scene seed, object count),
    so adding an object never perturbs the others' events. Streams are
    merged by timestamp with ties broken by object index, noise last.

    Raises:
        InvalidSpec: on non-positive duration, negative rates,
            degenerate boxes, or inverted lifespans.
    """
    _validate(spec)
    parts = []
    for idx, obj in enumerate(spec.objects):
        rng = np.random.default_rng([spec.rng_seed, idx])
        parts.append(_object_events(obj, spec, rng))
    if spec.noise_rate > 0:
        rng = np.random.default_rng([spec.rng_seed, len(spec.objects)])
        parts.append(_noise_events(spec, rng))

    if parts:
        ts = np.concatenate([p[0] for p in parts])
        xs = np.concatenate([p[1] for p in parts])
        ys = np.concatenate([p[2] for p in parts])
        ps = np.concatenate([p[3] for p in parts])
        rank = np.concatenate(
            [np.full(len(p[0]), i, np.int64) for i, p in enumerate(parts)]
        )
        order = np.lexsort((rank, ts))
        stream = EventStream(
            spec.geometry,
            ts[order].astype(np.uint64),
            xs[order].astype(np.uint16),
            ys[order].astype(np.uint16),
            ps[order],
        )
    else:
        stream = EventStream.empty(spec.geometry)
    stream.validate()
    return stream, _ground_truth(spec)


# --- JSON round trip ------------------------------------------------------


def _check_keys(data: dict[str, Any], allowed: set[str], path: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise InvalidSpec(f"{path}: unknown key(s) {', '.join(unknown)}")


def _box_from_dict(data: Any, path: str) -> BoxF:
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: expected an object")
    _check_keys(data, {"x", "y", "w", "h"}, path)
    try:
        return BoxF(
            float(data["x"]), float(data["y"]), float(data["w"]), float(data["h"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"{path}: {exc}") from exc


def spec_from_dict(data: dict[str, Any]) -> SceneSpec:
    """Parse a scene spec from JSON data; unknown keys are errors."""
    if not isinstance(data, dict):
        raise InvalidSpec("top level: expected an object")
    _check_keys(
        data, {"geometry", "duration_us", "objects", "noise_rate", "rng_seed"}, "top level"
    )
    geom_data = data.get("geometry")
    if not isinstance(geom_data, dict):
        raise InvalidSpec("geometry: expected an object")
    _check_keys(geom_data, {"width", "height"}, "geometry")
    try:
        geometry = SensorGeometry(int(geom_data["width"]), int(geom_data["height"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"geometry: {exc}") from exc

    objects = []
    for i, obj_data in enumerate(data.get("objects", [])):
        path = f"objects[{i}]"
        if not isinstance(obj_data, dict):
            raise InvalidSpec(f"{path}: expected an object")
        _check_keys(
            obj_data,
            {"box0", "vx", "vy", "edge_event_rate", "appear_t_us", "disappear_t_us"},
            path,
        )
        disappear = obj_data.get("disappear_t_us")
        try:
            objects.append(
                ObjectSpec(
                    box0=_box_from_dict(obj_data.get("box0"), f"{path}.box0"),
                    vx=float(obj_data.get("vx", 0.0)),
                    vy=float(obj_data.get("vy", 0.0)),
                    edge_event_rate=float(obj_data.get("edge_event_rate", 10_000.0)),
                    appear_t_us=int(obj_data.get("appear_t_us", 0)),
                    disappear_t_us=None if disappear is None else int(disappear),
                )
            )
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc

    try:
        spec = SceneSpec(
            geometry=geometry,
            duration_us=int(data["duration_us"]),
            objects=tuple(objects),
            noise_rate=float(data.get("noise_rate", 0.0)),
            rng_seed=int(data.get("rng_seed", 7)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"top level: {exc}") from exc
    _validate(spec)
    return spec


def spec_to_dict(spec: SceneSpec) -> dict[str, Any]:
    return {
        "geometry": {"width": spec.geometry.width, "height": spec.geometry.height},
        "duration_us": spec.duration_us,
        "objects": [
            {
                "box0": {"x": o.box0.x, "y": o.box0.y, "w": o.box0.w, "h": o.box0.h},
                "vx": o.vx,
                "vy": o.vy,
                "edge_event_rate": o.edge_event_rate,
                "appear_t_us": o.appear_t_us,
                "disappear_t_us": o.disappear_t_us,
            }
            for o in spec.objects
        ],
        "noise_rate": spec.noise_rate,
        "rng_seed": spec.rng_seed,
    }


def load_spec(path: str) -> SceneSpec:
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidSpec(f"cannot read spec {path!r}: {exc}") from exc
    except (ValueError, UnicodeDecodeError) as exc:
        raise InvalidSpec(f"spec {path!r} is not valid JSON: {exc}") from exc
    return spec_from_dict(data)


def dump_spec(spec: SceneSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


# --- Canonical scenes -----------------------------------------------------


def standard_suite(seed: int = 7) -> dict[str, SceneSpec]:
    """The six canonical scenes the test battery runs against.

    s1: one box at constant velocity — basic lock-and-follow.
    s2: two boxes crossing in opposite directions, meeting at the
        sensor midline at half the duration — symmetric occlusion.
    s3: fast box overtaking a slow one moving the same way — the
        occlusion where combined speed exceeds either member's.
    s4: background noise only — nothing must activate or lock.
    s5: eight boxes on disjoint lanes — full tracker capacity.
    s6: one box entering from outside and leaving through the far
        edge — birth and retirement at the boundaries.
    """
    g_small = SensorGeometry(240, 180)
    g_large = SensorGeometry(640, 480)
    suite = {
        "s1": SceneSpec(
            geometry=g_small,
            duration_us=2_000_000,
            objects=(
                ObjectSpec(BoxF(25.0, 79.0, 20.0, 20.0), vx=45.0, edge_event_rate=30_000.0),
            ),
            rng_seed=seed,
        ),
        "s2": SceneSpec(
            geometry=g_small,
            duration_us=3_400_000,
            objects=(
                ObjectSpec(BoxF(23.0, 78.0, 24.0, 24.0), vx=50.0, edge_event_rate=25_000.0),
                ObjectSpec(BoxF(193.0, 78.0, 24.0, 24.0), vx=-50.0, edge_event_rate=25_000.0),
            ),
            rng_seed=seed,
        ),
        "s3": SceneSpec(
            geometry=g_large,
            duration_us=4_000_000,
            objects=(
                ObjectSpec(BoxF(20.0, 220.0, 30.0, 30.0), vx=100.0, edge_event_rate=30_000.0),
                ObjectSpec(BoxF(120.0, 220.0, 30.0, 30.0), vx=40.0, edge_event_rate=30_000.0),
            ),
            rng_seed=seed,
        ),
        "s4": SceneSpec(
            geometry=g_small,
            duration_us=3_000_000,
            noise_rate=100.0,
            rng_seed=seed,
        ),
        "s5": SceneSpec(
            geometry=g_large,
            duration_us=4_000_000,
            objects=tuple(
                ObjectSpec(BoxF(x0, y0, 30.0, 30.0), vx=35.0, edge_event_rate=20_000.0)
                for x0 in (40.0, 340.0)
                for y0 in (45.0, 165.0, 285.0, 405.0)
            ),
            rng_seed=seed,
        ),
        "s6": SceneSpec(
            geometry=g_small,
            duration_us=3_200_000,
            objects=(
                ObjectSpec(BoxF(-40.0, 75.0, 30.0, 30.0), vx=100.0, edge_event_rate=30_000.0),
            ),
            rng_seed=seed,
        ),
    }
    return suite


def throughput_spec(n_events: int, seed: int = 7) -> SceneSpec:
    """A load scene sized to emit about n_events in expectation."""
    if n_events < 1:
        raise InvalidSpec("n_events must be >= 1")
    duration_us = 2_000_000
    n_objects = 4
    rate = n_events / (n_objects * duration_us / 1e6)
    return SceneSpec(
        geometry=SensorGeometry(640, 480),
        duration_us=duration_us,
        objects=tuple(
            ObjectSpec(
                BoxF(60.0 + 120.0 * i, 60.0 + 90.0 * i, 40.0, 40.0),
                vx=30.0,
                vy=10.0,
                edge_event_rate=rate,
            )
            for i in range(n_objects)
        ),
        rng_seed=seed,
    )
