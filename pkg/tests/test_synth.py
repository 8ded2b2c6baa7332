"""Synthetic scene generator: determinism, band geometry, exact truth.

The generator's contract is that the stream is a pure function of
(spec, seed) and that every event lies on the emitting object's
perimeter band at its timestamp — both checked directly against the
closed-form box positions.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from evtrack.boxes import BoxF
from evtrack.errors import InvalidSpec
from evtrack.events import SensorGeometry
from evtrack.synth import (
    GT_CADENCE_US,
    ObjectSpec,
    SceneSpec,
    dump_spec,
    generate,
    load_spec,
    spec_from_dict,
    spec_to_dict,
    standard_suite,
    throughput_spec,
)

GEO = SensorGeometry(240, 180)


def small_spec(**overrides) -> SceneSpec:
    obj = ObjectSpec(BoxF(40.0, 60.0, 24.0, 18.0), vx=30.0, vy=-10.0, edge_event_rate=10_000.0)
    base = dict(geometry=GEO, duration_us=500_000, objects=(obj,), rng_seed=7)
    base.update(overrides)
    return SceneSpec(**base)


class TestObjectSpec:
    def test_box_at_is_closed_form(self):
        obj = ObjectSpec(BoxF(10.0, 20.0, 5.0, 5.0), vx=30.0, vy=-10.0)
        assert obj.box_at(0) == BoxF(10.0, 20.0, 5.0, 5.0)
        assert obj.box_at(1_000_000) == BoxF(40.0, 10.0, 5.0, 5.0)

    def test_box_at_counts_from_appearance(self):
        obj = ObjectSpec(BoxF(10.0, 20.0, 5.0, 5.0), vx=30.0, appear_t_us=500_000)
        assert obj.box_at(1_500_000) == BoxF(40.0, 20.0, 5.0, 5.0)


class TestSpecValidation:
    # SceneSpec itself is a passive dataclass; generate() validates.

    def test_non_positive_duration(self):
        with pytest.raises(InvalidSpec):
            generate(SceneSpec(geometry=GEO, duration_us=0))

    def test_negative_noise_rate(self):
        with pytest.raises(InvalidSpec):
            generate(SceneSpec(geometry=GEO, duration_us=1, noise_rate=-1.0))

    def test_degenerate_object_box(self):
        spec = SceneSpec(
            geometry=GEO, duration_us=1, objects=(ObjectSpec(BoxF(0, 0, 0.0, 5.0)),)
        )
        with pytest.raises(InvalidSpec):
            generate(spec)

    def test_negative_rate(self):
        spec = SceneSpec(
            geometry=GEO,
            duration_us=1,
            objects=(ObjectSpec(BoxF(0, 0, 5, 5), edge_event_rate=-1.0),),
        )
        with pytest.raises(InvalidSpec):
            generate(spec)

    def test_inverted_lifespan(self):
        spec = SceneSpec(
            geometry=GEO,
            duration_us=10,
            objects=(ObjectSpec(BoxF(0, 0, 5, 5), appear_t_us=5, disappear_t_us=5),),
        )
        with pytest.raises(InvalidSpec):
            generate(spec)


class TestGenerate:
    def test_same_spec_same_stream(self):
        s1, g1 = generate(small_spec())
        s2, g2 = generate(small_spec())
        assert s1 == s2
        assert g1 == g2

    def test_different_seed_different_stream(self):
        s1, _ = generate(small_spec())
        s2, _ = generate(small_spec(rng_seed=8))
        assert s1 != s2

    def test_event_count_matches_rate(self):
        # Expectation 10000/s * 0.5 s = 5000; allow five Poisson sigma.
        stream, _ = generate(small_spec())
        assert abs(len(stream) - 5000) <= 5 * np.sqrt(5000)

    def test_events_lie_on_the_perimeter_band(self):
        spec = small_spec()
        obj = spec.objects[0]
        stream, _ = generate(spec)
        for e in stream:
            b = obj.box_at(e.t)
            # Pixel within the swept box (floor slop one pixel) ...
            assert b.x - 1.0 <= e.x <= b.x + b.w
            assert b.y - 1.0 <= e.y <= b.y + b.h
            # ... and within one pixel of its nearest edge.
            edge = min(e.x - b.x, b.x + b.w - 1 - e.x, e.y - b.y, b.y + b.h - 1 - e.y)
            assert edge <= 1.0

    def test_lifespan_respected(self):
        spec = small_spec(
            objects=(
                ObjectSpec(
                    BoxF(40.0, 60.0, 24.0, 18.0),
                    edge_event_rate=10_000.0,
                    appear_t_us=100_000,
                    disappear_t_us=300_000,
                ),
            )
        )
        stream, gt = generate(spec)
        assert len(stream) > 0
        assert all(100_000 <= e.t < 300_000 for e in stream)
        assert gt[0].t == 100_000
        assert gt[-1].t == 300_000

    def test_off_sensor_events_discarded(self):
        spec = small_spec(
            objects=(ObjectSpec(BoxF(-40.0, 75.0, 30.0, 30.0), vx=100.0, edge_event_rate=10_000.0),),
            duration_us=600_000,
        )
        stream, _ = generate(spec)
        stream.validate()
        assert len(stream) > 0
        assert int(stream.x.min()) >= 0

    def test_ground_truth_cadence_and_exactness(self):
        spec = small_spec()
        _, gt = generate(spec)
        times = [r.t for r in gt]
        assert times[0] == 0
        assert times[-1] == spec.duration_us
        assert set(np.diff(times)) == {GT_CADENCE_US}
        obj = spec.objects[0]
        for r in gt[:: len(gt) // 20]:
            assert r.box == obj.box_at(r.t)

    def test_ground_truth_only_while_on_sensor(self):
        # Entering object: its truth records start once the box
        # actually overlaps the sensor, not at t=0.
        spec = small_spec(
            objects=(ObjectSpec(BoxF(-40.0, 75.0, 30.0, 30.0), vx=100.0, edge_event_rate=1_000.0),),
            duration_us=600_000,
        )
        _, gt = generate(spec)
        assert gt[0].t == 101_000  # right edge crosses x=0 at t=0.1 s

    def test_objects_draw_from_independent_generators(self):
        # Appending a second object must not perturb the first one's
        # events. The two live in disjoint sensor halves, so the left
        # half of the combined stream is exactly the solo stream.
        a = ObjectSpec(BoxF(20.0, 40.0, 20.0, 20.0), vx=10.0, edge_event_rate=8_000.0)
        b = ObjectSpec(BoxF(180.0, 100.0, 20.0, 20.0), vx=-10.0, edge_event_rate=8_000.0)
        solo, _ = generate(SceneSpec(geometry=GEO, duration_us=400_000, objects=(a,), rng_seed=7))
        both, _ = generate(SceneSpec(geometry=GEO, duration_us=400_000, objects=(a, b), rng_seed=7))
        left = [(e.t, e.x, e.y, e.p) for e in both if e.x < 120]
        assert left == [(e.t, e.x, e.y, e.p) for e in solo]

    def test_noise_only_scene(self):
        spec = SceneSpec(geometry=GEO, duration_us=1_000_000, noise_rate=500.0, rng_seed=7)
        stream, gt = generate(spec)
        stream.validate()
        assert gt == []
        assert abs(len(stream) - 500) <= 5 * np.sqrt(500)

    def test_empty_scene_yields_empty_stream(self):
        stream, gt = generate(SceneSpec(geometry=GEO, duration_us=1_000))
        assert len(stream) == 0
        assert gt == []


class TestSpecJson:
    def test_dict_round_trip(self):
        spec = small_spec(noise_rate=25.0)
        assert spec_from_dict(spec_to_dict(spec)) == spec

    def test_file_round_trip(self, tmp_path):
        spec = small_spec()
        path = tmp_path / "scene.json"
        path.write_text(dump_spec(spec))
        assert load_spec(str(path)) == spec

    def test_dump_is_plain_json(self):
        data = json.loads(dump_spec(small_spec()))
        assert data["duration_us"] == 500_000
        assert data["objects"][0]["box0"] == {"x": 40.0, "y": 60.0, "w": 24.0, "h": 18.0}

    def test_unknown_key_rejected(self):
        data = spec_to_dict(small_spec())
        data["colour"] = "red"
        with pytest.raises(InvalidSpec):
            spec_from_dict(data)

    def test_unknown_object_key_rejected(self):
        data = spec_to_dict(small_spec())
        data["objects"][0]["spin"] = 1
        with pytest.raises(InvalidSpec):
            spec_from_dict(data)

    def test_missing_geometry_rejected(self):
        data = spec_to_dict(small_spec())
        del data["geometry"]
        with pytest.raises(InvalidSpec):
            spec_from_dict(data)

    def test_invalid_json_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(InvalidSpec):
            load_spec(str(path))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InvalidSpec):
            load_spec(str(tmp_path / "absent.json"))


class TestStandardSuite:
    def test_six_scenes(self, suite):
        assert sorted(suite) == ["s1", "s2", "s3", "s4", "s5", "s6"]

    def test_seed_is_plumbed_through(self):
        assert standard_suite(seed=9)["s1"].rng_seed == 9

    def test_crossing_scene_is_symmetric(self, suite):
        a, b = suite["s2"].objects
        assert a.vx == -b.vx
        assert a.box0.y == b.box0.y
        # Mirror-symmetric start positions about the sensor midline.
        mid = suite["s2"].geometry.width / 2.0
        assert (a.box0.x + a.box0.w / 2.0) - mid == pytest.approx(
            mid - (b.box0.x + b.box0.w / 2.0)
        )

    def test_capacity_scene_has_eight_disjoint_lanes(self, suite):
        objects = suite["s5"].objects
        assert len(objects) == 8
        assert len({o.box0.y for o in objects}) == 4  # four lanes, two columns

    def test_noise_scene_has_no_objects(self, suite):
        assert suite["s4"].objects == ()
        assert suite["s4"].noise_rate > 0


class TestThroughputSpec:
    def test_expected_event_count(self):
        spec = throughput_spec(1_000_000)
        total = sum(
            o.edge_event_rate * spec.duration_us / 1e6 for o in spec.objects
        )
        assert total == pytest.approx(1_000_000)

    def test_zero_events_rejected(self):
        with pytest.raises(InvalidSpec):
            throughput_spec(0)
