import math

import numpy as np
import pytest

import mapkit
from dorval.scene_model import (
    ROLE_RELEVANT,
    ROLE_SUBJECT,
    Scene,
    SceneVehicle,
    TrackParseError,
    UnmappableTrackError,
    VehicleFootprint,
    VehicleState,
    extract_situations,
    ingest_tracks,
    leading_vehicle,
    load_map,
    relevant_set,
    scene_from_dict,
    scene_to_dict,
    serialize_tracks,
)
from mapkit import corridor_map, crossroad_map, simple_scene, state_on, write_tracks_csv


class TestVehicleState:
    def test_yaw_normalized_on_construction(self):
        st = VehicleState(0, 0, 0, 5, 0, 0, yaw=3 * math.pi / 2)
        assert st.yaw == pytest.approx(-math.pi / 2)

    def test_speed_limit_check(self):
        st = VehicleState(0, 0, 0, 25.0, 0, 0, 0)
        with pytest.raises(ValueError):
            st.check_speed(22.0)

    def test_world_velocity(self):
        st = VehicleState(0, 0, 0, 10.0, 0, 0, yaw=math.pi / 2)
        wx, wy = st.world_velocity()
        assert (wx, wy) == pytest.approx((0.0, 10.0), abs=1e-12)


class TestFootprint:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            VehicleFootprint(length=-1.0)

    def test_corner_count_and_order(self):
        fp = VehicleFootprint()
        corners = fp.corners(VehicleState(0, 0, 0, 0, 0, 0, 0))
        assert len(corners) == 4
        area = sum(
            corners[i][0] * corners[(i + 1) % 4][1] - corners[(i + 1) % 4][0] * corners[i][1]
            for i in range(4)
        )
        assert area > 0  # counterclockwise


class TestIngest:
    def test_identity_parse(self, tmp_path):
        path = tmp_path / "tracks.csv"
        m = corridor_map()
        rows = [
            (1, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, "lane0"),
            (1, 0.1, 1.5, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, "lane0"),
            (1, 0.2, 2.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, "lane0"),
        ]
        write_tracks_csv(path, rows)
        ds = ingest_tracks(path, m)
        assert len(ds.tracks) == 1
        assert len(ds.tracks[1].states) == 3
        assert ds.tracks[1].states[0].vy == 5.0

    def test_yaw_normalization_row(self, tmp_path):
        path = tmp_path / "tracks.csv"
        m = corridor_map()
        write_tracks_csv(path, [(1, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0, 3 * math.pi / 2, "lane0")])
        ds = ingest_tracks(path, m)
        assert ds.tracks[1].states[0].yaw == pytest.approx(-math.pi / 2)

    def test_central_difference_velocity(self, tmp_path):
        # positions (0,0),(1,0),(2,0) at 1 s, no velocity columns:
        # middle-sample longitudinal speed must be exactly 1 m/s
        path = tmp_path / "tracks.csv"
        m = corridor_map(length=10.0)
        with open(path, "w") as fh:
            fh.write("# dt=1.0\n")
            fh.write("track_id,t,x,y,yaw,lane_id\n")
            for k, x in enumerate((0.0, 1.0, 2.0)):
                fh.write(f"{1},{float(k)!r},{x!r},0.0,0.0,lane0\n")
        ds = ingest_tracks(path, m, resample_dt=1.0)
        assert ds.tracks[1].states[1].vy == pytest.approx(1.0)
        assert ds.tracks[1].states[1].vx == pytest.approx(0.0)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "tracks.csv"
        with open(path, "w") as fh:
            fh.write("# dt=0.1\n")
            fh.write("track_id,t,x,y,vx,vy,ax,ay,yaw,lane_id\n")
            fh.write("1,0.0,zap,0.0,0.0,5.0,0.0,0.0,0.0,lane0\n")
        with pytest.raises(TrackParseError) as err:
            ingest_tracks(path, corridor_map())
        assert "line 3" in str(err.value)

    def test_unmappable_track(self, tmp_path):
        path = tmp_path / "tracks.csv"
        write_tracks_csv(path, [(1, 0.0, 1.0, 30.0, 0.0, 5.0, 0.0, 0.0, 0.0, None)])
        with pytest.raises(UnmappableTrackError):
            ingest_tracks(path, corridor_map())

    def test_resampling_to_simulation_step(self, tmp_path):
        path = tmp_path / "tracks.csv"
        m = corridor_map()
        rows = [
            (1, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, "lane0"),
            (1, 0.2, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, "lane0"),
        ]
        write_tracks_csv(path, rows, dt=0.2)
        ds = ingest_tracks(path, m, resample_dt=0.1)
        assert ds.dt == 0.1
        assert len(ds.tracks[1].states) == 3
        assert ds.tracks[1].states[1].x == pytest.approx(0.5)

    def test_roundtrip_bit_exact(self, tmp_path):
        src = tmp_path / "a.csv"
        dst = tmp_path / "b.csv"
        m = corridor_map()
        rng = np.random.default_rng(2)
        rows = []
        for vid in (1, 2):
            for k in range(5):
                x = float(k) * 0.73 + vid + rng.uniform(0, 1e-3)
                rows.append((vid, k * 0.1, x, 0.0, 0.0, 7.3, 0.0, 0.0, 0.0, "lane0"))
        write_tracks_csv(src, rows)
        ds1 = ingest_tracks(src, m)
        serialize_tracks(ds1, dst)
        ds2 = ingest_tracks(dst, m)
        for vid in ds1.tracks:
            t1, t2 = ds1.tracks[vid], ds2.tracks[vid]
            assert np.array_equal(t1.times, t2.times)
            assert t1.states == t2.states
            assert t1.lane_ids == t2.lane_ids


class TestLeadingVehicle:
    def _scene(self, gaps, m):
        vehicles = [(1, state_on(m, "lane0", 20.0, 5.0), "lane0")]
        for i, g in enumerate(gaps):
            vehicles.append((2 + i, state_on(m, "lane0", 20.0 + g, 5.0), "lane0"))
        return simple_scene(vehicles)

    def test_nearest_ahead(self):
        m = corridor_map()
        scene = self._scene([10.0, 20.0], m)
        assert leading_vehicle(1, scene, m) == 2

    def test_only_behind_yields_none(self):
        m = corridor_map()
        scene = self._scene([-8.0], m)
        assert leading_vehicle(1, scene, m) is None

    def test_filter_horizon_then_min(self):
        m = corridor_map()
        scene = self._scene([60.0, 30.0, -5.0], m)
        assert leading_vehicle(1, scene, m) == 3  # +30 m wins; +60 beyond horizon

    def test_other_lane_ignored(self):
        m = corridor_map(n_lanes=2)
        scene = simple_scene(
            [
                (1, state_on(m, "lane0", 20.0, 5.0), "lane0"),
                (2, state_on(m, "lane1", 30.0, 5.0), "lane1"),
            ]
        )
        assert leading_vehicle(1, scene, m) is None


class TestExtractSituations:
    def _dataset(self, tmp_path, rows, dt=0.1):
        path = tmp_path / "tracks.csv"
        write_tracks_csv(path, rows, dt=dt)
        return path

    def test_fig1_relevant_set(self, tmp_path, crossroad):
        # subject 1 turning left; 2 oncoming in cross-path conflict; 3 leads 2
        # (3 sits just past the crossing point, so 2 is the conflicting one)
        span = crossroad.polygon_span("we_left")
        rows = mapkit.moving_rows(1, crossroad, "we_left", span[0] + 1.0, 7.0, 0.0, 1)
        rows += mapkit.moving_rows(2, crossroad, "ew", 50.0, 9.0, 0.0, 1)
        rows += mapkit.moving_rows(3, crossroad, "ew", 66.0, 9.0, 0.0, 1)
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        scenes = extract_situations(ds, crossroad)
        assert len(scenes) == 1
        scene = scenes[0]
        assert scene.scenario_kind == "LTAP"
        assert scene.subject.vehicle_id == 1
        rel = {v.vehicle_id for v in scene.vehicles if v.role == ROLE_RELEVANT}
        assert rel == {2, 3}

    def test_single_vehicle_no_scenes(self, tmp_path, crossroad):
        span = crossroad.polygon_span("we_left")
        rows = mapkit.moving_rows(1, crossroad, "we_left", span[0] + 1.0, 7.0, 0.0, 3)
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        assert extract_situations(ds, crossroad) == []

    def test_follower_of_conflicting_vehicle_excluded(self, tmp_path, crossroad):
        span = crossroad.polygon_span("we_left")
        rows = mapkit.moving_rows(1, crossroad, "we_left", span[0] + 1.0, 7.0, 0.0, 1)
        rows += mapkit.moving_rows(2, crossroad, "ew", 50.0, 9.0, 0.0, 1)
        rows += mapkit.moving_rows(3, crossroad, "ew", 38.0, 9.0, 0.0, 1)  # behind 2
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        scenes = extract_situations(ds, crossroad)
        rel = {v.vehicle_id for v in scenes[0].vehicles if v.role == ROLE_RELEVANT}
        assert rel == {2}

    def test_outside_polygon_not_executing(self, tmp_path, crossroad):
        rows = mapkit.moving_rows(1, crossroad, "we_left", 10.0, 7.0, 0.0, 1)  # far upstream
        rows += mapkit.moving_rows(2, crossroad, "ew", 50.0, 9.0, 0.0, 1)
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        assert extract_situations(ds, crossroad) == []

    def test_role_mapping_idempotent(self, tmp_path, crossroad):
        span = crossroad.polygon_span("we_left")
        rows = mapkit.moving_rows(1, crossroad, "we_left", span[0] + 1.0, 7.0, 0.0, 2)
        rows += mapkit.moving_rows(2, crossroad, "ew", 50.0, 9.0, 0.0, 2)
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        scenes = extract_situations(ds, crossroad)
        for scene in scenes:
            members = [(v.vehicle_id, v.state, v.lane_id) for v in scene.vehicles]
            rel = relevant_set(scene.subject.vehicle_id, members, crossroad)
            for v in scene.vehicles:
                expect = ROLE_SUBJECT if v.vehicle_id == scene.subject.vehicle_id else ROLE_RELEVANT
                assert v.role == expect
                if v.role == ROLE_RELEVANT:
                    assert v.vehicle_id in rel

    def test_membership_clauses(self, tmp_path, crossroad):
        # every relevant vehicle satisfies one of the three membership clauses
        span = crossroad.polygon_span("we_left")
        rows = mapkit.moving_rows(1, crossroad, "we_left", span[0] + 1.0, 7.0, 0.0, 1)
        rows += mapkit.moving_rows(2, crossroad, "ew", 50.0, 9.0, 0.0, 1)
        rows += mapkit.moving_rows(3, crossroad, "ew", 66.0, 9.0, 0.0, 1)
        rows += mapkit.moving_rows(4, crossroad, "we_left", span[0] + 7.5, 7.0, 0.0, 1)
        ds = ingest_tracks(self._dataset(tmp_path, rows), crossroad)
        scenes = extract_situations(ds, crossroad)
        scene = [s for s in scenes if s.subject.vehicle_id == 1][0]
        members = [(v.vehicle_id, v.state, v.lane_id) for v in scene.vehicles]
        conflicts = crossroad.conflicting("we_left")
        from dorval.scene_model import _leading_among

        assert {v.vehicle_id for v in scene.vehicles if v.role == ROLE_RELEVANT} >= {2, 4}
        for v in scene.vehicles:
            if v.role != ROLE_RELEVANT:
                continue
            clause_cross = v.lane_id in conflicts
            clause_lead = _leading_among(1, members, crossroad) == v.vehicle_id
            clause_cross_lead = any(
                _leading_among(c[0], members, crossroad) == v.vehicle_id
                for c in members
                if c[2] in conflicts
            )
            assert clause_cross or clause_lead or clause_cross_lead


class TestSceneInvariants:
    def test_single_subject_enforced(self):
        m = corridor_map()
        with pytest.raises(ValueError):
            Scene(
                0.0,
                (
                    SceneVehicle(1, state_on(m, "lane0", 0.0, 5.0), "lane0", ROLE_SUBJECT),
                    SceneVehicle(2, state_on(m, "lane0", 10.0, 5.0), "lane0", ROLE_SUBJECT),
                ),
                "LTAP",
            )

    def test_disjoint_check(self):
        m = corridor_map()
        scene = simple_scene(
            [
                (1, state_on(m, "lane0", 10.0, 5.0), "lane0"),
                (2, state_on(m, "lane0", 12.0, 5.0), "lane0"),  # 2 m apart: overlap
            ]
        )
        with pytest.raises(ValueError):
            scene.check_disjoint(VehicleFootprint())

    def test_scene_json_roundtrip(self, crossroad):
        scene = simple_scene(
            [
                (1, state_on(crossroad, "we_left", 50.0, 7.0), "we_left"),
                (2, state_on(crossroad, "ew", 45.0, 9.0), "ew"),
            ]
        )
        scene.provenance["source_index"] = 3
        again = scene_from_dict(scene_to_dict(scene))
        assert again == scene
        assert again.provenance == scene.provenance


class TestMapLoading:
    def test_map_json_roundtrip(self, tmp_path, crossroad):
        path = tmp_path / "map.json"
        mapkit.write_map_json(crossroad, path)
        loaded = load_map(path)
        assert set(loaded.lanes) == set(crossroad.lanes)
        assert loaded.conflicts == crossroad.conflicts
        assert loaded.turn_of("we_left") == "left"

    def test_conflict_must_cross(self, tmp_path, crossroad):
        import json

        path = tmp_path / "map.json"
        mapkit.write_map_json(crossroad, path)
        data = json.loads(path.read_text())
        data["conflicts"].append(["we", "ew"])  # parallel lanes never cross
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError):
            load_map(path)
