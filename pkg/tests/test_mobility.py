import csv
import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rislos.array import Aoa, array_response, search_grid
from rislos.channel import LinkBudget
from rislos.mobility import (BehindSurface, RoomScenario, TrajectoryPoint, aoa_from_position, channel_at,
                             propagation_phase, random_walk, run_tracking, tracking_channels,
                             write_trajectory_csv)
from rislos.seeding import stream


@pytest.fixture(scope="module")
def scenario():
    return RoomScenario()


@pytest.fixture(scope="module")
def walk(scenario):
    return random_walk(scenario, 200.0, np.random.default_rng(17))


def _angle_bound(p, q, center, dims):
    # largest angle a chord of length |p - q| can subtend from ``center``
    a, b = (np.asarray(x)[dims] - np.asarray(center)[dims] for x in (p, q))
    s = np.linalg.norm(a - b)
    return 2 * np.arcsin(min(1.0, s / (2 * np.sqrt(np.linalg.norm(a) * np.linalg.norm(b)))))


class TestScenario:
    def test_defaults(self, scenario):
        assert scenario.step_distance == pytest.approx(0.10)
        assert scenario.ris_center[1] == 0.0

    @pytest.mark.parametrize("kwargs", [dict(wavelength=0.0), dict(step_interval=-1.0), dict(wall_margin=3.0)])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            RoomScenario(**kwargs)


class TestRandomWalk:
    def test_point_count(self, walk):
        assert len(walk) == 1001
        assert walk[-1].t == pytest.approx(200.0)

    def test_step_length(self, scenario, walk):
        pos = np.array([p.position for p in walk])
        steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        assert np.all(steps <= 0.1 + 1e-12)
        # shorter only when a wall reflection folded the step
        near_wall = np.array([min(x - 0.1, 4.9 - x, y - 0.1, 4.9 - y) < 0.1 for x, y, _ in pos[1:]])
        assert np.allclose(steps[~near_wall], 0.1)

    def test_inside_room(self, scenario, walk):
        pos = np.array([p.position for p in walk])
        assert np.all((pos[:, 0] > 0) & (pos[:, 0] < 5) & (pos[:, 1] > 0) & (pos[:, 1] < 5))
        assert np.all(pos[:, 2] == scenario.ue_height)

    def test_deterministic(self, scenario):
        a = random_walk(scenario, 20.0, np.random.default_rng(3))
        b = random_walk(scenario, 20.0, np.random.default_rng(3))
        np.testing.assert_array_equal([p.position for p in a], [p.position for p in b])

    def test_explicit_start(self, scenario):
        pts = random_walk(scenario, 1.0, np.random.default_rng(0), start=(1.0, 2.0))
        np.testing.assert_array_equal(pts[0].position, [1.0, 2.0, 1.0])

    def test_rejects_nonpositive_duration(self, scenario):
        with pytest.raises(ValueError):
            random_walk(scenario, 0.0, np.random.default_rng(0))

    def test_aoa_continuity(self, scenario, walk):
        for p, q in zip(walk, walk[1:]):
            assert abs(q.aoa.elevation - p.aoa.elevation) <= _angle_bound(
                p.position, q.position, scenario.ris_center, [0, 1, 2]) + 1e-12
            # the UE moves at constant height, so azimuth is an angle in the floor plane
            assert abs(q.aoa.azimuth - p.aoa.azimuth) <= _angle_bound(
                p.position, q.position, scenario.ris_center, [0, 1]) + 1e-12

    @pytest.mark.parametrize("seed", [17, 18, 19])
    def test_fast_slew_near_surface(self, scenario, seed):
        pts = random_walk(scenario, 200.0, np.random.default_rng(seed))
        slew = np.abs(np.diff([p.aoa.azimuth for p in pts]))
        assert slew.max() >= 5 * np.median(slew)

    def test_trajectory_csv(self, tmp_path, walk):
        path = tmp_path / "walk.csv"
        write_trajectory_csv(walk[:5], path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "x", "y", "z", "az", "el", "distance"]
        assert float(rows[3][4]) == walk[2].aoa.azimuth and len(rows) == 6


class TestAoaFromPosition:
    def test_boresight(self, scenario):
        assert aoa_from_position(scenario, (2.5, 3.0, 1.5)) == Aoa(0.0, 0.0)

    def test_horizontal_45(self, scenario):
        aoa = aoa_from_position(scenario, (4.5, 2.0, 1.5))
        assert aoa.azimuth == pytest.approx(np.pi / 4) and aoa.elevation == pytest.approx(0)

    def test_negative_azimuth(self, scenario):
        assert aoa_from_position(scenario, (0.5, 2.0, 1.5)).azimuth == pytest.approx(-np.pi / 4)

    def test_elevation_45(self, scenario):
        r = 2.0
        aoa = aoa_from_position(scenario, (2.5, r / np.sqrt(2), 1.5 + r / np.sqrt(2)))
        assert aoa.elevation == pytest.approx(np.pi / 4) and aoa.azimuth == pytest.approx(0)

    @pytest.mark.parametrize("pos", [(2.5, 0.0, 1.0), (1.0, -0.3, 1.5)])
    def test_behind_or_on_surface(self, scenario, pos):
        with pytest.raises(BehindSurface):
            aoa_from_position(scenario, pos)

    @given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 3))
    def test_within_domain_and_consistent(self, x, y, z):
        sc = RoomScenario()
        aoa = aoa_from_position(sc, (x, y, z))
        assert abs(aoa.azimuth) < np.pi / 2 and abs(aoa.elevation) <= np.pi / 2
        r = np.array([x, y, z]) - np.array(sc.ris_center)
        u = r / np.linalg.norm(r)
        expected = [np.cos(aoa.elevation) * np.sin(aoa.azimuth), np.cos(aoa.elevation) * np.cos(aoa.azimuth),
                    np.sin(aoa.elevation)]
        np.testing.assert_allclose(u, expected, atol=1e-12)


class TestChannelAt:
    def test_wavelength_periodicity(self, scenario):
        d = 2.345
        assert propagation_phase(scenario, d + scenario.wavelength) == pytest.approx(
            propagation_phase(scenario, d), abs=1e-9)

    def test_gain_constant(self, scenario, walk, geom, h):
        rng = np.random.default_rng(0)
        for p in walk[::50]:
            state = channel_at(scenario, p, 0.1, rng, geom, h)
            assert np.vdot(state.g, state.g).real == pytest.approx(64 * 0.1)
            assert abs(state.d) == pytest.approx(1.0)

    def test_los_phase_and_direction(self, scenario, walk, geom, h):
        p = walk[10]
        state = channel_at(scenario, p, 0.1, np.random.default_rng(0), geom, h)
        np.testing.assert_allclose(state.g, np.sqrt(0.1) * np.exp(1j * propagation_phase(scenario, p.distance))
                                   * array_response(geom, p.aoa))

    def test_gaussian_direct(self, scenario, walk, geom, h):
        rng = np.random.default_rng(1)
        d = [channel_at(scenario, walk[0], 0.1, rng, geom, h, direct="gaussian").d for _ in range(20_000)]
        assert np.mean(np.abs(d) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_unknown_direct_model(self, scenario, walk, geom, h):
        with pytest.raises(ValueError):
            channel_at(scenario, walk[0], 0.1, np.random.default_rng(0), geom, h, direct="rician")


class TestTracking:
    def test_noiseless_every_step_on_grid(self, scenario, geom, h):
        # trajectory angles snapped to the 1 degree search grid
        snap = lambda x: np.round(np.rad2deg(x)) * np.pi / 180
        rng = stream(5, "channel")
        channels = [channel_at(scenario, dataclasses.replace(p, aoa=Aoa(snap(p.aoa.azimuth), snap(p.aoa.elevation))),
                               0.1, rng, geom, h) for p in random_walk(scenario, 20.0, stream(5, "walk"))]
        trace = run_tracking(scenario, scenario.step_interval, 6, 20.0, 5, noiseless_pilots=True, channels=channels)
        assert np.all(trace.ratio >= 0.9)

    def test_bounded_by_max(self, scenario):
        trace = run_tracking(scenario, 1.0, 6, 20.0, 6, grid=search_grid(61, 61))
        assert np.all(trace.se_achieved <= trace.se_max + 1e-12)
        assert trace.t.size == 101

    def test_same_seed_same_trace(self, scenario):
        run = lambda: run_tracking(scenario, 1.0, 4, 6.0, 9, grid=search_grid(31, 31), noise_realizations=2)
        a, b = run(), run()
        np.testing.assert_array_equal(a.se_achieved, b.se_achieved)
        np.testing.assert_array_equal(a.se_max, b.se_max)

    def test_policies_share_channels(self, scenario):
        kw = dict(grid=search_grid(31, 31))
        a = run_tracking(scenario, 1.0, 4, 10.0, 2, **kw)
        b = run_tracking(scenario, 5.0, 4, 10.0, 2, **kw)
        np.testing.assert_array_equal(a.se_max, b.se_max)
        # the first update happens at t = 0 under both policies
        assert a.se_achieved[0] == b.se_achieved[0]

    def test_held_configuration(self, scenario, geom):
        # with a 10 s policy the configuration is frozen between updates, so the
        # achieved SE is the SE of one fixed theta against the moving channel
        budget = LinkBudget()
        h = array_response(geom, Aoa(0.3, -0.2))
        _, channels = tracking_channels(scenario, 4.0, 4, geom, budget, h)
        trace = run_tracking(scenario, 10.0, 6, 4.0, 4, grid=search_grid(31, 31), channels=channels)
        assert trace.se_achieved.size == len(channels) == 21

    @pytest.mark.parametrize("period", [0.1, 0.3, 0.0])
    def test_rejects_off_step_period(self, scenario, period):
        with pytest.raises(ValueError):
            run_tracking(scenario, period, 6, 2.0, 0)


def test_point_record():
    p = TrajectoryPoint(0.0, np.zeros(3), Aoa(0, 0), 1.0)
    assert p.distance == 1.0
