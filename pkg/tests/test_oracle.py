import math

import numpy as np
import pytest

from firefront.errors import OutOfDomainError, TimeDependentMetricError
from firefront.front import IgnitionCircle, IgnitionPoint, propagate
from firefront.oracle import compare_front, grid_arrival, stencil_offsets
from firefront.terrain import load_dem
from conftest import make_metric

P0 = (0.0, 0.0)
BOX = (-8.0, 8.0, -8.0, 8.0)


class TestStencil:
    def test_counts(self):
        assert len(stencil_offsets(2)) == 16
        assert len(stencil_offsets(3)) == 32

    def test_coprime(self):
        for r in (2, 3):
            for dx, dy in stencil_offsets(r):
                assert math.gcd(int(abs(dx)), int(abs(dy))) == 1

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            stencil_offsets(4)


class TestGridArrival:
    def test_flat_isotropic_distance(self, isotropic_metric):
        arr = grid_arrival(isotropic_metric, IgnitionPoint(P0), BOX, 201, 201,
                           radius=3)
        r = np.random.default_rng(20)
        for _ in range(200):
            x, y = r.uniform(-6, 6, 2)
            d = math.hypot(x, y)
            if d < 0.5:
                continue
            assert arr.sample(x, y) == pytest.approx(d / 3.0, rel=0.02)

    def test_ignition_node_zero(self, isotropic_metric):
        arr = grid_arrival(isotropic_metric, IgnitionPoint(P0), BOX, 201, 201)
        assert arr.sample(0.0, 0.0) == 0.0

    def test_wind_downwind_distance(self, wind_metric):
        # speed 6.4 downwind: arrival at (6.4, 0) is 1.0
        arr = grid_arrival(wind_metric, IgnitionPoint(P0), BOX, 321, 321, radius=3)
        assert arr.sample(6.4, 0.0) == pytest.approx(1.0, rel=0.02)
        assert arr.sample(-1.6, 0.0) == pytest.approx(1.0, rel=0.02)

    def test_refinement_never_slower(self, wind_metric):
        a2 = grid_arrival(wind_metric, IgnitionPoint(P0), BOX, 101, 101, radius=2)
        a3 = grid_arrival(wind_metric, IgnitionPoint(P0), BOX, 101, 101, radius=3)
        finite = np.isfinite(a2.times)
        assert (a3.times[finite] <= a2.times[finite] + 1e-12).all()
        assert (a3.times[finite] < a2.times[finite] - 1e-12).any()

    def test_radial_symmetry(self, isotropic_metric):
        arr = grid_arrival(isotropic_metric, IgnitionPoint(P0), BOX, 161, 161)
        t = arr.times
        np.testing.assert_allclose(t, t[::-1, :], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(t, t[:, ::-1], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(t, t.T, rtol=1e-9, atol=1e-12)

    def test_monotone_relaxation(self, hill_metric):
        # label-setting with positive costs: settled times are final
        arr = grid_arrival(hill_metric, IgnitionCircle((-1.0, 0.0), 0.2),
                           (-6, 6, -6, 6), 101, 101)
        assert np.isfinite(arr.times).all()
        assert (arr.times >= 0).all()

    def test_time_dependent_rejected(self, flat_terrain):
        m = make_metric(flat_terrain, "1+t", 1.0)
        with pytest.raises(TimeDependentMetricError):
            grid_arrival(m, IgnitionPoint(P0), BOX, 51, 51)

    def test_ignition_outside_grid(self, isotropic_metric):
        with pytest.raises(OutOfDomainError):
            grid_arrival(isotropic_metric, IgnitionPoint((100.0, 0.0)), BOX, 51, 51)


@pytest.fixture(scope="module")
def iso_run(isotropic_metric):
    fm = propagate(isotropic_metric, IgnitionPoint(P0), n=64, dt=1e-2,
                   t_end=2.0, output_interval=1.0, convexity_audit=False)
    arr = grid_arrival(isotropic_metric, IgnitionPoint(P0), BOX, 401, 401,
                       radius=3)
    return fm, arr


class TestCompareFront:

    def test_flat_isotropic_statistics(self, iso_run):
        fm, arr = iso_run
        rep = compare_front(arr, fm, 1.0)
        assert rep.median <= 0.01
        assert rep.p95 <= 0.02

    def test_front_never_inside_earlier_burned(self, iso_run):
        # first-arrival soundness: oracle arrival at a live front vertex is
        # never clearly earlier than the front time
        fm, arr = iso_run
        for snap in fm.fronts:
            if snap.t <= 0:
                continue
            for x, y in snap.coords:
                assert arr.sample(x, y) >= snap.t * (1 - 0.02)

    def test_mismatched_time_flags_failure(self, iso_run):
        fm, arr = iso_run
        rep = compare_front(arr, fm, 1.0)
        assert rep.ok
        # compare against doubled arrival times: ~100% deviation, flagged
        doubled = type(arr)(x0=arr.x0, y0=arr.y0, cellsize=arr.cellsize,
                            times=arr.times * 2.0)
        rep2 = compare_front(doubled, fm, 2.0)
        assert rep2.median == pytest.approx(1.0, abs=0.05)
        assert not rep2.ok

    def test_gaussian_hill_cross_method(self, hill_metric):
        fm = propagate(hill_metric, IgnitionCircle((-1.0, 0.0), 0.2), n=64,
                       dt=1e-2, t_end=3.44, output_interval=0.86,
                       convexity_audit=False)
        arr = grid_arrival(hill_metric, IgnitionCircle((-1.0, 0.0), 0.2),
                           (-15.9, 15.9, -15.9, 15.9), 400, 400, radius=3)
        for snap in fm.fronts:
            if snap.t <= 0:
                continue
            rep = compare_front(arr, fm, snap.t)
            assert rep.median <= 0.03


class TestArrivalExport:
    def test_dem_format_round_trip(self, isotropic_metric, tmp_path):
        arr = grid_arrival(isotropic_metric, IgnitionPoint(P0), BOX, 51, 51)
        path = tmp_path / "arrival.asc"
        arr.save(path)
        back = load_dem(path)
        np.testing.assert_allclose(back.heights, arr.times, rtol=1e-6)
        assert back.cellsize == pytest.approx(arr.cellsize)
