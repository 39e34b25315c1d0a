import numpy as np
import pytest

from scankit.sphere import (
    GazePoint,
    Scanpath,
    TangentCoords,
    equirect_pixel_to_latlon,
    gnomonic_project,
    gnomonic_unproject,
    latlon_to_equirect_pixel,
    latlon_to_unit,
    spherical_distance,
    spherical_kernel_grid,
    unit_to_latlon,
    wrap_lon,
)


def random_units(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_rotation(seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestParameterization:
    def test_axis_cases(self):
        np.testing.assert_allclose(latlon_to_unit(GazePoint(0.0, 0.0)), [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(latlon_to_unit(GazePoint(np.pi / 2, 0.0)), [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(latlon_to_unit(GazePoint(0.0, np.pi / 2)), [0, 1, 0], atol=1e-15)

    def test_unit_to_latlon_axis(self):
        lat, lon = unit_to_latlon(np.array([1.0, 0.0, 0.0]))
        assert lat == 0.0 and lon == 0.0

    def test_pole_longitude_canonicalized(self):
        lat, lon = unit_to_latlon(np.array([0.0, 0.0, 1.0]))
        assert lat == pytest.approx(np.pi / 2)
        assert lon == 0.0

    def test_round_trip_random(self):
        v = random_units(10_000, seed=1)
        back = latlon_to_unit(unit_to_latlon(v))
        assert np.max(np.abs(back - v)) <= 1e-12

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            unit_to_latlon(np.array([np.nan, 0.0, 1.0]))

    def test_date_line_continuity(self):
        for eps in (1e-3, 1e-6, 1e-9):
            a = latlon_to_unit(GazePoint(0.0, np.pi - eps))
            b = latlon_to_unit(GazePoint(0.0, -np.pi + eps))
            assert spherical_distance(a, b) <= 2.5 * eps


class TestSphericalDistance:
    def test_identity_antipodal_quarter(self):
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        assert spherical_distance(e1, e1) == 0.0
        assert spherical_distance(e1, -e1) == pytest.approx(np.pi)
        assert spherical_distance(e1, e2) == pytest.approx(np.pi / 2)

    def test_metric_axioms(self):
        a = random_units(10_000, seed=2)
        b = random_units(10_000, seed=3)
        c = random_units(10_000, seed=4)
        dab = spherical_distance(a, b)
        dba = spherical_distance(b, a)
        dac = spherical_distance(a, c)
        dcb = spherical_distance(c, b)
        assert np.all(dab >= 0) and np.all(dab <= np.pi)
        assert np.max(np.abs(dab - dba)) <= 1e-15
        assert np.all(dab <= dac + dcb + 1e-12)

    def test_equals_arccos_dot(self):
        a = random_units(10_000, seed=5)
        b = random_units(10_000, seed=6)
        expected = np.arccos(np.clip(np.sum(a * b, axis=1), -1.0, 1.0))
        assert np.max(np.abs(spherical_distance(a, b) - expected)) <= 1e-9

    def test_rotation_isometry(self):
        a = random_units(10_000, seed=7)
        b = random_units(10_000, seed=8)
        rot = random_rotation(seed=9)
        d0 = spherical_distance(a, b)
        d1 = spherical_distance(a @ rot.T, b @ rot.T)
        assert np.max(np.abs(d0 - d1)) <= 1e-9


class TestGnomonic:
    def test_center_maps_to_origin(self):
        c = GazePoint(0.4, -0.9)
        u, v = gnomonic_project(c, c)
        assert u == pytest.approx(0.0, abs=1e-15)
        assert v == pytest.approx(0.0, abs=1e-15)

    def test_equator_closed_form(self):
        for theta in (0.1, 0.5, 1.2, np.pi / 2 - 1e-3):
            u, v = gnomonic_project(GazePoint(0.0, 0.0), GazePoint(0.0, theta))
            assert u == pytest.approx(np.tan(theta), rel=1e-12)
            assert v == pytest.approx(0.0, abs=1e-12)

    def test_out_of_hemisphere_raises(self):
        with pytest.raises(ValueError):
            gnomonic_project(GazePoint(0.0, 0.0), GazePoint(0.0, np.pi / 2 + 0.01))

    def test_unproject_origin_is_center(self):
        c = GazePoint(-0.7, 2.1)
        lat, lon = gnomonic_unproject(c, TangentCoords(0.0, 0.0))
        assert lat == pytest.approx(c.lat)
        assert lon == pytest.approx(c.lon)

    def test_unproject_closed_form(self):
        lat, lon = gnomonic_unproject(GazePoint(0.0, 0.0), TangentCoords(1.0, 0.0))
        assert lat == pytest.approx(0.0, abs=1e-12)
        assert lon == pytest.approx(np.pi / 4, rel=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(10)
        n = 10_000
        centers = GazePoint(rng.uniform(-1.3, 1.3, n), rng.uniform(-np.pi, np.pi, n))
        t = TangentCoords(rng.uniform(-2, 2, n), rng.uniform(-2, 2, n))
        p = gnomonic_unproject(centers, t)
        u, v = gnomonic_project(centers, p)
        assert np.max(np.abs(u - t.u)) <= 1e-9
        assert np.max(np.abs(v - t.v)) <= 1e-9


class TestKernelGrid:
    def test_k1_is_center(self):
        c = GazePoint(0.3, 1.0)
        g = spherical_kernel_grid(c, 1, 0.1)
        assert g.lat.shape == (1, 1)
        assert g.lat[0, 0] == pytest.approx(c.lat)
        assert g.lon[0, 0] == pytest.approx(c.lon)

    def test_center_cell_exact(self):
        g = spherical_kernel_grid(GazePoint(-0.2, 0.5), 5, 0.05)
        assert g.lat[2, 2] == pytest.approx(-0.2)
        assert g.lon[2, 2] == pytest.approx(0.5)

    def test_equator_middle_row_tan_spacing(self):
        step = 0.2
        g = spherical_kernel_grid(GazePoint(0.0, 0.0), 3, step)
        # Middle row lies on the equator; lon follows arctan of the lattice.
        np.testing.assert_allclose(g.lat[1, :], 0.0, atol=1e-12)
        np.testing.assert_allclose(g.lon[1, :], [-step, 0.0, step], atol=1e-12)

    def test_pole_rows_span_wider_longitude(self):
        step = 0.05
        eq = spherical_kernel_grid(GazePoint(0.0, 0.0), 3, step)
        po = spherical_kernel_grid(GazePoint(1.4, 0.0), 3, step)
        span = lambda g: np.ptp(wrap_lon(g.lon - g.lon[1, 1]))
        assert span(po) > span(eq)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            spherical_kernel_grid(GazePoint(0, 0), 4, 0.1)
        with pytest.raises(ValueError):
            spherical_kernel_grid(GazePoint(0, 0), 3, np.pi / 4)
        with pytest.raises(ValueError):
            spherical_kernel_grid(GazePoint(0, 0), 3, -0.1)


class TestEquirectPixels:
    def test_center_pixel_near_origin(self):
        for H, W in ((2, 4), (64, 128), (33, 66)):
            lat, lon = equirect_pixel_to_latlon(H // 2, W // 2, H, W)
            assert abs(lat) <= np.pi / H
            assert abs(lon) <= np.pi / W * 2

    def test_corner_2x4(self):
        lat, lon = equirect_pixel_to_latlon(0, 0, 2, 4)
        assert lat == pytest.approx(np.pi / 4)
        assert lon == pytest.approx(-3 * np.pi / 4)

    def test_pixel_round_trip(self):
        H, W = 16, 32
        rows, cols = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
        p = equirect_pixel_to_latlon(rows, cols, H, W)
        r2, c2 = latlon_to_equirect_pixel(p, H, W)
        assert np.array_equal(r2, rows)
        assert np.array_equal(c2, cols)

    def test_angle_round_trip_within_half_pixel(self):
        rng = np.random.default_rng(11)
        H, W = 8, 16
        lat = rng.uniform(-np.pi / 2, np.pi / 2, 1000)
        lon = rng.uniform(-np.pi, np.pi, 1000)
        r, c = latlon_to_equirect_pixel(GazePoint(lat, lon), H, W)
        lat2, lon2 = equirect_pixel_to_latlon(r, c, H, W)
        assert np.max(np.abs(lat2 - lat)) <= np.pi / H / 2 + 1e-12
        assert np.max(np.abs(wrap_lon(lon2 - lon))) <= 2 * np.pi / W / 2 + 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            equirect_pixel_to_latlon(2, 0, 2, 4)
        with pytest.raises(ValueError):
            equirect_pixel_to_latlon(0, -1, 2, 4)


class TestScanpath:
    def test_validates_unit_norm(self):
        with pytest.raises(ValueError):
            Scanpath(np.array([[1.0, 1.0, 0.0]]))

    def test_immutable_points(self):
        sp = Scanpath(np.array([[1.0, 0.0, 0.0]]))
        with pytest.raises(ValueError):
            sp.points[0, 0] = 2.0

    def test_from_latlon_round_trip(self):
        lats = np.array([0.1, -0.4, 1.0])
        lons = np.array([2.0, -3.0, 0.0])
        sp = Scanpath.from_latlon(lats, lons, sample_rate_hz=2.0)
        assert len(sp) == 3
        assert sp.duration_s == pytest.approx(1.5)
        np.testing.assert_allclose(sp.latlon().lat, lats, atol=1e-12)
        np.testing.assert_allclose(sp.latlon().lon, lons, atol=1e-12)
