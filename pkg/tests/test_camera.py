"""Camera model tests: distortion, projection, stereo depth."""

import numpy as np
import pytest

from shoremap.camera import (
    CameraIntrinsics,
    StereoRig,
    disparity_to_depth,
    distort_normalized,
    pixel_depth_to_point,
    pixels_depth_to_points,
    project,
    project_many,
    undistort_arrays,
    undistort_normalized,
)
from shoremap.errors import (
    BehindCamera,
    NonConvergence,
    NonPositiveDisparity,
    OutOfModelRange,
)
from shoremap.geometry import Point2, Point3

FACTORY = CameraIntrinsics(
    fx=1060.70, fy=1060.70, cx=950.42, cy=572.89,
    image_width=1920, image_height=1080,
)
RECAL = CameraIntrinsics(
    fx=1060.70, fy=1060.70, cx=950.42, cy=572.89,
    k1=0.0046, k2=-0.0715, k3=0.1904, p1=-0.0003, p2=-0.0019,
    image_width=1920, image_height=1080,
)


class TestDistort:
    def test_zero_coefficients_identity(self):
        p = distort_normalized(FACTORY, Point2(0.3, -0.2))
        assert p == Point2(0.3, -0.2)

    def test_on_axis_fixed_point(self):
        assert distort_normalized(RECAL, Point2(0.0, 0.0)) == Point2(0.0, 0.0)

    def test_polynomial_value(self):
        # Frozen from evaluating the model by hand at (0.5, 0):
        # r2 = 0.25; radial = 1 + 0.0046/4 - 0.0715/16 + 0.1904/64
        # x_d = 0.5*radial + p2*(r2 + 2*0.25) = 0.498403125
        # y_d = p1*r2 = -7.5e-05
        p = distort_normalized(RECAL, Point2(0.5, 0.0))
        assert p.x == pytest.approx(0.498403125, abs=1e-15)
        assert p.y == pytest.approx(-7.5e-5, abs=1e-18)

    def test_out_of_model_range(self):
        with pytest.raises(OutOfModelRange):
            distort_normalized(RECAL, Point2(2.5, 1.0))


class TestUndistort:
    def test_zero_coefficients_identity(self):
        p = undistort_normalized(FACTORY, Point2(0.7, -0.4))
        assert p == Point2(0.7, -0.4)

    def test_origin_fixed_point(self):
        assert undistort_normalized(RECAL, Point2(0.0, 0.0)) == Point2(0.0, 0.0)

    def test_round_trip_grid(self):
        xs = np.linspace(-0.9, 0.9, 32)
        gx, gy = np.meshgrid(xs, xs)
        keep = gx * gx + gy * gy <= 1.0
        worst = 0.0
        for x, y in zip(gx[keep].ravel(), gy[keep].ravel()):
            d = distort_normalized(RECAL, Point2(x, y))
            u = undistort_normalized(RECAL, d)
            worst = max(worst, abs(u.x - x), abs(u.y - y))
        assert worst < 1e-8

    def test_non_convergence_on_pathological_model(self):
        # Strong negative radial term plus large tangential coupling: the
        # iteration has no attracting fixed point reachable from the seed.
        bad = CameraIntrinsics(
            fx=1000, fy=1000, cx=500, cy=400, k1=-2.5, p1=0.4, p2=-0.3,
            image_width=1000, image_height=800,
        )
        with pytest.raises(NonConvergence):
            undistort_normalized(bad, Point2(0.3, 0.21))

    def test_vectorized_matches_scalar_bitwise(self):
        # Convergence freezing makes results independent of batching.
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.5, 0.5, (50, 2))
        xs, ys, ok = undistort_arrays(RECAL, pts[:, 0], pts[:, 1])
        assert ok.all()
        for i in range(50):
            p = undistort_normalized(RECAL, Point2(pts[i, 0], pts[i, 1]))
            assert p.x == xs[i]
            assert p.y == ys[i]


class TestProject:
    def test_principal_ray(self):
        p = project(FACTORY, Point3(0, 0, 5))
        assert p == Point2(950.42, 572.89)

    def test_unit_offset(self):
        p = project(FACTORY, Point3(1, 0, 2))
        assert p.x == pytest.approx(950.42 + 530.35, abs=1e-9)
        assert p.y == pytest.approx(572.89, abs=1e-12)

    def test_behind_camera(self):
        with pytest.raises(BehindCamera):
            project(FACTORY, Point3(0, 0, 0))
        with pytest.raises(BehindCamera):
            project(FACTORY, Point3(0, 0, -1))

    def test_zero_distortion_equals_linear_pinhole(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            x, y = rng.uniform(-1, 1, 2)
            z = rng.uniform(0.5, 10)
            p = project(FACTORY, Point3(x * z, y * z, z))
            assert abs(p.x - (FACTORY.fx * x + FACTORY.cx)) < 1e-12 * max(1, abs(p.x))
            assert abs(p.y - (FACTORY.fy * y + FACTORY.cy)) < 1e-12 * max(1, abs(p.y))

    def test_project_many_matches_scalar(self):
        rng = np.random.default_rng(4)
        pts = np.column_stack(
            [rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20), rng.uniform(1, 5, 20)]
        )
        px = project_many(RECAL, pts)
        for i in range(20):
            p = project(RECAL, Point3(*pts[i]))
            assert abs(p.x - px[i, 0]) < 1e-12
            assert abs(p.y - px[i, 1]) < 1e-12


class TestStereoDepth:
    def test_metric_depth(self):
        rig = StereoRig(intrinsics=FACTORY, baseline=0.12)
        assert disparity_to_depth(rig, 127.284) == pytest.approx(1.0, abs=1e-9)
        assert disparity_to_depth(rig, 10.0) == pytest.approx(12.7284, abs=1e-9)

    def test_non_positive_disparity(self):
        rig = StereoRig(intrinsics=FACTORY, baseline=0.12)
        with pytest.raises(NonPositiveDisparity):
            disparity_to_depth(rig, 0.0)
        with pytest.raises(NonPositiveDisparity):
            disparity_to_depth(rig, -2.0)

    def test_strictly_decreasing_in_disparity(self):
        rig = StereoRig(intrinsics=FACTORY, baseline=0.12)
        ds = np.linspace(0.5, 200, 400)
        zs = [disparity_to_depth(rig, d) for d in ds]
        assert all(a > b for a, b in zip(zs, zs[1:]))

    def test_baseline_validation(self):
        with pytest.raises(ValueError):
            StereoRig(intrinsics=FACTORY, baseline=0.0)


class TestBackProjection:
    def test_principal_ray(self):
        p = pixel_depth_to_point(FACTORY, 950.42, 572.89, 5.0)
        assert p == Point3(0.0, 0.0, 5.0)

    def test_unit_normalized_offset(self):
        p = pixel_depth_to_point(FACTORY, 950.42 + 1060.70, 572.89, 2.0)
        assert p.x == pytest.approx(2.0, abs=1e-9)
        assert p.y == pytest.approx(0.0, abs=1e-12)
        assert p.z == 2.0

    def test_round_trip_with_project(self):
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(500):
            u = rng.uniform(200, 1700)
            v = rng.uniform(100, 1000)
            z = rng.uniform(0.5, 15)
            p = pixel_depth_to_point(RECAL, u, v, z)
            q = project(RECAL, p)
            worst = max(worst, abs(q.x - u), abs(q.y - v))
        assert worst < 1e-6

    def test_non_positive_depth(self):
        with pytest.raises(BehindCamera):
            pixel_depth_to_point(FACTORY, 900, 500, 0.0)

    def test_vectorized(self):
        pts, ok = pixels_depth_to_points(
            FACTORY, np.array([950.42]), np.array([572.89]), np.array([3.0])
        )
        assert ok.all()
        np.testing.assert_allclose(pts[0], [0.0, 0.0, 3.0], atol=1e-12)


class TestIntrinsicsValidation:
    def test_principal_point_bounds(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=100, fy=100, cx=2000, cy=500,
                             image_width=1920, image_height=1080)

    def test_positive_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0, fy=100, cx=10, cy=10,
                             image_width=100, image_height=100)
