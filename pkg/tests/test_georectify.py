"""Georectification tests: GCP homography fit, RMSE metric, cubic
resampling, inverse warping."""

import numpy as np
import pytest

from shoremap.errors import (
    DegenerateConfiguration,
    EmptyGcpSet,
    InsufficientGcps,
)
from shoremap.geometry import (
    GridGeometry,
    Homography,
    Point2,
    Point3,
    apply_homography,
)
from shoremap.georectify import (
    Gcp,
    bicubic_sample,
    bicubic_sample_many,
    fit_ground_homography,
    rmse_xy,
    warp_to_grid,
)
from shoremap.stereo import RgbaImage

H_TRUE = Homography(
    np.array([[1.2, 0.1, 5.0], [0.05, 0.9, -3.0], [1e-4, -2e-4, 1.0]])
)
SEVEN_PX = [
    (100, 100), (1800, 120), (200, 950), (1700, 900),
    (960, 540), (500, 700), (1500, 300),
]


def _gcps_through(h, px_list, z=0.0):
    gcps = []
    for i, (u, v) in enumerate(px_list):
        w = apply_homography(h, Point2(u, v))
        gcps.append(
            Gcp(id=f"g{i}", world=Point3(w.x, w.y, z), image=Point2(u, v))
        )
    return gcps


def _opaque(rng, h, w):
    px = rng.integers(0, 256, (h, w, 4), dtype=np.uint8)
    px[:, :, 3] = 255
    return RgbaImage(px)


class TestFitGroundHomography:
    def test_exact_square_to_square(self):
        gcps = [
            Gcp(id="a", world=Point3(10.0, 20.0, 0), image=Point2(0, 0)),
            Gcp(id="b", world=Point3(12.0, 20.0, 0), image=Point2(100, 0)),
            Gcp(id="c", world=Point3(12.0, 22.0, 0), image=Point2(100, 100)),
            Gcp(id="d", world=Point3(10.0, 22.0, 0), image=Point2(0, 100)),
        ]
        h = fit_ground_homography(gcps)
        for g in gcps:
            m = apply_homography(h, g.image)
            assert abs(m.x - g.world.x) < 1e-9
            assert abs(m.y - g.world.y) < 1e-9

    def test_seven_point_projective_recovery(self):
        h = fit_ground_homography(_gcps_through(H_TRUE, SEVEN_PX))
        rel = np.abs(h.h - H_TRUE.h).max() / np.abs(H_TRUE.h).max()
        assert rel < 1e-8

    def test_insufficient_gcps(self):
        gcps = _gcps_through(H_TRUE, SEVEN_PX[:3])
        with pytest.raises(InsufficientGcps):
            fit_ground_homography(gcps)

    def test_gcps_without_observations_ignored(self):
        gcps = _gcps_through(H_TRUE, SEVEN_PX[:3])
        gcps.append(Gcp(id="blind", world=Point3(0, 0, 0)))
        with pytest.raises(InsufficientGcps):
            fit_ground_homography(gcps)

    def test_collinear_degenerate(self):
        gcps = [
            Gcp(id=f"g{i}", world=Point3(float(i), 2.0 * i, 0),
                image=Point2(float(i), float(i)))
            for i in range(5)
        ]
        with pytest.raises(DegenerateConfiguration):
            fit_ground_homography(gcps)

    def test_world_translation_equivariance(self):
        gcps = _gcps_through(H_TRUE, SEVEN_PX)
        tx, ty = 123.456, -78.9
        shifted = [
            Gcp(id=g.id, world=Point3(g.world.x + tx, g.world.y + ty, 0),
                image=g.image)
            for g in gcps
        ]
        h0 = fit_ground_homography(gcps)
        h1 = fit_ground_homography(shifted)
        for u, v in SEVEN_PX:
            a = apply_homography(h0, Point2(u, v))
            b = apply_homography(h1, Point2(u, v))
            assert abs((b.x - a.x) - tx) < 1e-9
            assert abs((b.y - a.y) - ty) < 1e-9


class TestRmse:
    def test_exact_fit_zero(self):
        gcps = _gcps_through(H_TRUE, SEVEN_PX[:4])
        h = fit_ground_homography(gcps)
        rep = rmse_xy(h, gcps)
        assert rep.rmse_x < 1e-9
        assert rep.rmse_y < 1e-9

    def test_hand_computed_value(self):
        # dx residuals {0.03, 0.04} m: rmse_x = sqrt(0.0025/2) = 0.03535...
        gcps = [
            Gcp(id="a", world=Point3(-0.03, 0.0, 0), image=Point2(0, 0)),
            Gcp(id="b", world=Point3(1 - 0.04, 1.0, 0), image=Point2(1, 1)),
        ]
        rep = rmse_xy(Homography.identity(), gcps)
        assert rep.rmse_x == pytest.approx(0.035355339059327376, abs=1e-12)
        assert rep.rmse_y == pytest.approx(0.0, abs=1e-12)

    def test_rooted_identity_relation(self):
        rng = np.random.default_rng(2)
        gcps = []
        for i, (u, v) in enumerate(SEVEN_PX):
            w = apply_homography(H_TRUE, Point2(u, v))
            gcps.append(
                Gcp(id=f"g{i}",
                    world=Point3(w.x + rng.normal(0, 0.05), w.y + rng.normal(0, 0.05), 0),
                    image=Point2(u, v))
            )
        rep = rmse_xy(H_TRUE, gcps)
        dx = np.array([r[1] for r in rep.per_point_residuals])
        assert rep.rmse_x**2 * len(dx) == pytest.approx((dx**2).sum(), rel=1e-9)

    def test_empty_set(self):
        with pytest.raises(EmptyGcpSet):
            rmse_xy(Homography.identity(), [Gcp(id="x", world=Point3(0, 0, 0))])

    def test_survey_noise_band(self):
        # sigma = 3 cm world noise on 7 GCPs; the rooted per-axis RMSE must
        # land in [1.5, 4.5] cm on average over 100 trials.
        rng = np.random.default_rng(0)
        vals_x, vals_y = [], []
        clean = _gcps_through(H_TRUE, SEVEN_PX)
        for _ in range(100):
            noisy = [
                Gcp(id=g.id,
                    world=Point3(g.world.x + rng.normal(0, 0.03),
                                 g.world.y + rng.normal(0, 0.03), 0),
                    image=g.image)
                for g in clean
            ]
            h = fit_ground_homography(noisy)
            rep = rmse_xy(h, noisy)
            vals_x.append(rep.rmse_x)
            vals_y.append(rep.rmse_y)
        assert 0.015 <= np.mean(vals_x) <= 0.045
        assert 0.015 <= np.mean(vals_y) <= 0.045

    def test_residuals_grow_with_distance(self):
        # Noise proportional to distance from the camera: residual
        # magnitudes must rank-correlate positively with distance.
        rng = np.random.default_rng(5)
        cam_xy = np.array([0.0, 0.0])
        h = Homography(np.array([[0.01, 0, 0], [0, 0.01, 0], [0, 0, 1.0]]))
        corr = []
        for _ in range(20):
            gcps = []
            dists = []
            for i, (u, v) in enumerate(SEVEN_PX):
                w = apply_homography(h, Point2(u, v))
                dist = np.hypot(w.x - cam_xy[0], w.y - cam_xy[1])
                sigma = 0.002 * dist
                gcps.append(
                    Gcp(id=f"g{i}",
                        world=Point3(w.x + rng.normal(0, sigma),
                                     w.y + rng.normal(0, sigma), 0),
                        image=Point2(u, v))
                )
                dists.append(dist)
            rep = rmse_xy(h, gcps)
            mags = [np.hypot(dx, dy) for _, dx, dy in rep.per_point_residuals]
            rank_d = np.argsort(np.argsort(dists))
            rank_m = np.argsort(np.argsort(mags))
            corr.append(np.corrcoef(rank_d, rank_m)[0, 1])
        assert np.mean(corr) > 0


class TestBicubic:
    def test_integer_coordinates_exact(self):
        rng = np.random.default_rng(3)
        img = _opaque(rng, 10, 12)
        for x, y in ((5, 4), (1, 1), (9, 7)):
            assert bicubic_sample(img, float(x), float(y)) == tuple(img.pixels[y, x])

    def test_constant_image_constant_everywhere(self):
        px = np.full((9, 9, 4), 200, dtype=np.uint8)
        img = RgbaImage(px)
        rng = np.random.default_rng(4)
        xs = rng.uniform(1.0, 6.9, 50)
        ys = rng.uniform(1.0, 5.9, 50)
        out, inside = bicubic_sample_many(img, xs, ys)
        assert inside.all()
        assert (out == 200).all()

    def test_linear_ramp_reproduced_at_half_pixels(self):
        h, w = 8, 8
        px = np.zeros((h, w, 4))
        for y in range(h):
            for x in range(w):
                px[y, x] = (10 * x, 10 * y, 5 * x + 5 * y, 255)
        img = RgbaImage(px.astype(np.uint8))
        out, inside = bicubic_sample_many(
            img, np.array([3.5, 2.5]), np.array([2.5, 4.5])
        )
        assert inside.all()
        assert tuple(out[0]) == (35, 25, 30, 255)
        assert tuple(out[1]) == (25, 45, 35, 255)

    def test_out_of_support_is_nodata(self):
        img = _opaque(np.random.default_rng(5), 10, 12)
        assert bicubic_sample(img, 0.5, 5.0) is None
        assert bicubic_sample(img, 10.0, 5.0) is None
        assert bicubic_sample(img, -3.0, 2.0) is None


class TestWarp:
    def test_identity_reproduces_source_on_valid_overlap(self):
        rng = np.random.default_rng(6)
        img = _opaque(rng, 10, 12)
        geom = GridGeometry(
            origin_x=0.0, origin_y=9.0, cell_size=1.0, n_cols=12, n_rows=10
        )
        warped = warp_to_grid(img, Homography.identity(), geom)
        # Output row r samples source row 9 - r (north-up grid), giving a
        # vertically flipped copy; valid support is the 4x4-interior.
        flip = img.pixels[::-1]
        valid = warped.bands[:, :, 3] == 255
        expected = np.zeros((10, 12), dtype=bool)
        expected[2:9, 1:10] = True
        assert np.array_equal(valid, expected)
        assert np.array_equal(warped.bands[valid], flip[valid])

    def test_identity_row_aligned_overlap(self):
        rng = np.random.default_rng(7)
        img = _opaque(rng, 10, 12)
        geom = GridGeometry(
            origin_x=0.0, origin_y=5.0, cell_size=1.0, n_cols=12, n_rows=1
        )
        warped = warp_to_grid(img, Homography.identity(), geom)
        assert np.array_equal(warped.bands[0, 1:10], img.pixels[5, 1:10])

    def test_translation_shifted_copy_with_vacated_strip(self):
        rng = np.random.default_rng(8)
        img = _opaque(rng, 10, 12)
        h = Homography.translation(5, 7)
        aligned = GridGeometry(
            origin_x=5.0, origin_y=16.0, cell_size=1.0, n_cols=12, n_rows=10
        )
        w_aligned = warp_to_grid(img, h, aligned)
        flip = img.pixels[::-1]
        valid = w_aligned.bands[:, :, 3] == 255
        assert np.array_equal(w_aligned.bands[valid], flip[valid])
        # Grid 3 columns further west: the extra strip has no source data.
        west = GridGeometry(
            origin_x=2.0, origin_y=16.0, cell_size=1.0, n_cols=12, n_rows=10
        )
        w_west = warp_to_grid(img, h, west)
        assert (w_west.bands[:, :4, 3] == 0).all()
        assert np.array_equal(w_west.bands[2:9, 4:12], w_aligned.bands[2:9, 1:9])

    def test_grid_outside_footprint_all_nodata(self):
        img = _opaque(np.random.default_rng(9), 10, 12)
        geom = GridGeometry(
            origin_x=500.0, origin_y=500.0, cell_size=1.0, n_cols=6, n_rows=6
        )
        warped = warp_to_grid(img, Homography.identity(), geom)
        assert (warped.bands == 0).all()
