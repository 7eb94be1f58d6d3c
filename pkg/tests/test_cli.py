"""CLI contract tests: exit codes, artifacts, report fragments."""

import json

import numpy as np
import pytest

from shoremap.calibration import BoardSpec
from shoremap.cli import main
from shoremap.formats import (
    write_corner_csv,
    write_gcp_csv,
    write_las,
    write_pair_csv,
    write_ppm,
)
from shoremap.geometry import Point2, Point3
from shoremap.georectify import Gcp
from shoremap.registration import PointPairSet
from shoremap.stereo import PointCloud, RgbaImage

from synth import FACTORY_INTRINSICS, BeachScene, make_calibration_views

BOARD = BoardSpec(cols=9, rows=6, square_size=0.025)


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    scene = BeachScene(seed=3, width=160, height=120)
    root = tmp_path_factory.mktemp("scene")
    paths = scene.write_fixture(root)
    return scene, paths


def _write_corner_fixture(path, n_views=5, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    views, _ = make_calibration_views(FACTORY_INTRINSICS, BOARD, n_views, noise, rng)
    path.write_text(write_corner_csv([list(v.image_points) for v in views]))


class TestCalibrate:
    def test_happy_path(self, tmp_path, capsys):
        corners = tmp_path / "corners.csv"
        _write_corner_fixture(corners, n_views=5)
        out = tmp_path / "calib.txt"
        code = main([
            "calibrate", "--corners", str(corners),
            "--board-cols", "9", "--board-rows", "6", "--square-size", "0.025",
            "--image-width", "1920", "--image-height", "1080",
            "--baseline", "0.12", "--out", str(out),
        ])
        assert code == 0
        assert out.exists()
        fragment = json.loads(capsys.readouterr().out)
        assert fragment["calibration"]["mean_reprojection_error"]["value"] < 1e-6
        assert fragment["calibration"]["mean_reprojection_error"]["unit"] == "px"

    def test_stereo_pair_per_eye_and_pooled(self, tmp_path, capsys):
        left = tmp_path / "left_corners.csv"
        right = tmp_path / "right_corners.csv"
        _write_corner_fixture(left, n_views=4, seed=1)
        _write_corner_fixture(right, n_views=4, seed=2)
        out = tmp_path / "calib.txt"
        code = main([
            "calibrate", "--corners", str(left), str(right),
            "--board-cols", "9", "--board-rows", "6", "--square-size", "0.025",
            "--image-width", "1920", "--image-height", "1080",
            "--out", str(out),
        ])
        assert code == 0
        fragment = json.loads(capsys.readouterr().out)["calibration"]
        assert len(fragment["eyes"]) == 2
        assert fragment["pooled_mean_reprojection_error"]["value"] < 1e-6
        assert (tmp_path / "calib.left_corners.txt").exists()
        assert (tmp_path / "calib.right_corners.txt").exists()

    def test_two_views_exit_2(self, tmp_path, capsys):
        corners = tmp_path / "corners.csv"
        _write_corner_fixture(corners, n_views=2)
        code = main([
            "calibrate", "--corners", str(corners),
            "--board-cols", "9", "--board-rows", "6", "--square-size", "0.025",
            "--image-width", "1920", "--image-height", "1080",
            "--out", str(tmp_path / "c.txt"),
        ])
        assert code == 2
        assert "3 views" in capsys.readouterr().err

    def test_wrong_corner_count_exit_2(self, tmp_path):
        corners = tmp_path / "corners.csv"
        _write_corner_fixture(corners, n_views=4)
        code = main([
            "calibrate", "--corners", str(corners),
            "--board-cols", "7", "--board-rows", "5", "--square-size", "0.025",
            "--image-width", "1920", "--image-height", "1080",
            "--out", str(tmp_path / "c.txt"),
        ])
        assert code == 2


class TestRectify:
    def _exact_fixture(self, tmp_path):
        rng = np.random.default_rng(1)
        px = rng.integers(0, 256, (40, 50, 4), dtype=np.uint8)
        px[:, :, 3] = 255
        image = tmp_path / "photo.ppm"
        image.write_bytes(write_ppm(RgbaImage(px)))
        # Image pixel (u, v) sits at world (10 + 0.1 u, 30 - 0.1 v).
        gcps = [
            Gcp(id=f"g{i}", world=Point3(10 + 0.1 * u, 30 - 0.1 * v, 0.0),
                image=Point2(u, v))
            for i, (u, v) in enumerate([(5, 5), (45, 5), (45, 35), (5, 35), (25, 20)])
        ]
        gcp_path = tmp_path / "gcps.csv"
        gcp_path.write_text(write_gcp_csv(gcps))
        return image, gcp_path

    def test_exact_fit(self, tmp_path, capsys):
        image, gcps = self._exact_fixture(tmp_path)
        code = main([
            "rectify", "--image", str(image), "--gcps", str(gcps),
            "--cell-size", "0.1", "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 0
        fragment = json.loads(capsys.readouterr().out)["georectification"]
        assert fragment["rmse_x"]["value"] < 1e-9
        assert fragment["rmse_y"]["value"] < 1e-9
        assert (tmp_path / "out" / "rectified.ppm").exists()
        assert (tmp_path / "out" / "rectified.wld").exists()

    def test_three_gcps_exit_2(self, tmp_path):
        image, _ = self._exact_fixture(tmp_path)
        gcps = [
            Gcp(id=f"g{i}", world=Point3(float(i), float(i), 0.0),
                image=Point2(float(i * 10), float(i * 5)))
            for i in range(3)
        ]
        path = tmp_path / "three.csv"
        path.write_text(write_gcp_csv(gcps))
        assert main([
            "rectify", "--image", str(image), "--gcps", str(path),
            "--out-dir", str(tmp_path / "out"),
        ]) == 2

    def test_collinear_gcps_exit_3(self, tmp_path):
        image, _ = self._exact_fixture(tmp_path)
        gcps = [
            Gcp(id=f"g{i}", world=Point3(float(i), 2.0 * i, 0.0),
                image=Point2(float(i * 10), float(i * 10)))
            for i in range(5)
        ]
        path = tmp_path / "collinear.csv"
        path.write_text(write_gcp_csv(gcps))
        assert main([
            "rectify", "--image", str(image), "--gcps", str(path),
            "--out-dir", str(tmp_path / "out"),
        ]) == 3

    def test_missing_image_exit_2(self, tmp_path, capsys):
        _, gcps = self._exact_fixture(tmp_path)
        code = main([
            "rectify", "--image", str(tmp_path / "nope.ppm"), "--gcps", str(gcps),
            "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 2
        assert "nope.ppm" in capsys.readouterr().err


class TestDepthRegisterDsmCheck:
    def test_depth_stage(self, scene_dir, tmp_path, capsys):
        _, paths = scene_dir
        code = main([
            "depth", "--left", str(paths["left"]), "--right", str(paths["right"]),
            "--calibration", str(paths["calibration"]),
            "--d-min", "15", "--d-max", "32", "--z-max", "2.2",
            "--out-dir", str(tmp_path),
        ])
        assert code == 0
        fragment = json.loads(capsys.readouterr().out)["depth"]
        assert fragment["points"] > 1000
        assert (tmp_path / "cloud.las").exists()

    def test_register_dsm_check_chain(self, scene_dir, tmp_path, capsys):
        scene, paths = scene_dir
        assert main([
            "depth", "--left", str(paths["left"]), "--right", str(paths["right"]),
            "--calibration", str(paths["calibration"]),
            "--d-min", "15", "--d-max", "32", "--z-max", "2.2",
            "--out-dir", str(tmp_path),
        ]) == 0
        capsys.readouterr()
        assert main([
            "register", "--cloud", str(tmp_path / "cloud.las"),
            "--pairs", str(paths["pairs"]), "--out-dir", str(tmp_path),
        ]) == 0
        reg = json.loads(capsys.readouterr().out)["registration"]
        assert reg["rms"]["value"] < 0.2
        assert main([
            "dsm", "--cloud", str(tmp_path / "registered.las"),
            "--cell-size", "0.04", "--kill", "0.1",
            "--clip", str(paths["clip"]), "--out-dir", str(tmp_path),
        ]) == 0
        dsm = json.loads(capsys.readouterr().out)["dsm"]
        assert dsm["data_cells"] > 0
        assert main([
            "check", "--cloud", str(tmp_path / "registered.las"),
            "--gcps", str(paths["gcps"]),
        ]) == 0
        chk = json.loads(capsys.readouterr().out)["vertical_check"]
        assert chk["rmse_dz"]["value"] < 0.2

    def test_dsm_bad_kill_exit_2(self, scene_dir, tmp_path):
        rng = np.random.default_rng(2)
        cloud = PointCloud(xyz=rng.random((50, 3)))
        las = tmp_path / "c.las"
        las.write_bytes(write_las(cloud))
        assert main([
            "dsm", "--cloud", str(las), "--kill", "0",
            "--out-dir", str(tmp_path),
        ]) == 2

    def test_register_missing_cloud_exit_2(self, scene_dir, tmp_path, capsys):
        _, paths = scene_dir
        code = main([
            "register", "--cloud", str(tmp_path / "absent.las"),
            "--pairs", str(paths["pairs"]), "--out-dir", str(tmp_path),
        ])
        assert code == 2
        assert "absent.las" in capsys.readouterr().err


class TestRun:
    def test_missing_input_fails_before_stages(self, scene_dir, tmp_path, capsys):
        _, paths = scene_dir
        config = paths["config"].read_text().replace(
            str(paths["gcps"]), str(tmp_path / "missing.csv")
        )
        conf = tmp_path / "bad.conf"
        conf.write_text(config)
        out_dir = tmp_path / "out"
        code = main(["run", "--config", str(conf), "--out-dir", str(out_dir)])
        assert code == 2
        assert not (out_dir / "cloud.las").exists()

    def test_collinear_pairs_fail_register_after_depth(
        self, scene_dir, tmp_path, capsys
    ):
        _, paths = scene_dir
        bad_pairs = PointPairSet(
            ids=("a", "b", "c", "d"),
            source=np.array([[0.0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]]),
            target=np.array([[0.0, 0, 1], [1, 1, 2], [2, 2, 3], [3, 3, 4]]),
        )
        pair_path = tmp_path / "collinear.csv"
        pair_path.write_text(write_pair_csv(bad_pairs))
        conf = tmp_path / "bad.conf"
        conf.write_text(
            paths["config"].read_text().replace(str(paths["pairs"]), str(pair_path))
        )
        out_dir = tmp_path / "out"
        report_path = out_dir / "report.json"
        code = main([
            "run", "--config", str(conf), "--out-dir", str(out_dir),
            "--report", str(report_path),
        ])
        assert code == 3
        report = json.loads(report_path.read_text())
        assert report["failed_stage"] == "register"
        assert report["stages_completed"] == ["depth"]
        assert (out_dir / "cloud.las").exists()

    def test_set_overrides(self, scene_dir, tmp_path, capsys):
        _, paths = scene_dir
        out_dir = tmp_path / "out"
        code = main([
            "run", "--config", str(paths["config"]),
            "--out-dir", str(out_dir),
            "--set", "dsm.cell_size=0.05",
        ])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["stages"]["dsm"]["cell_size"]["value"] == 0.05
        assert report["config"]["dsm.cell_size"] == "0.05"


class TestEnvironment:
    def test_out_dir_env_default(self, monkeypatch, tmp_path):
        monkeypatch.setenv("SHOREMAP_OUT_DIR", str(tmp_path / "envout"))
        from shoremap.cli import build_parser

        args = build_parser().parse_args(["dsm", "--cloud", "x.las"])
        assert args.out_dir == str(tmp_path / "envout")
