"""Pipeline stages behind the CLI: each stage reads its inputs, runs one
module, writes its artifacts, and contributes a metrics fragment to the
run report.

All metrics in the report are unit-tagged objects {"value": ..., "unit":
...}. Wall-clock data lives exclusively under the report's "timing" key
so that reports from identical runs are byte-identical outside it.
"""

from __future__ import annotations

import json
import logging
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import BoardSpec, CalibrationView, calibrate
from .camera import CameraIntrinsics, StereoRig, undistort_arrays, _distort_xy
from .errors import InputError, MalformedHeader, ShoremapError
from .geometry import GridGeometry, Homography, Point2
from .georectify import (
    DEFAULT_RECTIFY_CELL_SIZE,
    Gcp,
    bicubic_sample_many,
    fit_ground_homography,
    rmse_xy,
    warp_to_grid,
)
from .registration import apply_alignment, estimate_alignment
from .stereo import (
    DEFAULT_Z_MAX,
    DisparityMap,
    GrayImage,
    RgbaImage,
    cloud_from_disparity,
    match_disparity,
)
from .surface import (
    DEFAULT_DSM_CELL_SIZE,
    DEFAULT_KILL_DISTANCE,
    DsmGrid,
    build_tin,
    clip_dsm,
    rasterize_tin,
    vertical_check,
)
from .formats import (
    parse_corner_csv,
    parse_gcp_csv,
    parse_pair_csv,
    parse_wkt_polygon,
    read_calibration,
    read_las,
    read_pgm,
    read_ppm,
    write_asc,
    write_calibration,
    write_las,
    write_pgm,
    write_ppm,
    write_world_file,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RUN_STAGES = ("depth", "register", "dsm", "check", "rectify")


def metric(value: float, unit: str) -> dict:
    return {"value": value, "unit": unit}


def _las_bytes(cloud) -> bytes:
    """LAS serialization with a 0.1 mm quantum and a per-axis integer
    offset, so world-scale coordinates fit the 32-bit range."""
    if len(cloud):
        offset = tuple(float(np.floor(cloud.xyz[:, a].min())) for a in range(3))
    else:
        offset = (0.0, 0.0, 0.0)
    return write_las(cloud, scale=0.0001, offset=offset)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse line-based `key = value` configuration with stage prefixes."""
    config: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedHeader(f"config line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise MalformedHeader(f"config line {line_no}: empty key or value")
        if key in config:
            raise MalformedHeader(f"config line {line_no}: duplicate key {key!r}")
        config[key] = value
    return config


def load_config(path: Path) -> dict[str, str]:
    return parse_config_text(_read_text(path))


def _read_text(path: Path) -> str:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    return path.read_text()


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    return path.read_bytes()


def _load_image_any(path: Path) -> RgbaImage:
    """Load a PPM (P6) or PGM (P5) as RGBA by magic-number sniffing."""
    data = _read_bytes(path)
    if data[:2] == b"P5":
        gray = read_pgm(data)
        v = np.rint(gray.pixels * 255.0).astype(np.uint8)
        rgba = np.stack([v, v, v, np.full_like(v, 255)], axis=2)
        return RgbaImage(rgba)
    return read_ppm(data)


# --- stages --------------------------------------------------------------------

def _calibrate_one(board: BoardSpec, corners_path: Path,
                   image_size: tuple[int, int]):
    views_raw = parse_corner_csv(_read_text(corners_path))
    if len(views_raw) < 3:
        raise InputError(
            f"{corners_path}: at least 3 views required, got {len(views_raw)}"
        )
    for v, corners in enumerate(views_raw):
        if len(corners) != board.corner_count:
            raise InputError(
                f"{corners_path}: view {v} has {len(corners)} corners, board "
                f"expects {board.corner_count}"
            )
    views = [CalibrationView(image_points=tuple(c)) for c in views_raw]
    return calibrate(board, views, image_size), len(views)


def stage_calibrate(
    board: BoardSpec,
    corners_paths: list[Path],
    image_size: tuple[int, int],
    baseline_m: float,
    out_path: Path,
) -> dict:
    """Calibrate each eye's corner file independently and write one
    calibration file per eye.

    With a single corner file the calibration lands at out_path; with
    several (a stereo pair calibrated as two monocular runs), each output
    gets the corner file's stem as a suffix. The report carries per-eye
    errors plus the corner-weighted pooled mean.
    """
    if not corners_paths:
        raise InputError("at least one corner file is required")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    eyes = []
    total_err = 0.0
    total_corners = 0
    for corners_path in corners_paths:
        result, n_views = _calibrate_one(board, Path(corners_path), image_size)
        if len(corners_paths) == 1:
            target = out_path
        else:
            stem = Path(corners_path).stem
            target = out_path.with_name(f"{out_path.stem}.{stem}{out_path.suffix}")
        target.write_text(write_calibration(result.intrinsics, baseline_m))
        n_corners = n_views * board.corner_count
        total_err += result.mean_reprojection_error * n_corners
        total_corners += n_corners
        eyes.append(
            {
                "corners_file": str(corners_path),
                "mean_reprojection_error": metric(
                    result.mean_reprojection_error, "px"
                ),
                "per_view_reprojection_error": [
                    metric(e, "px") for e in result.per_view_errors
                ],
                "n_views": n_views,
                "calibration_file": str(target),
            }
        )
    fragment = {
        "eyes": eyes,
        "pooled_mean_reprojection_error": metric(total_err / total_corners, "px"),
    }
    if len(eyes) == 1:
        fragment["mean_reprojection_error"] = eyes[0]["mean_reprojection_error"]
        fragment["calibration_file"] = eyes[0]["calibration_file"]
    return fragment


def stage_depth(
    left_path: Path,
    right_path: Path,
    calibration_path: Path,
    out_dir: Path,
    d_min: int = 1,
    d_max: int = 64,
    window: int = 5,
    z_max: float = DEFAULT_Z_MAX,
    write_disparity: bool = False,
) -> tuple[Path, dict]:
    """Match a stereo pair, build the colorized cloud, write cloud.las."""
    rig = read_calibration(_read_text(calibration_path))
    left_rgba = _load_image_any(left_path)
    right_rgba = _load_image_any(right_path)
    intr = rig.intrinsics
    if (left_rgba.width, left_rgba.height) != (intr.image_width, intr.image_height):
        raise InputError(
            f"left image {left_rgba.width}x{left_rgba.height} does not match "
            f"calibration {intr.image_width}x{intr.image_height}"
        )
    disp = match_disparity(
        left_rgba.to_gray(), right_rgba.to_gray(), (d_min, d_max), window
    )
    cloud = cloud_from_disparity(disp, rig, left_rgba, z_max=z_max)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud_path = out_dir / "cloud.las"
    cloud_path.write_bytes(_las_bytes(cloud))
    if write_disparity:
        dgrid = DsmGrid(
            geometry=GridGeometry(
                origin_x=0.0, origin_y=float(disp.height - 1), cell_size=1.0,
                n_cols=disp.width, n_rows=disp.height,
            ),
            values=np.where(disp.valid_mask(), disp.values, -9999.0),
        )
        (out_dir / "disparity.asc").write_text(write_asc(dgrid))
    n_valid = int(disp.valid_mask().sum())
    metrics = {
        "valid_disparities": n_valid,
        "valid_fraction": metric(
            n_valid / float(disp.width * disp.height), "ratio"
        ),
        "points": len(cloud),
        "cloud_file": str(cloud_path),
    }
    return cloud_path, metrics


def stage_register(
    cloud_path: Path,
    pairs_path: Path,
    out_dir: Path,
    with_scale: bool = False,
) -> tuple[Path, dict]:
    """Estimate the similarity from control pairs, transform the cloud."""
    cloud = read_las(_read_bytes(cloud_path))
    pairs = parse_pair_csv(_read_text(pairs_path))
    report = estimate_alignment(pairs, with_scale=with_scale)
    registered = apply_alignment(cloud, report.transform)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "registered.las"
    out_path.write_bytes(_las_bytes(registered))
    metrics = {
        "rms": metric(report.rms, "m"),
        "per_pair_residuals": [
            {"id": pid, "residual": metric(res, "m")}
            for pid, res in report.per_pair_residuals
        ],
        "with_scale": report.with_scale,
        "scale": report.transform.scale,
        "registered_file": str(out_path),
    }
    return out_path, metrics


def _default_cloud_grid(xyz: np.ndarray, cell_size: float) -> GridGeometry:
    min_x, max_x = float(xyz[:, 0].min()), float(xyz[:, 0].max())
    min_y, max_y = float(xyz[:, 1].min()), float(xyz[:, 1].max())
    n_cols = int(np.floor((max_x - min_x) / cell_size)) + 1
    n_rows = int(np.floor((max_y - min_y) / cell_size)) + 1
    return GridGeometry(
        origin_x=min_x, origin_y=max_y, cell_size=cell_size,
        n_cols=n_cols, n_rows=n_rows,
    )


def stage_dsm(
    cloud_path: Path,
    out_dir: Path,
    cell_size: float = DEFAULT_DSM_CELL_SIZE,
    kill: float = DEFAULT_KILL_DISTANCE,
    clip_path: Path | None = None,
    grid: GridGeometry | None = None,
) -> tuple[Path, dict]:
    """Triangulate the cloud, rasterize, optionally clip, write dsm.asc."""
    if not kill > 0:
        raise InputError(f"kill distance must be positive, got {kill:g}")
    cloud = read_las(_read_bytes(cloud_path))
    tin = build_tin(cloud)
    geometry = grid if grid is not None else _default_cloud_grid(cloud.xyz, cell_size)
    dsm = rasterize_tin(tin, geometry, kill=kill)
    if clip_path is not None:
        poly = parse_wkt_polygon(_read_text(clip_path))
        dsm = clip_dsm(dsm, poly)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "dsm.asc"
    out_path.write_text(write_asc(dsm))
    n_data = int((dsm.values != dsm.nodata).sum())
    metrics = {
        "cells": dsm.values.size,
        "data_cells": n_data,
        "cell_size": metric(geometry.cell_size, "m"),
        "kill_distance": metric(kill, "m"),
        "triangles": len(tin.triangles),
        "dsm_file": str(out_path),
    }
    return out_path, metrics


def stage_check(cloud_path: Path, gcps_path: Path) -> dict:
    """Vertical accuracy of the cloud surface against surveyed GCPs."""
    cloud = read_las(_read_bytes(cloud_path))
    gcps = parse_gcp_csv(_read_text(gcps_path))
    tin = build_tin(cloud)
    report = vertical_check(tin, gcps)
    per_gcp = []
    for gid, surface_z, dz in report.per_gcp:
        if surface_z is None:
            per_gcp.append({"id": gid, "outside": True})
        else:
            per_gcp.append(
                {
                    "id": gid,
                    "outside": False,
                    "surface_z": metric(surface_z, "m"),
                    "dz": metric(dz, "m"),
                }
            )
    metrics = {
        "per_gcp": per_gcp,
        "n_outside": report.n_outside,
    }
    for name, value in (
        ("mean_dz", report.mean_dz),
        ("rmse_dz", report.rmse_dz),
        ("max_abs_dz", report.max_abs_dz),
    ):
        metrics[name] = metric(value, "m") if value is not None else None
    return metrics


def _undistort_image(img: RgbaImage, intr: CameraIntrinsics) -> RgbaImage:
    """Resample the photo onto an undistorted pixel grid (inverse map:
    undistorted pixel -> distorted source position -> cubic sample)."""
    h, w = img.height, img.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    xn = (us - intr.cx) / intr.fx
    yn = (vs - intr.cy) / intr.fy
    xd, yd = _distort_xy(intr, xn, yn)
    src_u = intr.fx * xd + intr.cx
    src_v = intr.fy * yd + intr.cy
    out_of_model = (xn * xn + yn * yn) > 4.0
    src_u[out_of_model] = np.nan
    src_v[out_of_model] = np.nan
    samples, _ = bicubic_sample_many(img, src_u.ravel(), src_v.ravel())
    return RgbaImage(samples.reshape(h, w, 4))


def _undistort_gcp_observations(
    gcps: list[Gcp], intr: CameraIntrinsics
) -> list[Gcp]:
    out = []
    for g in gcps:
        if g.image is None:
            out.append(g)
            continue
        xn = (g.image.x - intr.cx) / intr.fx
        yn = (g.image.y - intr.cy) / intr.fy
        xu, yu, ok = undistort_arrays(intr, np.array([xn]), np.array([yn]))
        if not ok[0]:
            raise InputError(f"gcp {g.id}: undistortion did not converge")
        out.append(
            Gcp(
                id=g.id,
                world=g.world,
                image=Point2(
                    float(intr.fx * xu[0] + intr.cx),
                    float(intr.fy * yu[0] + intr.cy),
                ),
            )
        )
    return out


def _default_rectify_grid(
    gcps: list[Gcp], cell_size: float, margin: float
) -> GridGeometry:
    xs = np.array([g.world.x for g in gcps])
    ys = np.array([g.world.y for g in gcps])
    span_x = max(float(xs.max() - xs.min()), cell_size)
    span_y = max(float(ys.max() - ys.min()), cell_size)
    min_x = float(xs.min()) - margin * span_x
    max_x = float(xs.max()) + margin * span_x
    min_y = float(ys.min()) - margin * span_y
    max_y = float(ys.max()) + margin * span_y
    n_cols = int(np.floor((max_x - min_x) / cell_size)) + 1
    n_rows = int(np.floor((max_y - min_y) / cell_size)) + 1
    return GridGeometry(
        origin_x=min_x, origin_y=max_y, cell_size=cell_size,
        n_cols=n_cols, n_rows=n_rows,
    )


def stage_rectify(
    image_path: Path,
    gcps_path: Path,
    out_dir: Path,
    calibration_path: Path | None = None,
    cell_size: float = DEFAULT_RECTIFY_CELL_SIZE,
    margin: float = 0.1,
    grid: GridGeometry | None = None,
) -> tuple[Path, dict]:
    """Fit the image-to-world homography from GCPs, warp the photo, write
    rectified.ppm + rectified.wld, and report the per-axis RMSEs."""
    img = _load_image_any(image_path)
    gcps = parse_gcp_csv(_read_text(gcps_path))
    undistorted = False
    if calibration_path is not None:
        rig = read_calibration(_read_text(calibration_path))
        img = _undistort_image(img, rig.intrinsics)
        gcps = _undistort_gcp_observations(gcps, rig.intrinsics)
        undistorted = True
    h = fit_ground_homography(gcps)
    report = rmse_xy(h, gcps)
    observed = [g for g in gcps if g.image is not None]
    geometry = (
        grid if grid is not None else _default_rectify_grid(observed, cell_size, margin)
    )
    raster = warp_to_grid(img, h, geometry)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ppm_path = out_dir / "rectified.ppm"
    wld_path = out_dir / "rectified.wld"
    ppm_path.write_bytes(write_ppm(RgbaImage(raster.bands)))
    wld_path.write_text(write_world_file(geometry))
    metrics = {
        "rmse_x": metric(report.rmse_x, "m"),
        "rmse_y": metric(report.rmse_y, "m"),
        "rmse_metric": "RMSE (rooted)",
        "per_gcp_residuals": [
            {"id": gid, "dx": metric(dx, "m"), "dy": metric(dy, "m")}
            for gid, dx, dy in report.per_point_residuals
        ],
        "n_gcps": report.n,
        "undistorted_observations": undistorted,
        "rectified_image": str(ppm_path),
        "world_file": str(wld_path),
    }
    return ppm_path, metrics


# --- full pipeline --------------------------------------------------------------

def _require(config: dict[str, str], key: str) -> str:
    if key not in config:
        raise InputError(f"config key {key!r} is required")
    return config[key]


def _get_float(config: dict[str, str], key: str, default: float) -> float:
    if key not in config:
        return default
    try:
        return float(config[key])
    except ValueError as exc:
        raise InputError(f"config key {key!r}: bad number {config[key]!r}") from exc


def _get_int(config: dict[str, str], key: str, default: int) -> int:
    if key not in config:
        return default
    try:
        return int(config[key])
    except ValueError as exc:
        raise InputError(f"config key {key!r}: bad integer {config[key]!r}") from exc


def _get_bool(config: dict[str, str], key: str, default: bool) -> bool:
    if key not in config:
        return default
    value = config[key].lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise InputError(f"config key {key!r}: bad boolean {config[key]!r}")


_RUN_INPUT_KEYS = (
    "depth.left", "depth.right", "depth.calibration",
    "register.pairs", "check.gcps", "rectify.image", "rectify.gcps",
)
_RUN_OPTIONAL_INPUT_KEYS = ("dsm.clip", "rectify.calibration")


def run_pipeline(config: dict[str, str], out_dir: Path, report_path: Path) -> dict:
    """Execute depth -> register -> dsm -> check -> rectify, writing the
    consolidated report (and partial results when a stage fails).

    Raises the failing stage's error after writing the report; completed
    stages' artifacts stay on disk.
    """
    out_dir = Path(out_dir)
    started = datetime.now(timezone.utc)
    report = {
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "config": dict(sorted(config.items())),
        "stages": {},
        "stages_completed": [],
        "failed_stage": None,
        "error": None,
        "timing": {
            "started_utc": started.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "finished_utc": None,
            "stage_seconds": {},
        },
    }

    # Validate every referenced input before any stage runs.
    for key in _RUN_INPUT_KEYS:
        path = Path(_require(config, key))
        if not path.is_file():
            raise InputError(f"config key {key!r}: file not found: {path}")
    for key in _RUN_OPTIONAL_INPUT_KEYS:
        if key in config and not Path(config[key]).is_file():
            raise InputError(f"config key {key!r}: file not found: {config[key]}")

    def finish() -> None:
        report["timing"]["finished_utc"] = datetime.now(timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ"
        )
        write_report(report, report_path)

    state: dict[str, Path] = {}

    def run_stage(name: str, fn) -> None:
        t0 = time.perf_counter()
        try:
            fn()
        except (ShoremapError, OSError) as exc:
            report["failed_stage"] = name
            report["error"] = f"{type(exc).__name__}: {exc}"
            report["timing"]["stage_seconds"][name] = time.perf_counter() - t0
            finish()
            raise
        report["timing"]["stage_seconds"][name] = time.perf_counter() - t0
        report["stages_completed"].append(name)

    def do_depth():
        cloud_path, metrics = stage_depth(
            left_path=Path(config["depth.left"]),
            right_path=Path(config["depth.right"]),
            calibration_path=Path(config["depth.calibration"]),
            out_dir=out_dir,
            d_min=_get_int(config, "depth.d_min", 1),
            d_max=_get_int(config, "depth.d_max", 64),
            window=_get_int(config, "depth.window", 5),
            z_max=_get_float(config, "depth.z_max", DEFAULT_Z_MAX),
            write_disparity=_get_bool(config, "depth.write_disparity", False),
        )
        report["stages"]["depth"] = metrics
        state["cloud"] = cloud_path

    def do_register():
        registered, metrics = stage_register(
            cloud_path=state["cloud"],
            pairs_path=Path(config["register.pairs"]),
            out_dir=out_dir,
            with_scale=_get_bool(config, "register.with_scale", False),
        )
        report["stages"]["registration"] = metrics
        state["registered"] = registered

    def do_dsm():
        _, metrics = stage_dsm(
            cloud_path=state["registered"],
            out_dir=out_dir,
            cell_size=_get_float(config, "dsm.cell_size", DEFAULT_DSM_CELL_SIZE),
            kill=_get_float(config, "dsm.kill", DEFAULT_KILL_DISTANCE),
            clip_path=Path(config["dsm.clip"]) if "dsm.clip" in config else None,
        )
        report["stages"]["dsm"] = metrics

    def do_check():
        report["stages"]["vertical_check"] = stage_check(
            cloud_path=state["registered"],
            gcps_path=Path(config["check.gcps"]),
        )

    def do_rectify():
        _, metrics = stage_rectify(
            image_path=Path(config["rectify.image"]),
            gcps_path=Path(config["rectify.gcps"]),
            out_dir=out_dir,
            calibration_path=(
                Path(config["rectify.calibration"])
                if "rectify.calibration" in config
                else None
            ),
            cell_size=_get_float(
                config, "rectify.cell_size", DEFAULT_RECTIFY_CELL_SIZE
            ),
            margin=_get_float(config, "rectify.margin", 0.1),
        )
        report["stages"]["georectification"] = metrics

    run_stage("depth", do_depth)
    run_stage("register", do_register)
    run_stage("dsm", do_dsm)
    run_stage("check", do_check)
    run_stage("rectify", do_rectify)
    finish()
    return report


def write_report(report: dict, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
