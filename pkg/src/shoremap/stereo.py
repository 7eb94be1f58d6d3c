"""Dense stereo matching and colorized point-cloud assembly.

Matching is census transform + Hamming-cost winner-take-all with box
aggregation, a uniqueness test, left-right consistency (1 px tolerance),
and parabolic subpixel refinement. Pixels without a discriminative,
consistent match are INVALID (NaN in the disparity array).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import StereoRig, pixels_depth_to_points
from .errors import DimensionMismatch, EmptyRange, SizeMismatch, WindowTooLarge

_ALLOWED_WINDOWS = (3, 5, 7, 9)
_BIG_COST = np.int64(1) << 40
_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)

DEFAULT_Z_MAX = 20.0


@dataclass(frozen=True)
class GrayImage:
    """Single-channel image, intensities in [0, 1], row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2 or p.size == 0:
            raise ValueError("gray image must be a non-empty 2-d array")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("gray intensities must be finite and within [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RgbaImage:
    """8-bit RGBA image, row-major, shape (height, width, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 4 or p.size == 0:
            raise ValueError("rgba image must be a non-empty (h, w, 4) array")
        if p.dtype != np.uint8:
            if np.any(p < 0) or np.any(p > 255):
                raise ValueError("rgba samples must be within [0, 255]")
            p = p.astype(np.uint8)
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_gray(self) -> GrayImage:
        rgb = self.pixels[:, :, :3].astype(np.float64)
        return GrayImage(rgb.mean(axis=2) / 255.0)


@dataclass(frozen=True)
class DisparityMap:
    """Subpixel disparities in pixels; NaN marks INVALID."""

    values: np.ndarray
    min_disparity: float
    max_disparity: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("disparity map must be 2-d")
        valid = v[np.isfinite(v)]
        if valid.size and (
            valid.min() < self.min_disparity or valid.max() > self.max_disparity
        ):
            raise ValueError("valid disparities outside the declared range")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass(frozen=True)
class PointCloud:
    """3-d points with RGBA colors. xyz is (n, 3) float64 meters, colors
    is (n, 4) uint8."""

    xyz: np.ndarray
    colors: np.ndarray = field(default=None)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(xyz)):
            raise ValueError("point coordinates must be finite")
        if self.colors is None:
            colors = np.full((xyz.shape[0], 4), 255, dtype=np.uint8)
        else:
            colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 4)
        if colors.shape[0] != xyz.shape[0]:
            raise ValueError("one color per point required")
        xyz = np.ascontiguousarray(xyz)
        colors = np.ascontiguousarray(colors)
        xyz.flags.writeable = False
        colors.flags.writeable = False
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return self.xyz.shape[0]


@dataclass(frozen=True)
class CensusImage:
    """Packed census bit patterns: (h, w, n_bytes) uint8, little-endian
    bit order; bit b corresponds to the b-th window neighbor in row-major
    order (center excluded) and is set when that neighbor is darker than
    the center."""

    bits: np.ndarray
    valid: np.ndarray
    window: int

    @property
    def n_bits(self) -> int:
        return self.window * self.window - 1


def census_transform(img: GrayImage, window: int = 5) -> CensusImage:
    """Census transform; border pixels (half-window margin) are invalid."""
    if window not in _ALLOWED_WINDOWS:
        raise WindowTooLarge(f"window must be one of {_ALLOWED_WINDOWS}, got {window}")
    h, w = img.height, img.width
    if h <= window or w <= window:
        raise WindowTooLarge(f"image {w}x{h} too small for window {window}")
    half = window // 2
    n_bits = window * window - 1
    n_bytes = (n_bits + 7) // 8
    bits = np.zeros((h, w, n_bytes), dtype=np.uint8)
    px = img.pixels
    center = px[half: h - half, half: w - half]
    bit = 0
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = px[half + dy: h - half + dy, half + dx: w - half + dx]
            cmp = neighbor < center
            bits[half: h - half, half: w - half, bit // 8] |= (
                cmp.astype(np.uint8) << np.uint8(bit % 8)
            )
            bit += 1
    valid = np.zeros((h, w), dtype=bool)
    valid[half: h - half, half: w - half] = True
    return CensusImage(bits=bits, valid=valid, window=window)


def _hamming(a_bits: np.ndarray, b_bits: np.ndarray) -> np.ndarray:
    return _POPCOUNT[np.bitwise_xor(a_bits, b_bits)].sum(axis=-1).astype(np.int64)


def _box_sum(img: np.ndarray, half: int) -> np.ndarray:
    """Sum over a (2*half+1)^2 window centered per pixel, zero-padded."""
    k = 2 * half + 1
    padded = np.pad(np.asarray(img, dtype=np.int64), half)
    c = padded.cumsum(axis=0).cumsum(axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    h, w = img.shape
    return (
        c[k: k + h, k: k + w]
        - c[0:h, k: k + w]
        - c[k: k + h, 0:w]
        + c[0:h, 0:w]
    )


def _cost_volume(
    ref: CensusImage, other: CensusImage, d_min: int, d_max: int, sign: int
) -> np.ndarray:
    """Aggregated matching cost (h, w, n_d); cost[y, x, i] compares the
    reference pixel x with the other image's pixel x + sign * (d_min + i).
    Cells without a full window of valid census pairs cost _BIG_COST."""
    h, w, _ = ref.bits.shape
    half = ref.window // 2
    full_window = (2 * half + 1) ** 2
    n_d = d_max - d_min + 1
    volume = np.full((h, w, n_d), _BIG_COST, dtype=np.int64)
    for i, d in enumerate(range(d_min, d_max + 1)):
        shift = sign * d
        if shift <= 0:
            ref_sl = slice(-shift, w)
            oth_sl = slice(0, w + shift)
        else:
            ref_sl = slice(0, w - shift)
            oth_sl = slice(shift, w)
        if ref_sl.stop - ref_sl.start <= 0:
            continue
        raw = _hamming(ref.bits[:, ref_sl], other.bits[:, oth_sl])
        ok = ref.valid[:, ref_sl] & other.valid[:, oth_sl]
        agg = _box_sum(np.where(ok, raw, 0), half)
        count = _box_sum(ok, half)
        volume[:, ref_sl, i] = np.where(count == full_window, agg, _BIG_COST)
    return volume


def _winner_take_all(volume: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    best = np.argmin(volume, axis=2)
    best_cost = np.take_along_axis(volume, best[:, :, None], axis=2)[:, :, 0]
    return best, best_cost


def match_disparity(
    left: GrayImage,
    right: GrayImage,
    d_range: tuple[int, int],
    window: int = 5,
) -> DisparityMap:
    """Dense disparity of the left image against the right.

    A pixel survives only if its best cost is strictly better than every
    cost more than 1 px away (uniqueness) and the right image's own best
    match points back within 1 px (left-right consistency). Survivors get
    parabolic subpixel refinement when the winning disparity is interior
    to the search range.
    """
    if left.pixels.shape != right.pixels.shape:
        raise SizeMismatch(
            f"left {left.pixels.shape} vs right {right.pixels.shape}"
        )
    d_min, d_max = int(d_range[0]), int(d_range[1])
    if not (0 <= d_min < d_max < left.width):
        raise EmptyRange(f"invalid disparity range [{d_min}, {d_max}]")

    census_l = census_transform(left, window)
    census_r = census_transform(right, window)

    vol_l = _cost_volume(census_l, census_r, d_min, d_max, sign=-1)
    vol_r = _cost_volume(census_r, census_l, d_min, d_max, sign=+1)
    best_l, cost_l = _winner_take_all(vol_l)
    best_r, _ = _winner_take_all(vol_r)

    h, w = left.pixels.shape
    n_d = d_max - d_min + 1
    valid = cost_l < _BIG_COST

    # Uniqueness: the winner must strictly beat every candidate more than
    # 1 px away; flat cost curves (e.g. textureless input) fail here.
    idx = np.arange(n_d)
    away = np.abs(idx[None, None, :] - best_l[:, :, None]) > 1
    masked = np.where(away, vol_l, _BIG_COST)
    other_best = masked.min(axis=2)
    has_alternative = away.any(axis=2)
    valid &= ~has_alternative | (cost_l < other_best)

    # Left-right consistency, 1 px tolerance on integer winners.
    disp_int = best_l + d_min
    xs = np.arange(w)[None, :].repeat(h, axis=0)
    x_r = xs - disp_int
    in_bounds = x_r >= 0
    x_r_safe = np.clip(x_r, 0, w - 1)
    ys = np.arange(h)[:, None].repeat(w, axis=1)
    d_r = best_r[ys, x_r_safe] + d_min
    cost_r_there = np.take_along_axis(
        vol_r[ys, x_r_safe], (d_r - d_min)[:, :, None], axis=2
    )[:, :, 0]
    valid &= in_bounds & (np.abs(d_r - disp_int) <= 1) & (cost_r_there < _BIG_COST)

    # Parabolic subpixel refinement on the aggregated cost.
    disp = disp_int.astype(np.float64)
    interior = valid & (best_l > 0) & (best_l < n_d - 1)
    if np.any(interior):
        c0 = np.take_along_axis(vol_l, best_l[:, :, None], axis=2)[:, :, 0]
        cm = np.take_along_axis(
            vol_l, np.maximum(best_l - 1, 0)[:, :, None], axis=2
        )[:, :, 0]
        cp = np.take_along_axis(
            vol_l, np.minimum(best_l + 1, n_d - 1)[:, :, None], axis=2
        )[:, :, 0]
        denom = (cm - 2 * c0 + cp).astype(np.float64)
        ok = interior & (denom > 0) & (cm < _BIG_COST) & (cp < _BIG_COST)
        delta = np.zeros_like(disp)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta[ok] = (cm - cp)[ok] / (2.0 * denom[ok])
        delta = np.clip(delta, -0.5, 0.5)
        disp = disp + np.where(ok, delta, 0.0)

    disp = np.clip(disp, d_min, d_max)
    disp[~valid] = np.nan
    return DisparityMap(values=disp, min_disparity=d_min, max_disparity=d_max)


def cloud_from_disparity(
    d: DisparityMap,
    rig: StereoRig,
    color: RgbaImage,
    z_max: float = DEFAULT_Z_MAX,
) -> PointCloud:
    """Back-project valid disparities into a colorized camera-frame cloud.

    Colors are taken bit-exactly from the reference (left) image at the
    originating pixel; points deeper than z_max are dropped.
    """
    intr = rig.intrinsics
    if (d.width, d.height) != (intr.image_width, intr.image_height):
        raise DimensionMismatch(
            f"disparity {d.width}x{d.height} vs intrinsics "
            f"{intr.image_width}x{intr.image_height}"
        )
    if (color.width, color.height) != (d.width, d.height):
        raise DimensionMismatch(
            f"color {color.width}x{color.height} vs disparity {d.width}x{d.height}"
        )
    mask = d.valid_mask() & (d.values > 0)
    vs, us = np.nonzero(mask)
    disp = d.values[vs, us]
    z = intr.fx * rig.baseline / disp
    keep = z <= z_max
    us, vs, z = us[keep], vs[keep], z[keep]
    pts, ok = pixels_depth_to_points(
        intr, us.astype(np.float64), vs.astype(np.float64), z
    )
    pts = pts[ok]
    colors = color.pixels[vs[ok], us[ok]]
    return PointCloud(xyz=pts, colors=colors)
