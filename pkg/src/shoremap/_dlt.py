"""Normalized direct linear transform shared by the calibration and
georectification estimators."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateConfiguration
from .geometry import Homography

_SCALE_EPS = 1e-12
_RANK_RATIO = 1e-9


def _normalizing_transform(xy: np.ndarray) -> np.ndarray:
    """Hartley normalization: centroid to origin, mean distance sqrt(2)."""
    centroid = xy.mean(axis=0)
    dist = np.sqrt(((xy - centroid) ** 2).sum(axis=1)).mean()
    if dist < _SCALE_EPS:
        raise DegenerateConfiguration("points are coincident; normalization underflows")
    s = np.sqrt(2.0) / dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def estimate_homography(src_xy: np.ndarray, dst_xy: np.ndarray) -> Homography:
    """Least-squares homography mapping src to dst by normalized DLT.

    Expects (n, 2) arrays with n >= 4. Raises DegenerateConfiguration when
    the design matrix is rank-deficient (collinear or coincident points).
    """
    src_xy = np.asarray(src_xy, dtype=np.float64)
    dst_xy = np.asarray(dst_xy, dtype=np.float64)
    if src_xy.shape != dst_xy.shape or src_xy.ndim != 2 or src_xy.shape[1] != 2:
        raise ValueError("point arrays must both be (n, 2)")
    n = src_xy.shape[0]
    if n < 4:
        raise DegenerateConfiguration(f"need at least 4 correspondences, got {n}")

    t_src = _normalizing_transform(src_xy)
    t_dst = _normalizing_transform(dst_xy)
    ones = np.ones((n, 1))
    s = (np.hstack([src_xy, ones]) @ t_src.T)
    d = (np.hstack([dst_xy, ones]) @ t_dst.T)

    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = s
    a[0::2, 6:9] = -d[:, [0]] * s
    a[1::2, 3:6] = s
    a[1::2, 6:9] = -d[:, [1]] * s

    _, sv, vt = np.linalg.svd(a)
    # Rank must be 8 for a unique (up to scale) solution.
    if sv[0] < _SCALE_EPS or sv[7] / sv[0] < _RANK_RATIO:
        raise DegenerateConfiguration("design matrix is rank-deficient")
    h_norm = vt[-1].reshape(3, 3)
    # A unique but singular solution (e.g. collinear targets) is just as
    # degenerate as a rank-deficient system; in normalized space healthy
    # fits keep this ratio near 1.
    sv_h = np.linalg.svd(h_norm, compute_uv=False)
    if sv_h[2] / sv_h[0] < _RANK_RATIO:
        raise DegenerateConfiguration("fitted homography is singular")
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    return Homography(h)
