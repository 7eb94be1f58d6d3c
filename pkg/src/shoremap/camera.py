"""Pinhole camera with polynomial radial/tangential lens distortion, plus
stereo depth conversion for a rectified pair with known baseline.

Distortion convention (applied to normalized image-plane coordinates):

    x_d = x*(1 + k1*r^2 + k2*r^4 + k3*r^6) + 2*p1*x*y + p2*(r^2 + 2*x^2)
    y_d = y*(1 + k1*r^2 + k2*r^4 + k3*r^6) + p1*(r^2 + 2*y^2) + 2*p2*x*y

with r^2 = x^2 + y^2. The same convention is used for calibration and
undistortion throughout the toolkit. The polynomial is only trusted on
the r^2 <= 4 disk; evaluation outside raises OutOfModelRange rather than
returning a silently diverged value (wide lenses invite such calls).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, NonConvergence, NonPositiveDisparity, OutOfModelRange
from .geometry import Point2, Point3

R2_MAX = 4.0
MIN_DEPTH = 1e-9
UNDISTORT_TOL = 1e-10
UNDISTORT_MAX_ITER = 50


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths, principal point (pixels), distortion coefficients
    (unitless, normalized coordinates), and sensor size."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    image_width: int = 1920
    image_height: int = 1080

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.image_width and 0 <= self.cy < self.image_height):
            raise ValueError("principal point must lie inside the image")
        for name in ("fx", "fy", "cx", "cy", "k1", "k2", "k3", "p1", "p2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def k_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def distortion_vector(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.p1, self.p2])


@dataclass(frozen=True)
class StereoRig:
    """Rectified stereo pair sharing one set of intrinsics."""

    intrinsics: CameraIntrinsics
    baseline: float

    def __post_init__(self):
        if not (math.isfinite(self.baseline) and self.baseline > 0):
            raise ValueError("baseline must be positive")


def _distort_xy(i: CameraIntrinsics, x, y):
    """Distortion polynomial on arrays or scalars, no domain check."""
    r2 = x * x + y * y
    radial = 1.0 + r2 * (i.k1 + r2 * (i.k2 + r2 * i.k3))
    x_d = x * radial + 2.0 * i.p1 * x * y + i.p2 * (r2 + 2.0 * x * x)
    y_d = y * radial + i.p1 * (r2 + 2.0 * y * y) + 2.0 * i.p2 * x * y
    return x_d, y_d


def distort_normalized(i: CameraIntrinsics, p: Point2) -> Point2:
    """Apply the distortion model to a normalized image-plane point."""
    r2 = p.x * p.x + p.y * p.y
    if r2 > R2_MAX:
        raise OutOfModelRange(f"r^2 = {r2:g} exceeds the modeled disk (r^2 <= {R2_MAX})")
    x_d, y_d = _distort_xy(i, p.x, p.y)
    return Point2(float(x_d), float(y_d))


def undistort_arrays(i: CameraIntrinsics, x_d: np.ndarray, y_d: np.ndarray):
    """Vectorized inverse of the distortion model by damped fixed-point
    iteration.

    Returns (x, y, converged) where converged is a boolean mask. Seeds at
    the distorted coordinates and iterates toward
    x <- (x_d - tangential_x) / radial. Near the rim of the modeled disk
    the bare map oscillates (its multiplier goes below -1 sooner than the
    radial polynomial grows), so elements whose residual stops contracting
    get their step damped by halves. Converged means the undamped residual
    dropped below 1e-10 within 50 iterations.
    """
    x = np.array(x_d, dtype=np.float64)
    y = np.array(y_d, dtype=np.float64)
    x_d = np.asarray(x_d, dtype=np.float64)
    y_d = np.asarray(y_d, dtype=np.float64)
    done = np.zeros(x.shape, dtype=bool)
    alpha = np.ones(x.shape)
    prev_rx = np.zeros(x.shape)
    prev_ry = np.zeros(x.shape)
    for iteration in range(UNDISTORT_MAX_ITER):
        r2 = x * x + y * y
        radial = 1.0 + r2 * (i.k1 + r2 * (i.k2 + r2 * i.k3))
        tan_x = 2.0 * i.p1 * x * y + i.p2 * (r2 + 2.0 * x * x)
        tan_y = i.p1 * (r2 + 2.0 * y * y) + 2.0 * i.p2 * x * y
        with np.errstate(divide="ignore", invalid="ignore"):
            res_x = (x_d - tan_x) / radial - x
            res_y = (y_d - tan_y) / radial - y
        bad = (np.abs(radial) < 1e-12) | ~np.isfinite(res_x) | ~np.isfinite(res_y)
        res_x = np.where(bad, 0.0, res_x)
        res_y = np.where(bad, 0.0, res_y)
        res = np.hypot(res_x, res_y)
        # Freeze elements at first convergence so the result of solving a
        # whole grid matches per-point calls bit for bit.
        done |= (res < UNDISTORT_TOL) & ~bad
        if done.all():
            break
        if iteration > 0:
            # Secant estimate of the fixed-point multiplier: near the rim
            # of the modeled disk it drops toward -1 and the bare map
            # oscillates, so step with the alpha that cancels it.
            denom = prev_rx * prev_rx + prev_ry * prev_ry
            safe = denom > 0
            m_prev = np.where(
                safe,
                (res_x * prev_rx + res_y * prev_ry) / np.where(safe, denom, 1.0),
                0.0,
            )
            g_est = (m_prev - (1.0 - alpha)) / alpha
            with np.errstate(divide="ignore", invalid="ignore"):
                alpha_new = 1.0 / (1.0 - g_est)
            alpha_new = np.where(np.isfinite(alpha_new), alpha_new, 0.1)
            alpha = np.clip(alpha_new, 0.1, 1.0)
        step = np.where(done, 0.0, alpha)
        x = x + step * res_x
        y = y + step * res_y
        prev_rx, prev_ry = res_x, res_y
    return x, y, done


def undistort_normalized(i: CameraIntrinsics, p_d: Point2) -> Point2:
    """Invert the distortion model for one point; raises NonConvergence
    when 50 iterations do not reach a 1e-10 step."""
    x, y, ok = undistort_arrays(
        i, np.array([p_d.x]), np.array([p_d.y])
    )
    if not ok[0]:
        raise NonConvergence(
            f"undistortion of {p_d} did not reach {UNDISTORT_TOL:g} in "
            f"{UNDISTORT_MAX_ITER} iterations"
        )
    return Point2(float(x[0]), float(y[0]))


def project(i: CameraIntrinsics, p: Point3) -> Point2:
    """Project a camera-frame point to pixel coordinates."""
    if p.z <= MIN_DEPTH:
        raise BehindCamera(f"z = {p.z:g} is not in front of the camera")
    x_n, y_n = p.x / p.z, p.y / p.z
    d = distort_normalized(i, Point2(x_n, y_n))
    return Point2(i.fx * d.x + i.cx, i.fy * d.y + i.cy)


def project_many(i: CameraIntrinsics, pts: np.ndarray) -> np.ndarray:
    """Project an (n, 3) array of camera-frame points to (n, 2) pixels.

    Raises BehindCamera / OutOfModelRange if any point violates the
    domain, mirroring the scalar operation.
    """
    pts = np.asarray(pts, dtype=np.float64)
    z = pts[:, 2]
    if np.any(z <= MIN_DEPTH):
        raise BehindCamera("at least one point is not in front of the camera")
    x_n = pts[:, 0] / z
    y_n = pts[:, 1] / z
    r2 = x_n * x_n + y_n * y_n
    if np.any(r2 > R2_MAX):
        raise OutOfModelRange("at least one point falls outside the modeled disk")
    x_d, y_d = _distort_xy(i, x_n, y_n)
    out = np.empty((pts.shape[0], 2))
    out[:, 0] = i.fx * x_d + i.cx
    out[:, 1] = i.fy * y_d + i.cy
    return out


def disparity_to_depth(r: StereoRig, d: float) -> float:
    """Depth along the optical axis from a disparity, Z = fx * B / d."""
    if d <= 0:
        raise NonPositiveDisparity(f"disparity {d:g} is not positive")
    return r.intrinsics.fx * r.baseline / d


def pixel_depth_to_point(i: CameraIntrinsics, u: float, v: float, z: float) -> Point3:
    """Back-project a pixel at known depth into the camera frame."""
    if z <= 0:
        raise BehindCamera(f"depth {z:g} is not positive")
    n = undistort_normalized(i, Point2((u - i.cx) / i.fx, (v - i.cy) / i.fy))
    return Point3(n.x * z, n.y * z, z)


def pixels_depth_to_points(
    i: CameraIntrinsics, u: np.ndarray, v: np.ndarray, z: np.ndarray
):
    """Vectorized back-projection. Returns ((n, 3) points, converged mask)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x_n, y_n, ok = undistort_arrays(i, (u - i.cx) / i.fx, (v - i.cy) / i.fy)
    pts = np.stack([x_n * z, y_n * z, z], axis=-1)
    return pts, ok
