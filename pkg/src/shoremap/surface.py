"""TIN construction, linear surface interpolation, DSM rasterization with
a kill-distance filter, polygon clipping, and vertical accuracy checks.

The triangulation is incremental Bowyer-Watson over the xy-projection,
bootstrapped from an enclosing super-triangle. Orientation and in-circle
predicates use a floating-point filter with an exact rational fallback;
point clouds derived from pixel grids are almost entirely cocircular, so
naive float predicates would corrupt the topology.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (
    CollinearInput,
    EmptyGcpSet,
    GridTooLarge,
    InvalidPolygon,
    TooFewPoints,
)
from .geometry import DEFAULT_CELL_CAP, GridGeometry, Point2, Point3
from .georectify import Gcp
from .stereo import PointCloud

logger = logging.getLogger(__name__)

NODATA = -9999.0
DEFAULT_KILL_DISTANCE = 1.0
DEFAULT_DSM_CELL_SIZE = 0.10

_DEDUP_EPS = 1e-9
_BARY_EPS = 1e-12
_ORIENT_FILTER = 1e-15
_INCIRCLE_FILTER = 3e-15
_SUPER_MARGIN = 1e6


# --- exact-fallback predicates ----------------------------------------------

def _orient2d(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the doubled signed area of (a, b, c): +1 CCW, -1 CW, 0
    collinear. Exact."""
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    det = t1 - t2
    bound = _ORIENT_FILTER * (abs(t1) + abs(t2))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    fa_x, fa_y = Fraction(ax), Fraction(ay)
    det_exact = (Fraction(bx) - fa_x) * (Fraction(cy) - fa_y) - (
        Fraction(by) - fa_y
    ) * (Fraction(cx) - fa_x)
    return (det_exact > 0) - (det_exact < 0)


def _incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 when d is strictly inside the circumcircle of CCW triangle
    (a, b, c), -1 outside, 0 on the circle. Exact."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        adx * (bdy * clift - cdy * blift)
        - ady * (bdx * clift - cdx * blift)
        + alift * (bdx * cdy - cdx * bdy)
    )
    permanent = (
        abs(adx) * (abs(bdy * clift) + abs(cdy * blift))
        + abs(ady) * (abs(bdx * clift) + abs(cdx * blift))
        + abs(alift) * (abs(bdx * cdy) + abs(cdx * bdy))
    )
    bound = _INCIRCLE_FILTER * permanent
    if det > bound:
        return 1
    if det < -bound:
        return -1
    fa = (Fraction(ax) - Fraction(dx), Fraction(ay) - Fraction(dy))
    fb = (Fraction(bx) - Fraction(dx), Fraction(by) - Fraction(dy))
    fc = (Fraction(cx) - Fraction(dx), Fraction(cy) - Fraction(dy))
    la = fa[0] * fa[0] + fa[1] * fa[1]
    lb = fb[0] * fb[0] + fb[1] * fb[1]
    lc = fc[0] * fc[0] + fc[1] * fc[1]
    det_exact = (
        fa[0] * (fb[1] * lc - fc[1] * lb)
        - fa[1] * (fb[0] * lc - fc[0] * lb)
        + la * (fb[0] * fc[1] - fc[0] * fb[1])
    )
    return (det_exact > 0) - (det_exact < 0)


# --- types -------------------------------------------------------------------

@dataclass(frozen=True)
class Tin:
    """Triangulated surface: vertices with elevation, triangle vertex
    index triples oriented counterclockwise in the xy-plane."""

    vertices: tuple[Point3, ...]
    triangles: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        xs = np.array([v.x for v in self.vertices])
        ys = np.array([v.y for v in self.vertices])
        zs = np.array([v.z for v in self.vertices])
        tri = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        for arr in (xs, ys, zs):
            arr.flags.writeable = False
        tri.flags.writeable = False
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_zs", zs)
        object.__setattr__(self, "_tri", tri)

    @property
    def xy_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._xs, self._ys

    @property
    def z_array(self) -> np.ndarray:
        return self._zs

    @property
    def triangle_array(self) -> np.ndarray:
        return self._tri

    def max_edge_lengths(self) -> np.ndarray:
        """Longest xy edge per triangle."""
        t = self._tri
        xs, ys = self._xs, self._ys
        lengths = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            lengths.append(
                np.hypot(xs[t[:, a]] - xs[t[:, b]], ys[t[:, a]] - ys[t[:, b]])
            )
        return np.max(lengths, axis=0)


@dataclass(frozen=True)
class DsmGrid:
    """Raster of elevations; NODATA cells hold -9999."""

    geometry: GridGeometry
    values: np.ndarray
    nodata: float = NODATA

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.geometry.n_rows, self.geometry.n_cols):
            raise ValueError("value array does not match grid geometry")
        data = v[v != self.nodata]
        if data.size and not np.all(np.isfinite(data)):
            raise ValueError("non-sentinel values must be finite")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ClipPolygon:
    """One outer ring (counterclockwise) plus optional holes (clockwise);
    rings are closed (first vertex repeated last)."""

    rings: tuple[tuple[Point2, ...], ...]

    def __post_init__(self):
        if not self.rings:
            raise InvalidPolygon("polygon needs at least an outer ring")
        normalized = []
        for ri, ring in enumerate(self.rings):
            pts = tuple(Point2(float(p[0]), float(p[1])) for p in ring)
            if len(pts) < 4:
                raise InvalidPolygon(f"ring {ri} has fewer than 3 distinct vertices")
            if not all(np.isfinite(p.x) and np.isfinite(p.y) for p in pts):
                raise InvalidPolygon(f"ring {ri} has non-finite vertices")
            if pts[0] != pts[-1]:
                raise InvalidPolygon(f"ring {ri} is not closed")
            if _ring_self_intersects(pts):
                raise InvalidPolygon(f"ring {ri} self-intersects")
            area = _signed_area(pts)
            if area == 0:
                raise InvalidPolygon(f"ring {ri} has zero area")
            want_ccw = ri == 0
            if (area > 0) != want_ccw:
                pts = tuple(reversed(pts))
            normalized.append(pts)
        object.__setattr__(self, "rings", tuple(normalized))

    @property
    def outer(self) -> tuple[Point2, ...]:
        return self.rings[0]

    @property
    def holes(self) -> tuple[tuple[Point2, ...], ...]:
        return self.rings[1:]


@dataclass(frozen=True)
class VerticalCheckReport:
    """Per-GCP surface-minus-survey elevation differences. GCPs outside
    the surface hull are listed with None and excluded from the stats."""

    per_gcp: tuple[tuple[str, Optional[float], Optional[float]], ...]
    mean_dz: Optional[float]
    rmse_dz: Optional[float]
    max_abs_dz: Optional[float]
    n_outside: int


def _signed_area(ring: tuple[Point2, ...]) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """True when closed segments p1p2 and p3p4 share a point."""
    d1 = _orient2d(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _orient2d(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _orient2d(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _orient2d(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if d1 != d2 and d3 != d4:
        return True

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    if d1 == 0 and on_segment(p3, p4, p1):
        return True
    if d2 == 0 and on_segment(p3, p4, p2):
        return True
    if d3 == 0 and on_segment(p1, p2, p3):
        return True
    if d4 == 0 and on_segment(p1, p2, p4):
        return True
    return False


def _ring_self_intersects(ring: tuple[Point2, ...]) -> bool:
    segs = list(zip(ring[:-1], ring[1:]))
    m = len(segs)
    for i in range(m):
        for j in range(i + 1, m):
            adjacent = j == i + 1 or (i == 0 and j == m - 1)
            if adjacent:
                continue
            if _segments_intersect(*segs[i], *segs[j]):
                return True
    return False


# --- triangulation ------------------------------------------------------------

def _dedupe_xy(xyz: np.ndarray) -> np.ndarray:
    """Collapse points within 1e-9 xy distance, keeping first-seen xy and
    the highest z; survivors stay in input order."""
    n = xyz.shape[0]
    order = np.lexsort((xyz[:, 1], xyz[:, 0]))
    rep_of = np.full(n, -1, dtype=np.int64)
    window: list[int] = []
    for idx in order:
        x, y = xyz[idx, 0], xyz[idx, 1]
        window = [w for w in window if x - xyz[w, 0] <= _DEDUP_EPS]
        joined = False
        for w in window:
            if (x - xyz[w, 0]) ** 2 + (y - xyz[w, 1]) ** 2 <= _DEDUP_EPS ** 2:
                rep_of[idx] = w
                joined = True
                break
        if not joined:
            rep_of[idx] = idx
            window.append(idx)
    # Resolve to cluster roots (direct since reps map to themselves).
    keep_order = []
    best_z: dict[int, float] = {}
    for idx in range(n):
        rep = rep_of[idx]
        if rep not in best_z:
            keep_order.append(rep)
            best_z[rep] = xyz[idx, 2]
        else:
            best_z[rep] = max(best_z[rep], xyz[idx, 2])
    out = np.array(
        [(xyz[r, 0], xyz[r, 1], best_z[r]) for r in keep_order], dtype=np.float64
    )
    return out


def _morton_order(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Deterministic spatial insertion order (Morton / Z-curve).

    Inserting spatially sorted points keeps Bowyer-Watson cavities and
    walk lengths O(1) amortized; feeding long collinear runs (pixel-grid
    clouds) in raw scan order degenerates to quadratic fan churn.
    """
    span_x = float(xs.max() - xs.min()) or 1.0
    span_y = float(ys.max() - ys.min()) or 1.0
    qx = np.minimum(((xs - xs.min()) / span_x * 65535.0).astype(np.uint64), 65535)
    qy = np.minimum(((ys - ys.min()) / span_y * 65535.0).astype(np.uint64), 65535)

    def spread(v: np.ndarray) -> np.ndarray:
        v = (v | (v << 8)) & np.uint64(0x00FF00FF)
        v = (v | (v << 4)) & np.uint64(0x0F0F0F0F)
        v = (v | (v << 2)) & np.uint64(0x33333333)
        v = (v | (v << 1)) & np.uint64(0x55555555)
        return v

    key = spread(qx) | (spread(qy) << np.uint64(1))
    return np.argsort(key, kind="stable")


class _Triangulator:
    """Bowyer-Watson incremental Delaunay over centered xy coordinates."""

    def __init__(self, xs: np.ndarray, ys: np.ndarray):
        self.xs = list(xs)
        self.ys = list(ys)
        self.triangles: dict[int, tuple[int, int, int]] = {}
        self.edge_map: dict[tuple[int, int], list[int]] = {}
        self.next_tid = 0
        self.last_tid = None

        span = max(
            float(np.max(xs) - np.min(xs)),
            float(np.max(ys) - np.min(ys)),
            1.0,
        )
        cx = float((np.max(xs) + np.min(xs)) / 2.0)
        cy = float((np.max(ys) + np.min(ys)) / 2.0)
        m = span * _SUPER_MARGIN
        self.n_real = len(self.xs)
        self.xs += [cx - 2.0 * m, cx + 2.0 * m, cx]
        self.ys += [cy - m, cy - m, cy + 2.0 * m]
        s0, s1, s2 = self.n_real, self.n_real + 1, self.n_real + 2
        self._add_triangle(s0, s1, s2)

    def _edge_key(self, a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _add_triangle(self, a: int, b: int, c: int) -> int:
        tid = self.next_tid
        self.next_tid += 1
        self.triangles[tid] = (a, b, c)
        for e in ((a, b), (b, c), (c, a)):
            self.edge_map.setdefault(self._edge_key(*e), []).append(tid)
        self.last_tid = tid
        return tid

    def _remove_triangle(self, tid: int):
        a, b, c = self.triangles.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            key = self._edge_key(*e)
            lst = self.edge_map[key]
            lst.remove(tid)
            if not lst:
                del self.edge_map[key]

    def _neighbor(self, tid: int, a: int, b: int) -> Optional[int]:
        lst = self.edge_map.get(self._edge_key(a, b), ())
        for other in lst:
            if other != tid:
                return other
        return None

    def _orient(self, i: int, j: int, px: float, py: float) -> int:
        return _orient2d(self.xs[i], self.ys[i], self.xs[j], self.ys[j], px, py)

    def _in_circumcircle(self, tid: int, px: float, py: float) -> bool:
        a, b, c = self.triangles[tid]
        return (
            _incircle(
                self.xs[a], self.ys[a],
                self.xs[b], self.ys[b],
                self.xs[c], self.ys[c],
                px, py,
            )
            > 0
        )

    def _locate(self, px: float, py: float) -> int:
        """Walk toward the triangle containing (px, py)."""
        tid = self.last_tid
        if tid not in self.triangles:
            tid = next(iter(self.triangles))
        max_steps = 4 * len(self.triangles) + 16
        for _ in range(max_steps):
            a, b, c = self.triangles[tid]
            moved = False
            for i, j in ((a, b), (b, c), (c, a)):
                if self._orient(i, j, px, py) < 0:
                    nb = self._neighbor(tid, i, j)
                    if nb is not None:
                        tid = nb
                        moved = True
                        break
            if not moved:
                return tid
        # Degenerate walk; fall back to scanning everything.
        for tid, (a, b, c) in self.triangles.items():
            if (
                self._orient(a, b, px, py) >= 0
                and self._orient(b, c, px, py) >= 0
                and self._orient(c, a, px, py) >= 0
            ):
                return tid
        raise CollinearInput("point location failed; input is degenerate")

    def insert(self, p_idx: int):
        px, py = self.xs[p_idx], self.ys[p_idx]
        seed = self._locate(px, py)
        cavity = {seed}
        stack = [seed]
        while stack:
            tid = stack.pop()
            a, b, c = self.triangles[tid]
            for i, j in ((a, b), (b, c), (c, a)):
                nb = self._neighbor(tid, i, j)
                if nb is None or nb in cavity:
                    continue
                if self._in_circumcircle(nb, px, py):
                    cavity.add(nb)
                    stack.append(nb)
        boundary = []
        for tid in cavity:
            a, b, c = self.triangles[tid]
            for i, j in ((a, b), (b, c), (c, a)):
                nb = self._neighbor(tid, i, j)
                if nb is None or nb not in cavity:
                    boundary.append((i, j))
        for tid in list(cavity):
            self._remove_triangle(tid)
        for i, j in boundary:
            if self._orient(i, j, px, py) <= 0:
                raise CollinearInput(
                    "degenerate cavity boundary; duplicate or collinear input"
                )
            self._add_triangle(i, j, p_idx)

    def real_triangles(self) -> list[tuple[int, int, int]]:
        out = []
        for a, b, c in self.triangles.values():
            if a < self.n_real and b < self.n_real and c < self.n_real:
                out.append((a, b, c))
        out.sort()
        return out


def build_tin(cloud: PointCloud) -> Tin:
    """Delaunay TIN over the cloud's xy projection.

    Points within 1e-9 xy distance collapse to one vertex keeping the
    highest z. Raises TooFewPoints / CollinearInput when no triangulation
    exists.
    """
    xyz = _dedupe_xy(cloud.xyz)
    if xyz.shape[0] < 3:
        raise TooFewPoints(f"need at least 3 distinct points, got {xyz.shape[0]}")

    cx = float(xyz[:, 0].mean())
    cy = float(xyz[:, 1].mean())
    xs = xyz[:, 0] - cx
    ys = xyz[:, 1] - cy

    # All collinear -> no triangulation.
    collinear = True
    for k in range(2, xyz.shape[0]):
        if _orient2d(xs[0], ys[0], xs[1], ys[1], xs[k], ys[k]) != 0:
            collinear = False
            break
    if collinear:
        raise CollinearInput("all points are collinear in the xy-plane")

    tri = _Triangulator(xs, ys)
    for idx in _morton_order(xs, ys):
        tri.insert(int(idx))

    vertices = tuple(Point3(*xyz[i]) for i in range(xyz.shape[0]))
    return Tin(vertices=vertices, triangles=tuple(tri.real_triangles()))


# --- interpolation and rasterization ------------------------------------------

def _barycentric(tin: Tin, tid: int, x: float, y: float):
    """Normalized barycentric coordinates of (x, y) in triangle tid."""
    a, b, c = tin.triangle_array[tid]
    xs, ys = tin.xy_arrays
    ax, ay = xs[a], ys[a]
    bx, by = xs[b], ys[b]
    cx, cy = xs[c], ys[c]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area == 0:
        return None
    w0 = ((bx - x) * (cy - y) - (by - y) * (cx - x)) / area
    w1 = ((cx - x) * (ay - y) - (cy - y) * (ax - x)) / area
    w2 = 1.0 - w0 - w1
    return w0, w1, w2


def interpolate_z(tin: Tin, xy: Point2) -> Optional[float]:
    """Linear TIN interpolation at a point; None outside the hull."""
    x, y = float(xy[0]), float(xy[1])
    xs, ys = tin.xy_arrays
    tri = tin.triangle_array
    if tri.shape[0] == 0:
        return None
    tx = xs[tri]
    ty = ys[tri]
    cand = np.nonzero(
        (tx.min(axis=1) - 1e-9 <= x)
        & (x <= tx.max(axis=1) + 1e-9)
        & (ty.min(axis=1) - 1e-9 <= y)
        & (y <= ty.max(axis=1) + 1e-9)
    )[0]
    zs = tin.z_array
    for tid in cand:
        w = _barycentric(tin, int(tid), x, y)
        if w is None:
            continue
        if min(w) >= -_BARY_EPS:
            a, b, c = tri[tid]
            return float(w[0] * zs[a] + w[1] * zs[b] + w[2] * zs[c])
    return None


def _claim_grid(tin: Tin, geom: GridGeometry) -> np.ndarray:
    """Lowest-index containing triangle per cell center, -1 where none.

    The claim is independent of the kill distance so that filtering only
    ever substitutes NODATA, never changes a retained value. Candidate
    (triangle, cell) pairs come from the triangle bounding boxes, then one
    vectorized barycentric pass filters them.
    """
    claim = np.full(geom.n_rows * geom.n_cols, np.iinfo(np.int64).max, np.int64)
    xs, ys = tin.xy_arrays
    tri = tin.triangle_array
    if tri.shape[0] == 0:
        return np.full((geom.n_rows, geom.n_cols), -1, np.int64)
    cell = geom.cell_size
    tx = xs[tri]  # (T, 3)
    ty = ys[tri]

    # Cell index ranges covering each triangle bbox (y decreases by row),
    # padded by half a cell so boundary-tolerance hits are never missed.
    c0 = np.ceil((tx.min(axis=1) - geom.origin_x) / cell - 0.5 - 1e-12).astype(np.int64)
    c1 = np.floor((tx.max(axis=1) - geom.origin_x) / cell + 0.5 + 1e-12).astype(np.int64)
    r0 = np.ceil((geom.origin_y - ty.max(axis=1)) / cell - 0.5 - 1e-12).astype(np.int64)
    r1 = np.floor((geom.origin_y - ty.min(axis=1)) / cell + 0.5 + 1e-12).astype(np.int64)
    np.clip(c0, 0, geom.n_cols - 1, out=c0)
    np.clip(c1, -1, geom.n_cols - 1, out=c1)
    np.clip(r0, 0, geom.n_rows - 1, out=r0)
    np.clip(r1, -1, geom.n_rows - 1, out=r1)
    n_c = np.maximum(c1 - c0 + 1, 0)
    n_r = np.maximum(r1 - r0 + 1, 0)
    counts = n_c * n_r
    keep = counts > 0
    if not np.any(keep):
        return np.full((geom.n_rows, geom.n_cols), -1, np.int64)

    tids = np.repeat(np.nonzero(keep)[0], counts[keep])
    # Local candidate index within each triangle's block, row-major.
    local = np.arange(tids.size) - np.repeat(
        np.concatenate([[0], np.cumsum(counts[keep])[:-1]]), counts[keep]
    )
    rows = r0[tids] + local // n_c[tids]
    cols = c0[tids] + local % n_c[tids]

    px = geom.origin_x + cols * cell
    py = geom.origin_y - rows * cell
    ax, ay = tx[tids, 0], ty[tids, 0]
    bx, by = tx[tids, 1], ty[tids, 1]
    cx, cy = tx[tids, 2], ty[tids, 2]
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    ok = area != 0
    area = np.where(ok, area, 1.0)
    w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area
    w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area
    w2 = 1.0 - w0 - w1
    inside = ok & (w0 >= -_BARY_EPS) & (w1 >= -_BARY_EPS) & (w2 >= -_BARY_EPS)

    flat = rows[inside] * geom.n_cols + cols[inside]
    np.minimum.at(claim, flat, tids[inside])
    claim[claim == np.iinfo(np.int64).max] = -1
    return claim.reshape(geom.n_rows, geom.n_cols)


def rasterize_tin(
    tin: Tin,
    geom: GridGeometry,
    kill: float = DEFAULT_KILL_DISTANCE,
    max_cells: int = DEFAULT_CELL_CAP,
) -> DsmGrid:
    """Sample the TIN at cell centers. Cells whose containing triangle has
    an xy edge longer than the kill distance become NODATA, suppressing
    interpolation bridges across data gaps."""
    if not kill > 0:
        raise ValueError("kill distance must be positive")
    if geom.n_cols * geom.n_rows > max_cells:
        raise GridTooLarge(
            f"{geom.n_cols}x{geom.n_rows} cells exceed the cap of {max_cells}"
        )
    claim = _claim_grid(tin, geom)
    values = np.full((geom.n_rows, geom.n_cols), NODATA)
    tri = tin.triangle_array
    xs, ys = tin.xy_arrays
    zs = tin.z_array
    killed = tin.max_edge_lengths() > kill
    rows, cols = np.nonzero(claim >= 0)
    if rows.size:
        tids = claim[rows, cols]
        live = ~killed[tids]
        rows, cols, tids = rows[live], cols[live], tids[live]
        px = geom.origin_x + cols * geom.cell_size
        py = geom.origin_y - rows * geom.cell_size
        a, b, c = tri[tids, 0], tri[tids, 1], tri[tids, 2]
        ax, ay = xs[a], ys[a]
        bx, by = xs[b], ys[b]
        cx, cy = xs[c], ys[c]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area
        w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area
        w2 = 1.0 - w0 - w1
        values[rows, cols] = w0 * zs[a] + w1 * zs[b] + w2 * zs[c]
    return DsmGrid(geometry=geom, values=values)


def _points_in_rings(
    poly: ClipPolygon, px: np.ndarray, py: np.ndarray
) -> np.ndarray:
    """Even-odd (crossing parity) containment over every ring, so holes
    cancel the outer ring."""
    inside = np.zeros(px.shape, dtype=bool)
    for ring in poly.rings:
        for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
            if y0 == y1:
                continue
            crosses = ((y0 > py) != (y1 > py)) & (
                px < (x1 - x0) * (py - y0) / (y1 - y0) + x0
            )
            inside ^= crosses
    return inside


def clip_dsm(d: DsmGrid, poly: ClipPolygon) -> DsmGrid:
    """NODATA every cell whose center falls outside the polygon (outer
    ring minus holes); retained cells are unchanged bit-exactly."""
    xs, ys = d.geometry.cell_centers()
    gx, gy = np.meshgrid(xs, ys)
    inside = _points_in_rings(poly, gx, gy)
    values = np.where(inside, d.values, NODATA)
    return DsmGrid(geometry=d.geometry, values=values, nodata=d.nodata)


def vertical_check(tin: Tin, gcps: list[Gcp]) -> VerticalCheckReport:
    """Surface-minus-GCP elevation differences at each GCP's xy."""
    if not gcps:
        raise EmptyGcpSet("no GCPs supplied")
    per_gcp = []
    dzs = []
    n_outside = 0
    for g in gcps:
        z = interpolate_z(tin, Point2(g.world.x, g.world.y))
        if z is None:
            per_gcp.append((g.id, None, None))
            n_outside += 1
        else:
            dz = z - g.world.z
            per_gcp.append((g.id, z, dz))
            dzs.append(dz)
    if dzs:
        arr = np.array(dzs)
        mean_dz = float(arr.mean())
        rmse_dz = float(np.sqrt((arr ** 2).mean()))
        max_abs_dz = float(np.abs(arr).max())
    else:
        mean_dz = rmse_dz = max_abs_dz = None
    return VerticalCheckReport(
        per_gcp=tuple(per_gcp),
        mean_dz=mean_dz,
        rmse_dz=rmse_dz,
        max_abs_dz=max_abs_dz,
        n_outside=n_outside,
    )
