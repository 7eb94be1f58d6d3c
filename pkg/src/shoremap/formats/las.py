"""LAS 1.2 point format 2 reader/writer (binary, little-endian).

Format 2 is the oldest LAS revision carrying RGB, which maximizes interop
with las-based tooling. The format has no alpha channel; the writer notes
the drop in the header's system-identifier text field.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import (
    BadSignature,
    CoordinateOverflow,
    MalformedHeader,
    TruncatedFile,
    UnsupportedVersionOrFormat,
)
from ..stereo import PointCloud

HEADER_SIZE = 227
POINT_RECORD_LENGTH = 26
POINT_FORMAT = 2
SIGNATURE = b"LASF"

_SYSTEM_ID = b"RGBA source; alpha dropped"
_SOFTWARE = b"shoremap 0.1.0"

# 1 return, first of 1, no flags.
_RETURN_BYTE = 0b00001001


def _normalize_triplet(value, name: str) -> tuple[float, float, float]:
    if np.isscalar(value):
        v = (float(value),) * 3
    else:
        v = tuple(float(x) for x in value)
        if len(v) != 3:
            raise ValueError(f"{name} must be a scalar or 3-tuple")
    if name == "scale" and any(s <= 0 for s in v):
        raise ValueError("scale components must be positive")
    return v


def write_las(cloud: PointCloud, scale=0.001, offset=0.0) -> bytes:
    """Serialize a point cloud to LAS 1.2 / point format 2 bytes.

    Coordinates are stored as round((v - offset) / scale) in 32-bit ints;
    raises CoordinateOverflow when a value does not fit. 8-bit colors are
    widened to 16 bits (x257); alpha is dropped.
    """
    s = _normalize_triplet(scale, "scale")
    o = _normalize_triplet(offset, "offset")
    xyz = cloud.xyz
    n = xyz.shape[0]
    quantized = np.empty((n, 3), dtype=np.int64)
    for axis in range(3):
        q = np.rint((xyz[:, axis] - o[axis]) / s[axis])
        if q.size and (np.abs(q) >= 2 ** 31).any():
            raise CoordinateOverflow(
                f"axis {axis} exceeds the 32-bit quantized range for "
                f"scale {s[axis]:g}, offset {o[axis]:g}"
            )
        quantized[:, axis] = q.astype(np.int64)

    if n:
        dequant = quantized * np.array(s) + np.array(o)
        mins = dequant.min(axis=0)
        maxs = dequant.max(axis=0)
    else:
        mins = maxs = np.zeros(3)

    header = bytearray(HEADER_SIZE)
    header[0:4] = SIGNATURE
    struct.pack_into("<H", header, 4, 0)          # file source id
    struct.pack_into("<H", header, 6, 0)          # global encoding
    # GUID left zero.
    header[24] = 1                                # version major
    header[25] = 2                                # version minor
    header[26:26 + len(_SYSTEM_ID)] = _SYSTEM_ID
    header[58:58 + len(_SOFTWARE)] = _SOFTWARE
    struct.pack_into("<H", header, 90, 0)         # creation day (fixed: determinism)
    struct.pack_into("<H", header, 92, 0)         # creation year
    struct.pack_into("<H", header, 94, HEADER_SIZE)
    struct.pack_into("<I", header, 96, HEADER_SIZE)  # offset to point data
    struct.pack_into("<I", header, 100, 0)        # number of VLRs
    header[104] = POINT_FORMAT
    struct.pack_into("<H", header, 105, POINT_RECORD_LENGTH)
    struct.pack_into("<I", header, 107, n)
    struct.pack_into("<5I", header, 111, n, 0, 0, 0, 0)
    struct.pack_into("<3d", header, 131, *s)
    struct.pack_into("<3d", header, 155, *o)
    struct.pack_into(
        "<6d", header, 179,
        maxs[0], mins[0], maxs[1], mins[1], maxs[2], mins[2],
    )

    body = bytearray(n * POINT_RECORD_LENGTH)
    colors16 = cloud.colors[:, :3].astype(np.uint16) * 257
    for i in range(n):
        struct.pack_into(
            "<3iHBBbBH3H",
            body,
            i * POINT_RECORD_LENGTH,
            int(quantized[i, 0]),
            int(quantized[i, 1]),
            int(quantized[i, 2]),
            0,                  # intensity
            _RETURN_BYTE,
            0,                  # classification
            0,                  # scan angle rank
            0,                  # user data
            0,                  # point source id
            int(colors16[i, 0]),
            int(colors16[i, 1]),
            int(colors16[i, 2]),
        )
    return bytes(header) + bytes(body)


def read_las(data: bytes) -> PointCloud:
    """Parse LAS 1.2 / point format 2 bytes back into a point cloud.

    16-bit colors reduce to 8 bits by divide-by-257 rounding; alpha is
    restored as 255.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MalformedHeader("expected a byte buffer")
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedFile(f"{len(data)} bytes is too short for a LAS header")
    if data[0:4] != SIGNATURE:
        raise BadSignature(f"signature {data[0:4]!r} is not {SIGNATURE!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedFile(
            f"{len(data)} bytes is shorter than the {HEADER_SIZE}-byte header"
        )
    major, minor = data[24], data[25]
    if (major, minor) != (1, 2):
        raise UnsupportedVersionOrFormat(f"LAS {major}.{minor} unsupported (need 1.2)")
    point_format = data[104]
    record_length = struct.unpack_from("<H", data, 105)[0]
    if point_format != POINT_FORMAT or record_length != POINT_RECORD_LENGTH:
        raise UnsupportedVersionOrFormat(
            f"point format {point_format} / record length {record_length} "
            f"unsupported (need {POINT_FORMAT}/{POINT_RECORD_LENGTH})"
        )
    offset_to_points = struct.unpack_from("<I", data, 96)[0]
    if offset_to_points < HEADER_SIZE:
        raise MalformedHeader(
            f"point data offset {offset_to_points} overlaps the header"
        )
    n = struct.unpack_from("<I", data, 107)[0]
    scale = struct.unpack_from("<3d", data, 131)
    offset = struct.unpack_from("<3d", data, 155)

    needed = offset_to_points + n * POINT_RECORD_LENGTH
    if len(data) < needed:
        have = max(0, (len(data) - offset_to_points) // POINT_RECORD_LENGTH)
        raise TruncatedFile(f"header promises {n} point records, found {have}")

    if n == 0:
        return PointCloud(xyz=np.zeros((0, 3)), colors=np.zeros((0, 4), np.uint8))

    raw = np.frombuffer(
        data, dtype=np.uint8, count=n * POINT_RECORD_LENGTH, offset=offset_to_points
    ).reshape(n, POINT_RECORD_LENGTH)
    ints = (
        raw[:, 0:12].copy().view("<i4").reshape(n, 3).astype(np.float64)
    )
    colors16 = raw[:, 20:26].copy().view("<u2").reshape(n, 3).astype(np.float64)

    xyz = ints * np.array(scale) + np.array(offset)
    colors8 = np.clip(np.rint(colors16 / 257.0), 0, 255).astype(np.uint8)
    rgba = np.concatenate(
        [colors8, np.full((n, 1), 255, dtype=np.uint8)], axis=1
    )
    try:
        return PointCloud(xyz=xyz, colors=rgba)
    except ValueError as exc:
        raise MalformedHeader(f"decoded coordinates invalid: {exc}") from exc
