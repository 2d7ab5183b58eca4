"""Region-based line indexing on the main camera chip.

Each light plane is granted a reserved chip region: the exact image of
the plane clipped to the measurement depth range, dilated by a guard
margin. Regions are stored as one closed u-interval per chip row, which
is exact for fan geometries whose line images run across rows, and makes
disjointness checkable without rasterization. A signal is assigned the
index of the unique region containing its pixel; signals from outside
the depth range legitimately land in another line's region and receive a
wrong index, which is precisely the failure mode the stereo check
downstream has to catch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigMismatch,
    RegionOverlap,
    UnassignedSignal,
    ValidationError,
)
from .geometry import CameraModel, triangulate
from .projection import ChipSignal, LineProjector, MeasurementVolume, light_plane

# Line images must cross chip rows for per-row intervals to be bounded.
_MIN_ROW_SLOPE = 1e-9


@dataclass(frozen=True, eq=False)
class RegionMap:
    """Disjoint per-row u-intervals reserving chip area per line index.

    ``u_min[n-1, r]``/``u_max[n-1, r]`` bound region n on chip row r
    (rows bin v by floor). Rows where a line cannot appear inside the
    depth range carry an empty interval (+inf, -inf).
    """

    camera_id: str
    width: int
    height: int
    num_lines: int
    volume: MeasurementVolume
    guard: float
    u_min: np.ndarray
    u_max: np.ndarray

    def row_of(self, v: float) -> int:
        return int(np.floor(v))

    def contains(self, index: int, pixel) -> bool:
        """True if the pixel lies inside region ``index`` (1-based)."""
        row = self.row_of(pixel[1])
        if not 0 <= row < self.height:
            return False
        return bool(
            self.u_min[index - 1, row] <= pixel[0] <= self.u_max[index - 1, row]
        )


@dataclass(frozen=True, eq=False)
class IndexedSignal:
    """A chip signal with the line index looked up from the region map.

    ``assigned_index`` is None when the pixel lies in no region; note the
    contract is region lookup, not correctness.
    """

    signal: ChipSignal
    assigned_index: Optional[int]


@dataclass(frozen=True, eq=False)
class EvaluatedPoint:
    """3D point triangulated with the assigned (possibly wrong) plane."""

    position: np.ndarray
    assigned_index: int
    source: IndexedSignal


def _plane_image_u(camera: CameraModel, plane, v_edges: np.ndarray, z: float) -> np.ndarray:
    """u-coordinate of the plane's image at chip rows ``v_edges``, depth z.

    For a pixel (u, v) whose viewing ray meets the plane at camera depth
    z: u = cx + (fx / m_x) * (e / z - m_y (v - cy) / fy - m_z) with
    m = R n (plane normal in camera frame) and e = d - n . center, which
    is affine in v and in 1/z, so interval endpoints are exact.
    """
    m = camera.rotation @ plane.normal
    e = plane.d - float(plane.normal @ camera.center)
    if abs(m[0]) < _MIN_ROW_SLOPE:
        raise ValidationError(
            "RegionMap: light plane images horizontally on the chip; per-row "
            "u-intervals are unbounded for this camera/projector geometry"
        )
    return camera.cx + (camera.fx / m[0]) * (
        e / z - m[1] * (v_edges - camera.cy) / camera.fy - m[2]
    )


def build_region_map(
    main_cam: CameraModel,
    projector: LineProjector,
    volume: MeasurementVolume,
    guard: float = 0.5,
) -> RegionMap:
    """Build the chip partition induced by the measurement depth range.

    For each line the swept u-interval per row is evaluated at the four
    corners (row edges x depth limits), dilated by ``guard`` pixels and
    clipped to the chip. Raises RegionOverlap naming the first colliding
    line pair and row if any two dilated regions intersect, which is the
    uniqueness limit on line count for this depth range.
    """
    if guard < 0:
        raise ValidationError("guard margin must be >= 0")
    n_lines = projector.num_lines
    height, width = main_cam.height, main_cam.width
    v_edges = np.arange(height + 1, dtype=np.float64)

    u_min = np.full((n_lines, height), np.inf)
    u_max = np.full((n_lines, height), -np.inf)
    for n in range(1, n_lines + 1):
        plane = light_plane(projector, n)
        u_near = _plane_image_u(main_cam, plane, v_edges, volume.z_min)
        u_far = _plane_image_u(main_cam, plane, v_edges, volume.z_max)
        corners = np.stack([u_near[:-1], u_near[1:], u_far[:-1], u_far[1:]])
        lo = corners.min(axis=0) - guard
        hi = corners.max(axis=0) + guard
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, float(width))
        empty = lo > hi
        u_min[n - 1] = np.where(empty, np.inf, lo)
        u_max[n - 1] = np.where(empty, -np.inf, hi)

    _check_disjoint(u_min, u_max)
    return RegionMap(
        camera_id="main", width=width, height=height, num_lines=n_lines,
        volume=volume, guard=float(guard), u_min=u_min, u_max=u_max,
    )


def _check_disjoint(u_min: np.ndarray, u_max: np.ndarray) -> None:
    if u_min.shape[0] < 2:
        return
    order = np.argsort(u_min, axis=0)
    lo_sorted = np.take_along_axis(u_min, order, axis=0)
    hi_sorted = np.take_along_axis(u_max, order, axis=0)
    # empty intervals sort last (lo=+inf) and can never trigger (hi=-inf)
    overlap = lo_sorted[1:] <= hi_sorted[:-1]
    if not overlap.any():
        return
    pos, row = np.argwhere(overlap)[0]
    a = int(order[pos, row]) + 1
    b = int(order[pos + 1, row]) + 1
    raise RegionOverlap(min(a, b), max(a, b), int(row))


def assign_index_batch(region_map: RegionMap, pixels: np.ndarray) -> np.ndarray:
    """Region lookup for (S, 2) pixels; returns 1-based indices, 0 = unassigned."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    u = pixels[:, 0]
    rows = np.floor(pixels[:, 1]).astype(np.int64)
    in_rows = (rows >= 0) & (rows < region_map.height)
    rows_safe = np.clip(rows, 0, region_map.height - 1)
    assigned = np.zeros(len(pixels), dtype=np.int64)
    for n in range(region_map.num_lines):
        inside = (
            in_rows
            & (u >= region_map.u_min[n, rows_safe])
            & (u <= region_map.u_max[n, rows_safe])
        )
        # regions are disjoint; keep the lower index if ever both matched
        assigned = np.where(inside & (assigned == 0), n + 1, assigned)
    return assigned


def assign_index(region_map: RegionMap, signal: ChipSignal) -> IndexedSignal:
    """Assign the line index of the unique region containing the signal."""
    if signal.camera_id != region_map.camera_id:
        raise ConfigMismatch(
            f"signal from camera {signal.camera_id!r} cannot be indexed with a "
            f"region map built for camera {region_map.camera_id!r}"
        )
    index = int(assign_index_batch(region_map, signal.pixel[None, :])[0])
    return IndexedSignal(signal=signal, assigned_index=index if index else None)


def evaluate(
    indexed: IndexedSignal, main_cam: CameraModel, projector: LineProjector
) -> EvaluatedPoint:
    """Triangulate the signal with its assigned light plane.

    The result is wrong exactly when the assigned index is wrong: the
    point then sits elsewhere on the same viewing ray.
    """
    if indexed.assigned_index is None:
        raise UnassignedSignal("signal has no assigned line index")
    plane = light_plane(projector, indexed.assigned_index)
    position = triangulate(main_cam, indexed.signal.pixel, plane)
    return EvaluatedPoint(
        position=position, assigned_index=indexed.assigned_index, source=indexed
    )
