"""Synthetic measurable surfaces and ray intersection.

Every surface answers batched intersection queries: given ray origins and
unit directions it returns the hit parameter t per ray (np.inf on miss).
Scenes are small (desk scale), so meshes are tested brute force and
heightfields walk their grid cells; no acceleration structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .geometry import Ray, as_vec3

T_MIN = 1e-9  # self-intersection guard

_AXES = {"x": 0, "y": 1, "z": 2}


def _broadcast_rays(origins, directions):
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if o.shape[0] == 1 and d.shape[0] > 1:
        o = np.broadcast_to(o, d.shape)
    return o, d


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValidationError("sphere radius must be positive")

    def intersect_t(self, origins, directions) -> np.ndarray:
        o, d = _broadcast_rays(origins, directions)
        oc = o - self.center
        b = np.einsum("ij,ij->i", d, oc)
        c = np.einsum("ij,ij->i", oc, oc) - self.radius**2
        disc = b * b - c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > T_MIN, t0, np.where(t1 > T_MIN, t1, np.inf))
        return np.where(disc >= 0.0, t, np.inf)


@dataclass(frozen=True, eq=False)
class AxisPlane:
    """Axis-aligned bounded rectangle at ``axis = offset``.

    ``extents`` bounds the two remaining coordinates, in axis order
    (e.g. for axis 'z': ((x_lo, x_hi), (y_lo, y_hi))).
    """

    axis: str
    offset: float
    extents: tuple

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValidationError(f"axis must be one of x, y, z; got {self.axis!r}")
        ext = np.asarray(self.extents, dtype=np.float64)
        if ext.shape != (2, 2) or np.any(ext[:, 0] >= ext[:, 1]):
            raise ValidationError("extents must be ((lo, hi), (lo, hi)) with lo < hi")
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "extents", ext)

    def intersect_t(self, origins, directions) -> np.ndarray:
        o, d = _broadcast_rays(origins, directions)
        k = _AXES[self.axis]
        i, j = [a for a in range(3) if a != k]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - o[:, k]) / d[:, k]
        p_i = o[:, i] + t * d[:, i]
        p_j = o[:, j] + t * d[:, j]
        (lo_i, hi_i), (lo_j, hi_j) = self.extents
        ok = (
            (np.abs(d[:, k]) > 1e-15)
            & (t > T_MIN)
            & (p_i >= lo_i) & (p_i <= hi_i)
            & (p_j >= lo_j) & (p_j <= hi_j)
        )
        return np.where(ok, t, np.inf)


@dataclass(frozen=True, eq=False)
class Heightfield:
    """Surface z = h(x, y) sampled on a regular grid over an x-y rectangle.

    ``heights[i, j]`` is the z value at (x0 + j*dx, y0 + i*dy); cells are
    interpolated bilinearly, so rays are tested against exact bilinear
    patches while a 2D DDA walks only the grid cells the ray crosses.
    """

    origin_xy: np.ndarray
    size_xy: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin_xy, dtype=np.float64).reshape(2)
        size = np.asarray(self.size_xy, dtype=np.float64).reshape(2)
        h = np.asarray(self.heights, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] < 2 or h.shape[1] < 2:
            raise ValidationError("heightfield grid must be at least 2x2")
        if np.any(size <= 0):
            raise ValidationError("heightfield size must be positive")
        object.__setattr__(self, "origin_xy", origin)
        object.__setattr__(self, "size_xy", size)
        object.__setattr__(self, "heights", h)

    @property
    def cell_size(self) -> np.ndarray:
        ny, nx = self.heights.shape
        return self.size_xy / np.array([nx - 1, ny - 1])

    def height_at(self, x: float, y: float) -> float:
        """Bilinear height at an (x, y) inside the rectangle."""
        dx, dy = self.cell_size
        fx = (x - self.origin_xy[0]) / dx
        fy = (y - self.origin_xy[1]) / dy
        ny, nx = self.heights.shape
        j = min(max(int(np.floor(fx)), 0), nx - 2)
        i = min(max(int(np.floor(fy)), 0), ny - 2)
        s, r = fx - j, fy - i
        h = self.heights
        return float(
            (1 - s) * (1 - r) * h[i, j]
            + s * (1 - r) * h[i, j + 1]
            + (1 - s) * r * h[i + 1, j]
            + s * r * h[i + 1, j + 1]
        )

    def _cell_hit(self, o, d, i, j, t_lo, t_hi) -> float:
        """Smallest t in [t_lo, t_hi] hitting the bilinear patch of cell (i, j)."""
        dx, dy = self.cell_size
        x0 = self.origin_xy[0] + j * dx
        y0 = self.origin_xy[1] + i * dy
        s0, s1 = (o[0] - x0) / dx, d[0] / dx
        r0, r1 = (o[1] - y0) / dy, d[1] / dy
        h = self.heights
        z00 = h[i, j]
        a_ = h[i, j + 1] - z00
        b_ = h[i + 1, j] - z00
        c_ = h[i + 1, j + 1] - h[i, j + 1] - h[i + 1, j] + z00
        # f(t) = z_ray(t) - z_patch(s(t), r(t)) is quadratic in t
        qa = -c_ * s1 * r1
        qb = d[2] - a_ * s1 - b_ * r1 - c_ * (s0 * r1 + s1 * r0)
        qc = o[2] - z00 - a_ * s0 - b_ * r0 - c_ * s0 * r0
        if abs(qa) < 1e-14:
            roots = [-qc / qb] if abs(qb) > 1e-14 else []
        else:
            disc = qb * qb - 4.0 * qa * qc
            if disc < 0.0:
                return np.inf
            sq = np.sqrt(disc)
            roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
        eps = 1e-9
        best = np.inf
        for t in sorted(roots):
            if t > T_MIN and t_lo - eps <= t <= t_hi + eps:
                s = s0 + s1 * t
                r = r0 + r1 * t
                if -1e-9 <= s <= 1 + 1e-9 and -1e-9 <= r <= 1 + 1e-9:
                    best = t
                    break
        return best

    def _intersect_one(self, o, d) -> float:
        ny, nx = self.heights.shape
        dx, dy = self.cell_size
        lo = self.origin_xy
        hi = self.origin_xy + self.size_xy
        # 2D slab test for the x-y footprint of the ray
        t_enter, t_exit = T_MIN, np.inf
        for k in range(2):
            if abs(d[k]) < 1e-15:
                if not (lo[k] <= o[k] <= hi[k]):
                    return np.inf
            else:
                ta = (lo[k] - o[k]) / d[k]
                tb = (hi[k] - o[k]) / d[k]
                if ta > tb:
                    ta, tb = tb, ta
                t_enter = max(t_enter, ta)
                t_exit = min(t_exit, tb)
        if t_enter > t_exit:
            return np.inf
        # DDA over grid cells along [t_enter, t_exit]
        p = o[:2] + t_enter * d[:2]
        j = min(max(int(np.floor((p[0] - lo[0]) / dx)), 0), nx - 2)
        i = min(max(int(np.floor((p[1] - lo[1]) / dy)), 0), ny - 2)
        step_j = 1 if d[0] > 0 else -1
        step_i = 1 if d[1] > 0 else -1
        t = t_enter
        while t <= t_exit + 1e-12:
            if abs(d[0]) > 1e-15:
                nxt_x = lo[0] + (j + (step_j > 0)) * dx
                t_x = (nxt_x - o[0]) / d[0]
            else:
                t_x = np.inf
            if abs(d[1]) > 1e-15:
                nxt_y = lo[1] + (i + (step_i > 0)) * dy
                t_y = (nxt_y - o[1]) / d[1]
            else:
                t_y = np.inf
            t_next = min(t_x, t_y, t_exit)
            hit = self._cell_hit(o, d, i, j, t, t_next)
            if np.isfinite(hit):
                return hit
            if t_next >= t_exit:
                break
            if t_x <= t_y:
                j += step_j
                if not 0 <= j <= nx - 2:
                    break
            else:
                i += step_i
                if not 0 <= i <= ny - 2:
                    break
            t = t_next
        return np.inf

    def intersect_t(self, origins, directions) -> np.ndarray:
        o, d = _broadcast_rays(origins, directions)
        return np.array([self._intersect_one(o[n], d[n]) for n in range(len(d))])


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        tri = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError("vertices must be an (N, 3) array")
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValidationError("triangles must be an (M, 3) index array")
        if len(tri) and (tri.min() < 0 or tri.max() >= len(v)):
            raise ValidationError("triangle indices out of vertex range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", tri)

    def intersect_t(self, origins, directions) -> np.ndarray:
        # Moeller-Trumbore, brute force over triangles, vectorized over rays.
        o, d = _broadcast_rays(origins, directions)
        best = np.full(len(d), np.inf)
        for tri in self.triangles:
            v0, v1, v2 = self.vertices[tri]
            e1, e2 = v1 - v0, v2 - v0
            p = np.cross(d, e2)
            det = p @ e1
            ok = np.abs(det) > 1e-12
            inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
            tvec = o - v0
            u = np.einsum("ij,ij->i", tvec, p) * inv
            q = np.cross(tvec, e1)
            v = np.einsum("ij,ij->i", d, q) * inv
            t = (q @ e2) * inv
            ok &= (u >= 0) & (v >= 0) & (u + v <= 1) & (t > T_MIN)
            best = np.where(ok & (t < best), t, best)
        return best


Surface = Sphere | AxisPlane | Heightfield | TriangleMesh


@dataclass(frozen=True, eq=False)
class Hit:
    point: np.ndarray
    surface_index: int
    t: float


@dataclass(frozen=True, eq=False)
class Scene:
    objects: tuple

    def __post_init__(self):
        objects = tuple(self.objects)
        if not objects:
            raise ValidationError("a scene needs at least one surface")
        object.__setattr__(self, "objects", objects)

    def intersect_batch(self, origins, directions):
        """Nearest hit per ray: (t, surface_index); misses get t=inf, index=-1."""
        o, d = _broadcast_rays(origins, directions)
        all_t = np.stack([s.intersect_t(o, d) for s in self.objects])
        idx = np.argmin(all_t, axis=0)
        t = all_t[idx, np.arange(len(d))]
        return t, np.where(np.isfinite(t), idx, -1)


def intersect_scene(scene: Scene, ray: Ray) -> Optional[Hit]:
    """Nearest intersection of a ray with the scene, or None on miss."""
    t, idx = scene.intersect_batch(ray.origin[None, :], ray.direction[None, :])
    if not np.isfinite(t[0]):
        return None
    return Hit(point=ray.at(float(t[0])), surface_index=int(idx[0]), t=float(t[0]))
