"""Pinhole camera, ray and light-plane primitives.

Conventions used throughout the package:

* World units are millimetres, pixel units are pixels.
* Points and directions are float64 numpy arrays of shape (3,); pixel
  coordinates are float64 arrays of shape (2,) holding (u, v).
* Camera frame: +x right, +y down, +z forward. A pose maps world points
  into the camera frame via ``p_cam = rotation @ p_world + translation``.
* Direction vectors stored in rays and plane normals are unit-norm
  within 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    IntersectionBehindRay,
    PointBehindCamera,
    RayParallelToPlane,
    ValidationError,
)

UNIT_NORM_TOL = 1e-9
MIN_DEPTH = 1e-12
GRAZING_TOL = 1e-9


def as_vec3(value) -> np.ndarray:
    """Coerce to a float64 (3,) vector."""
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector components must be finite")
    return v


def as_pixel(value) -> np.ndarray:
    """Coerce to a float64 (u, v) pixel coordinate."""
    p = np.asarray(value, dtype=np.float64)
    if p.shape != (2,):
        raise ValidationError(f"expected a pixel (u, v), got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("pixel coordinates must be finite")
    return p


def normalize(v) -> np.ndarray:
    v = as_vec3(v)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValidationError("cannot normalize the zero vector")
    return v / n


def _check_unit(v: np.ndarray, what: str) -> None:
    if abs(float(np.linalg.norm(v)) - 1.0) > UNIT_NORM_TOL:
        raise ValidationError(f"{what} must be unit-norm within {UNIT_NORM_TOL}")


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation about a unit axis (Rodrigues)."""
    a = normalize(axis)
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    k = np.array(
        [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
    )
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


@dataclass(frozen=True, eq=False)
class Ray:
    """Half-line from ``origin`` along unit ``direction``."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin))
        object.__setattr__(self, "direction", as_vec3(self.direction))
        _check_unit(self.direction, "ray direction")

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class Plane:
    """Plane { p : normal . p = d } with unit normal."""

    normal: np.ndarray
    d: float

    def __post_init__(self):
        object.__setattr__(self, "normal", as_vec3(self.normal))
        object.__setattr__(self, "d", float(self.d))
        _check_unit(self.normal, "plane normal")

    @classmethod
    def from_point_normal(cls, point, normal) -> "Plane":
        n = normalize(normal)
        return cls(n, float(n @ as_vec3(point)))

    def signed_distance(self, point) -> float:
        return float(self.normal @ as_vec3(point) - self.d)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Ideal pinhole camera: intrinsics plus a rigid world-to-camera pose.

    ``rotation`` (3x3, orthonormal, det +1) and ``translation`` (3,) map a
    world point p to camera coordinates ``rotation @ p + translation``.
    The chip defaults to the 1000x1000 reference sensor.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 1000
    height: int = 1000
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths fx, fy must be positive")
        for name in ("width", "height"):
            value = getattr(self, name)
            if int(value) != value or int(value) <= 0:
                raise ValidationError(f"chip {name} must be a positive integer")
            object.__setattr__(self, name, int(value))
        r = np.asarray(self.rotation, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValidationError("rotation must be a 3x3 matrix")
        if np.max(np.abs(r @ r.T - np.eye(3))) > UNIT_NORM_TOL:
            raise ValidationError("rotation must be orthonormal within 1e-9")
        if abs(float(np.linalg.det(r)) - 1.0) > UNIT_NORM_TOL:
            raise ValidationError("rotation determinant must be +1 within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", as_vec3(self.translation))

    @cached_property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -(self.rotation.T @ self.translation)

    @classmethod
    def look_at(cls, position, target, up, fx, fy, cx, cy,
                width: int = 1000, height: int = 1000) -> "CameraModel":
        """Camera at ``position`` with +z toward ``target``.

        ``up`` is the world direction that should map to image up (-v);
        it must not be parallel to the viewing direction.
        """
        position = as_vec3(position)
        forward = normalize(as_vec3(target) - position)
        up = as_vec3(up)
        right = np.cross(-up, forward)
        n = float(np.linalg.norm(right))
        if n < 1e-9:
            raise ValidationError("up direction is parallel to the viewing direction")
        right /= n
        down = np.cross(forward, right)
        rotation = np.stack([right, down, forward])
        return cls(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
                   rotation=rotation, translation=-(rotation @ position))

    def contains_pixel(self, pixel) -> bool:
        """True if (u, v) lies on the chip: 0 <= u < width, 0 <= v < height."""
        u, v = float(pixel[0]), float(pixel[1])
        return 0.0 <= u < self.width and 0.0 <= v < self.height


def project(camera: CameraModel, point) -> np.ndarray:
    """Project a world point to sub-pixel chip coordinates (u, v).

    Raises PointBehindCamera when the point's camera depth is <= 1e-12.
    The result may lie outside the chip bounds; callers decide.
    """
    p_cam = camera.rotation @ as_vec3(point) + camera.translation
    z = p_cam[2]
    if z <= MIN_DEPTH:
        raise PointBehindCamera(f"camera depth {z:.6g} mm is not positive")
    return np.array(
        [camera.fx * p_cam[0] / z + camera.cx, camera.fy * p_cam[1] / z + camera.cy]
    )


def project_points(camera: CameraModel, points: np.ndarray):
    """Vectorized projection of an (N, 3) array of world points.

    Returns ``(uv, depth)`` where uv is (N, 2); rows with depth <= 1e-12
    hold NaN instead of raising.
    """
    pts = np.asarray(points, dtype=np.float64)
    p_cam = pts @ camera.rotation.T + camera.translation
    z = p_cam[:, 2]
    valid = z > MIN_DEPTH
    safe_z = np.where(valid, z, 1.0)
    uv = np.empty((len(pts), 2))
    uv[:, 0] = camera.fx * p_cam[:, 0] / safe_z + camera.cx
    uv[:, 1] = camera.fy * p_cam[:, 1] / safe_z + camera.cy
    uv[~valid] = np.nan
    return uv, z


def pixel_ray(camera: CameraModel, pixel) -> Ray:
    """World-frame viewing ray through a (possibly sub-pixel) chip coordinate."""
    pixel = as_pixel(pixel)
    d_cam = np.array(
        [(pixel[0] - camera.cx) / camera.fx, (pixel[1] - camera.cy) / camera.fy, 1.0]
    )
    direction = camera.rotation.T @ d_cam
    return Ray(camera.center, direction / np.linalg.norm(direction))


def pixel_ray_directions(camera: CameraModel, uv: np.ndarray) -> np.ndarray:
    """Unit world directions for an (N, 2) array of pixels (origins: camera.center)."""
    uv = np.asarray(uv, dtype=np.float64)
    d_cam = np.empty((len(uv), 3))
    d_cam[:, 0] = (uv[:, 0] - camera.cx) / camera.fx
    d_cam[:, 1] = (uv[:, 1] - camera.cy) / camera.fy
    d_cam[:, 2] = 1.0
    d_world = d_cam @ camera.rotation
    return d_world / np.linalg.norm(d_world, axis=1, keepdims=True)


def intersect_ray_plane(ray: Ray, plane: Plane) -> np.ndarray:
    """Intersection point of a ray with a plane.

    Raises RayParallelToPlane for grazing incidence (|n.d| <= 1e-9) and
    IntersectionBehindRay when the hit lies at t <= 0.
    """
    denom = float(plane.normal @ ray.direction)
    if abs(denom) <= GRAZING_TOL:
        raise RayParallelToPlane(f"|normal . direction| = {abs(denom):.3g}")
    t = (plane.d - float(plane.normal @ ray.origin)) / denom
    if t <= 0.0:
        raise IntersectionBehindRay(f"intersection parameter t = {t:.6g}")
    return ray.at(t)


def triangulate(camera: CameraModel, pixel, plane: Plane) -> np.ndarray:
    """Back-project a chip coordinate and intersect with a light plane."""
    return intersect_ray_plane(pixel_ray(camera, pixel), plane)


def triangulate_pixels(camera: CameraModel, uv: np.ndarray, plane: Plane):
    """Vectorized triangulation of (N, 2) pixels against one plane.

    Returns ``(points, t)``; grazing or behind-ray rows get t = NaN and
    NaN points instead of raising.
    """
    dirs = pixel_ray_directions(camera, uv)
    origin = camera.center
    denom = dirs @ plane.normal
    num = plane.d - float(plane.normal @ origin)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / denom
    bad = (np.abs(denom) <= GRAZING_TOL) | ~(t > 0.0)
    t = np.where(bad, np.nan, t)
    return origin + t[:, None] * dirs, t


def transform_point(point, rotation: np.ndarray, translation) -> np.ndarray:
    return np.asarray(rotation) @ as_vec3(point) + as_vec3(translation)


def transform_plane(plane: Plane, rotation: np.ndarray, translation) -> Plane:
    """Plane after applying the rigid map p -> R p + t to the world."""
    n = np.asarray(rotation) @ plane.normal
    return Plane(n, plane.d + float(n @ as_vec3(translation)))


def transform_camera(camera: CameraModel, rotation: np.ndarray, translation) -> CameraModel:
    """Camera after applying the rigid map p -> R p + t to the world.

    Pixel coordinates of transformed scene points are unchanged.
    """
    rotation = np.asarray(rotation, dtype=np.float64)
    new_rot = camera.rotation @ rotation.T
    new_trans = camera.translation - new_rot @ as_vec3(translation)
    return CameraModel(
        fx=camera.fx, fy=camera.fy, cx=camera.cx, cy=camera.cy,
        width=camera.width, height=camera.height,
        rotation=new_rot, translation=new_trans,
    )
