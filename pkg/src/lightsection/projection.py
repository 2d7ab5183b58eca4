"""Line projector, measurement volume and the two-camera sensor simulator.

The projector holds a fan of indexed light planes that all contain the
projection center and the fan axis. Frames are synthesized directly as
sub-pixel line signals (no pixel arrays): surface samples along each
plane are projected into both cameras, occlusion-checked by exact
re-intersection, jittered by Gaussian pixel noise and clipped to the
chip. Ground-truth plane index and surface point ride along on every
signal for validation; indexing and verification never read them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import IndexOutOfRange, ValidationError
from .geometry import (
    CameraModel,
    Plane,
    as_vec3,
    normalize,
    project_points,
    rotation_about_axis,
)
from .scene import Scene

MAIN = "main"
SECOND = "second"

OCCLUSION_TOL = 1e-6  # mm slack when re-intersecting along a viewing ray


@dataclass(frozen=True, eq=False)
class LineProjector:
    """Fan of ``num_lines`` light planes hinged on the axis through ``center``.

    Plane k is the central plane (the one containing ``base_direction``)
    rotated about ``fan_axis`` by ``(k - (N+1)/2) * angular_pitch``, so
    adjacent planes differ by exactly the pitch and the fan is symmetric
    about the base direction. ``aperture`` is the in-plane angular spread
    used when casting sample rays along one line.
    """

    center: np.ndarray
    base_direction: np.ndarray
    fan_axis: np.ndarray
    num_lines: int
    angular_pitch: float
    aperture: float = np.deg2rad(40.0)

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        object.__setattr__(self, "base_direction", normalize(self.base_direction))
        object.__setattr__(self, "fan_axis", normalize(self.fan_axis))
        if int(self.num_lines) != self.num_lines or self.num_lines < 1:
            raise ValidationError("num_lines must be a positive integer")
        object.__setattr__(self, "num_lines", int(self.num_lines))
        object.__setattr__(self, "angular_pitch", float(self.angular_pitch))
        object.__setattr__(self, "aperture", float(self.aperture))
        if self.angular_pitch < 0:
            raise ValidationError("angular_pitch must be non-negative")
        if self.num_lines > 1 and self.angular_pitch == 0:
            raise ValidationError("angular_pitch must be positive for multi-line fans")
        if not (0 < self.aperture < np.pi):
            raise ValidationError("aperture must lie in (0, pi) radians")
        if np.linalg.norm(np.cross(self.base_direction, self.fan_axis)) < 1e-9:
            raise ValidationError("base_direction must not be parallel to fan_axis")

    @cached_property
    def _base_normal(self) -> np.ndarray:
        return normalize(np.cross(self.base_direction, self.fan_axis))

    def plane_angle(self, index: int) -> float:
        """Fan angle of plane ``index`` relative to the central plane."""
        return (index - (self.num_lines + 1) / 2.0) * self.angular_pitch

    def with_lines(self, num_lines: int, angular_pitch: float) -> "LineProjector":
        return LineProjector(
            center=self.center, base_direction=self.base_direction,
            fan_axis=self.fan_axis, num_lines=num_lines,
            angular_pitch=angular_pitch, aperture=self.aperture,
        )


def light_plane(projector: LineProjector, index: int) -> Plane:
    """The index-th light plane (1-based). Contains center and fan axis."""
    if not 1 <= index <= projector.num_lines:
        raise IndexOutOfRange(
            f"line index {index} outside 1..{projector.num_lines}"
        )
    rot = rotation_about_axis(projector.fan_axis, projector.plane_angle(index))
    normal = rot @ projector._base_normal
    return Plane(normal, float(normal @ projector.center))


def line_ray_directions(projector: LineProjector, index: int, num_samples: int) -> np.ndarray:
    """Unit ray directions fanned evenly within plane ``index`` (N, 3).

    Directions sweep the projector aperture about the plane's central
    direction; all lie in the plane exactly.
    """
    if num_samples < 1:
        raise ValidationError("num_samples must be >= 1")
    plane = light_plane(projector, index)
    # in-plane forward direction of this plane (rotates with the fan)
    forward = np.cross(projector.fan_axis, plane.normal)
    forward /= np.linalg.norm(forward)
    if float(forward @ projector.base_direction) < 0:
        forward = -forward
    if num_samples == 1:
        alphas = np.zeros(1)
    else:
        alphas = np.linspace(-projector.aperture / 2.0, projector.aperture / 2.0, num_samples)
    return (
        np.cos(alphas)[:, None] * forward[None, :]
        + np.sin(alphas)[:, None] * projector.fan_axis[None, :]
    )


def sample_line_points(
    projector: LineProjector, index: int, scene: Scene, num_samples: int
) -> np.ndarray:
    """Surface points lit by line ``index``: nearest scene hits of the fan rays.

    Returns an (M, 3) array, M <= num_samples; rays that miss the scene
    yield no sample. Every returned point lies on the light plane.
    """
    dirs = line_ray_directions(projector, index, num_samples)
    t, _ = scene.intersect_batch(projector.center[None, :], dirs)
    hit = np.isfinite(t)
    return projector.center + t[hit, None] * dirs[hit]


@dataclass(frozen=True, eq=False)
class MeasurementVolume:
    """Depth range [z_min, z_max] along the main camera's optical axis."""

    z_min: float
    z_max: float

    def __post_init__(self):
        object.__setattr__(self, "z_min", float(self.z_min))
        object.__setattr__(self, "z_max", float(self.z_max))
        if not (0 < self.z_min < self.z_max):
            raise ValidationError(
                "MeasurementVolume requires 0 < z_min < z_max "
                f"(got z_min={self.z_min}, z_max={self.z_max})"
            )

    @property
    def width(self) -> float:
        return self.z_max - self.z_min


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Gaussian sub-pixel localization noise, independent per axis."""

    sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))
        if self.sigma < 0:
            raise ValidationError("noise sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class ChipSignal:
    """One sub-pixel line signal on a camera chip.

    ``truth_index`` and ``truth_point`` are simulator ground truth carried
    for validation only.
    """

    pixel: np.ndarray
    camera_id: str
    truth_index: int
    truth_point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=np.float64))
        object.__setattr__(self, "truth_point", as_vec3(self.truth_point))


@dataclass(frozen=True, eq=False)
class Frame:
    """All signals of one camera exposure, stored as parallel arrays."""

    camera_id: str
    pixels: np.ndarray        # (S, 2)
    truth_indices: np.ndarray  # (S,) int, 1-based plane index
    truth_points: np.ndarray   # (S, 3)
    noise_sigma: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        ti = np.asarray(self.truth_indices, dtype=np.int64).reshape(-1)
        tp = np.asarray(self.truth_points, dtype=np.float64).reshape(-1, 3)
        if not (len(px) == len(ti) == len(tp)):
            raise ValidationError("frame arrays must have matching lengths")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "truth_indices", ti)
        object.__setattr__(self, "truth_points", tp)
        object.__setattr__(self, "noise_sigma", float(self.noise_sigma))

    def __len__(self) -> int:
        return len(self.pixels)

    def signal(self, i: int) -> ChipSignal:
        return ChipSignal(
            pixel=self.pixels[i], camera_id=self.camera_id,
            truth_index=int(self.truth_indices[i]), truth_point=self.truth_points[i],
        )

    def __iter__(self):
        return (self.signal(i) for i in range(len(self)))

    @cached_property
    def pixel_tree(self) -> cKDTree:
        if len(self) == 0:
            raise ValidationError("cannot build a signal lookup for an empty frame")
        return cKDTree(self.pixels)


def visible_mask(scene: Scene, camera: CameraModel, points: np.ndarray) -> np.ndarray:
    """True where a surface point is seen unoccluded from the camera center."""
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    delta = points - camera.center
    dist = np.linalg.norm(delta, axis=1)
    dirs = delta / dist[:, None]
    t, _ = scene.intersect_batch(camera.center[None, :], dirs)
    return t >= dist - OCCLUSION_TOL


def _camera_signals(
    scene: Scene,
    camera: CameraModel,
    points: np.ndarray,
    rng: np.random.Generator,
    sigma: float,
):
    """Project samples into one camera; returns (pixels, keep_mask)."""
    uv, depth = project_points(camera, points)
    keep = (depth > 0) & visible_mask(scene, camera, points)
    noise = rng.normal(0.0, sigma, size=uv.shape) if sigma > 0 else 0.0
    uv = uv + noise
    with np.errstate(invalid="ignore"):
        on_chip = (
            (uv[:, 0] >= 0.0) & (uv[:, 0] < camera.width)
            & (uv[:, 1] >= 0.0) & (uv[:, 1] < camera.height)
        )
    keep &= on_chip
    return uv, keep


def render_frames(
    scene: Scene,
    projector: LineProjector,
    main_cam: CameraModel,
    second_cam: CameraModel,
    noise: NoiseModel,
    samples_per_line: int = 1000,
):
    """Simulate one simultaneous exposure of both cameras.

    Both frames derive from a single sampling pass over the projected
    lines, so a surface sample visible to both cameras appears in both
    frames with the same ground-truth point. Per-line, per-camera RNG
    streams are derived from (seed, line index, camera), which keeps
    rendering deterministic and order-independent.
    """
    per_cam = {MAIN: [], SECOND: []}
    for index in range(1, projector.num_lines + 1):
        points = sample_line_points(projector, index, scene, samples_per_line)
        if len(points) == 0:
            continue
        for cam_ord, (cam_id, cam) in enumerate(((MAIN, main_cam), (SECOND, second_cam))):
            rng = np.random.default_rng([noise.rng_seed, index, cam_ord])
            uv, keep = _camera_signals(scene, cam, points, rng, noise.sigma)
            per_cam[cam_id].append((uv[keep], np.full(keep.sum(), index), points[keep]))

    frames = []
    for cam_id in (MAIN, SECOND):
        chunks = per_cam[cam_id]
        if chunks:
            px = np.concatenate([c[0] for c in chunks])
            ti = np.concatenate([c[1] for c in chunks])
            tp = np.concatenate([c[2] for c in chunks])
        else:
            px = np.empty((0, 2))
            ti = np.empty(0, dtype=np.int64)
            tp = np.empty((0, 3))
        frames.append(Frame(camera_id=cam_id, pixels=px, truth_indices=ti,
                            truth_points=tp, noise_sigma=noise.sigma))
    return frames[0], frames[1]
