"""Reference sensor geometry and built-in scenario generators.

The reference rig is a desk-scale two-camera light sectioner: main
camera at the origin looking down +z, projector 75 mm to its left,
second (texture) camera further left and slightly below, all aimed at a
working volume around z = 350 mm. With the default ten-line fan and the
100 mm measurement depth the chip regions fill the 1000 px sensor width
almost exactly, which is what makes the scenarios interesting: surfaces
beyond the depth range image two region strides to the right and are
falsely indexed.

Scenario defaults were chosen such that ``wall_outside`` yields almost
exactly 25% falsely indexed points: the body plate covers lines 3..8
fully, lines 1 and 2 spill onto the far wall (false, correctable) while
lines 9 and 10 image off-chip.
"""

from __future__ import annotations

import numpy as np

from .errors import RegionOverlap, ValidationError
from .geometry import CameraModel
from .indexing import build_region_map
from .projection import LineProjector, MeasurementVolume
from .scene import AxisPlane, Heightfield, Scene, Sphere, TriangleMesh

SCENARIO_NAMES = ("flat_inside", "wall_outside", "sphere_wall", "density_sweep")

WORKING_TARGET = np.array([0.0, 0.0, 350.0])
IMAGE_UP = np.array([0.0, -1.0, 0.0])  # world +y points down, like image v

SWEEP_CAP = 400  # upper bound on line count tried by a density sweep


def reference_main_camera() -> CameraModel:
    return CameraModel.look_at(
        position=[0.0, 0.0, 0.0], target=WORKING_TARGET, up=IMAGE_UP,
        fx=1400.0, fy=1400.0, cx=500.0, cy=500.0, width=1000, height=1000,
    )


def reference_second_camera() -> CameraModel:
    return CameraModel.look_at(
        position=[-160.0, -60.0, 0.0], target=WORKING_TARGET, up=IMAGE_UP,
        fx=1150.0, fy=1150.0, cx=500.0, cy=500.0, width=1000, height=1000,
    )


def reference_projector(num_lines: int = 10) -> LineProjector:
    return LineProjector(
        center=[-75.0, 0.0, 0.0],
        base_direction=WORKING_TARGET - np.array([-75.0, 0.0, 0.0]),
        fan_axis=[0.0, 1.0, 0.0],
        num_lines=num_lines,
        angular_pitch=np.deg2rad(3.8),
        aperture=np.deg2rad(32.0),
    )


def reference_volume() -> MeasurementVolume:
    return MeasurementVolume(z_min=300.0, z_max=400.0)


def _rect(extent) -> tuple:
    lo, hi = float(extent[0]), float(extent[1])
    return (lo, hi)


def flat_inside_scene(params: dict | None = None) -> Scene:
    """A flat surface entirely inside the measurement depth."""
    p = {"z_mm": 350.0, "half_extent_mm": 400.0}
    p.update(params or {})
    a = float(p["half_extent_mm"])
    return Scene((
        AxisPlane(axis="z", offset=float(p["z_mm"]), extents=((-a, a), (-a, a))),
    ))


def wall_outside_scene(params: dict | None = None) -> Scene:
    """Body plate inside the depth range, wall far beyond it.

    The wall signals image outside their own chip regions and pick up a
    wrong line index; the defaults size the wall share to ~25% of all
    acquired points.
    """
    p = {
        "body_z_mm": 350.0,
        "body_x_mm": (-71.0, 77.0),
        "body_y_mm": (-110.0, 110.0),
        "wall_z_mm": 900.0,
        "wall_x_mm": (-650.0, 650.0),
        "wall_y_mm": (-450.0, 450.0),
    }
    p.update(params or {})
    return Scene((
        AxisPlane(axis="z", offset=float(p["body_z_mm"]),
                  extents=(_rect(p["body_x_mm"]), _rect(p["body_y_mm"]))),
        AxisPlane(axis="z", offset=float(p["wall_z_mm"]),
                  extents=(_rect(p["wall_x_mm"]), _rect(p["wall_y_mm"]))),
    ))


def sphere_wall_scene(params: dict | None = None) -> Scene:
    """Sphere in front of a wall, both inside the depth range.

    All signals index correctly, but the sphere hides part of the wall
    from the second camera, exercising the occlusion path of the check.
    """
    p = {
        "sphere_center_mm": (0.0, 0.0, 345.0),
        "sphere_radius_mm": 35.0,
        "wall_z_mm": 390.0,
        "wall_x_mm": (-300.0, 300.0),
        "wall_y_mm": (-300.0, 300.0),
    }
    p.update(params or {})
    return Scene((
        Sphere(center=np.asarray(p["sphere_center_mm"], dtype=float),
               radius=float(p["sphere_radius_mm"])),
        AxisPlane(axis="z", offset=float(p["wall_z_mm"]),
                  extents=(_rect(p["wall_x_mm"]), _rect(p["wall_y_mm"]))),
    ))


def build_scene(name: str, params: dict | None = None) -> Scene:
    if name == "flat_inside":
        return flat_inside_scene(params)
    if name == "wall_outside":
        return wall_outside_scene(params)
    if name == "sphere_wall":
        return sphere_wall_scene(params)
    if name == "density_sweep":
        # geometry-only scenario; a plain in-range surface keeps it runnable
        return flat_inside_scene(params)
    raise ValidationError(
        f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}"
    )


def surface_from_spec(spec: dict):
    """Build one surface from its config-file description."""
    kind = spec.get("type")
    fields = {k: v for k, v in spec.items() if k != "type"}
    try:
        if kind == "sphere":
            return Sphere(center=fields.pop("center_mm"),
                          radius=fields.pop("radius_mm"), **fields)
        if kind == "axis_plane":
            return AxisPlane(axis=fields.pop("axis"),
                             offset=fields.pop("offset_mm"),
                             extents=fields.pop("extents_mm"), **fields)
        if kind == "heightfield":
            return Heightfield(origin_xy=fields.pop("origin_mm"),
                               size_xy=fields.pop("size_mm"),
                               heights=fields.pop("heights_mm"), **fields)
        if kind == "mesh":
            return TriangleMesh(vertices=fields.pop("vertices_mm"),
                                triangles=fields.pop("triangles"), **fields)
    except KeyError as exc:
        raise ValidationError(f"surface type {kind!r} is missing field {exc}") from exc
    except TypeError as exc:
        raise ValidationError(f"surface type {kind!r}: {exc}") from exc
    raise ValidationError(
        f"unknown surface type {kind!r}; expected sphere, axis_plane, "
        f"heightfield or mesh"
    )


def fan_angle_of(projector: LineProjector) -> float:
    """Total fan angle between the outermost planes (radians)."""
    return projector.angular_pitch * (projector.num_lines - 1)


def sweep_max_lines(
    main_cam: CameraModel,
    projector: LineProjector,
    volume: MeasurementVolume,
    guard: float,
    cap: int = SWEEP_CAP,
) -> int:
    """Largest line count whose regions stay disjoint, at fixed fan angle.

    The fan spanned by the projector's outermost planes is held fixed
    while the line count grows, so the line density rises until two
    dilated regions collide; that first collision bounds the count.
    """
    fan = fan_angle_of(projector)
    if fan <= 0:
        raise ValidationError("density sweep needs a multi-line projector")
    n_max = 0
    for n in range(1, cap + 1):
        pitch = fan / (n - 1) if n > 1 else 0.0
        try:
            build_region_map(main_cam, projector.with_lines(n, pitch), volume, guard)
        except RegionOverlap:
            return n_max
        n_max = n
    return n_max
