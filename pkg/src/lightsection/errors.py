"""Exception types raised by the lightsection package."""


class LightSectionError(Exception):
    """Base class for all package errors."""


class ValidationError(LightSectionError):
    """An input value violates a documented invariant."""


class ParseError(LightSectionError):
    """A config file could not be parsed."""


class PointBehindCamera(LightSectionError):
    """Projection requested for a point at non-positive camera depth."""


class RayParallelToPlane(LightSectionError):
    """Ray direction is (numerically) parallel to the plane."""


class IntersectionBehindRay(LightSectionError):
    """Ray/plane intersection lies at parameter t <= 0."""


class IndexOutOfRange(LightSectionError):
    """Line index outside 1..num_lines."""


class RegionOverlap(LightSectionError):
    """Two chip regions intersect: line indexing would be ambiguous.

    Carries the first offending pair and the chip row where they collide.
    """

    def __init__(self, index_a: int, index_b: int, row: int):
        self.index_a = index_a
        self.index_b = index_b
        self.row = row
        super().__init__(
            f"regions of lines {index_a} and {index_b} overlap at chip row {row}; "
            f"reduce the number of lines or narrow the measurement depth"
        )


class UnassignedSignal(LightSectionError):
    """A signal without an assigned line index cannot be evaluated."""


class Unverifiable(LightSectionError):
    """The second frame holds no signals, so no point can be checked."""


class ConfigMismatch(LightSectionError):
    """Frames, cameras, region map and projector disagree on ids or line count."""
