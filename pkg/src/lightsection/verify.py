"""Stereo back-projection test and index correction.

Every evaluated 3D point is back-projected onto the second camera chip
and compared against the signals actually observed there. A match within
tolerance confirms the index; a miss flags the point as falsely indexed.
Failed points are then either deleted outright, or re-triangulated under
every candidate line index and kept only if exactly one candidate is
consistent with the second camera. The second camera's signals are never
independently indexed; matching is purely by pixel distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigMismatch, Unverifiable, ValidationError
from .geometry import CameraModel, project_points, triangulate_pixels
from .indexing import (
    EvaluatedPoint,
    IndexedSignal,
    RegionMap,
    assign_index_batch,
)
from .projection import MAIN, SECOND, Frame, LineProjector, light_plane

logger = logging.getLogger(__name__)

DELETE_MODE = "delete"
CORRECT_MODE = "correct"

# residual histogram: 0.25 px bins up to 10 px, then a single overflow bin
RESIDUAL_BIN_EDGES = np.concatenate([np.arange(0.0, 10.25, 0.25), [np.inf]])


@dataclass(frozen=True, eq=False)
class MatchTolerance:
    """Pixel radius within which a back-projection matches a signal."""

    epsilon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if self.epsilon <= 0:
            raise ValidationError("match tolerance epsilon must be > 0")

    def warn_if_tight(self, noise_sigma: float) -> None:
        if self.epsilon < 2.0 * noise_sigma:
            logger.warning(
                "match tolerance %.3g px is below twice the noise sigma %.3g px; "
                "correctly indexed points will fail the stereo test",
                self.epsilon, noise_sigma,
            )


class VerdictKind(Enum):
    CORRECT = "correct"
    FALSE_INDEXED = "false_indexed"
    CORRECTED = "corrected"
    DELETED = "deleted"


class DeleteReason(Enum):
    NO_CANDIDATE = "no_candidate"
    AMBIGUOUS_CANDIDATES = "ambiguous_candidates"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True, eq=False)
class Verdict:
    """Outcome of the stereo check for one evaluated point."""

    kind: VerdictKind
    new_index: Optional[int] = None
    new_position: Optional[np.ndarray] = None
    reason: Optional[DeleteReason] = None

    @classmethod
    def correct(cls) -> "Verdict":
        return cls(VerdictKind.CORRECT)

    @classmethod
    def false_indexed(cls) -> "Verdict":
        return cls(VerdictKind.FALSE_INDEXED)

    @classmethod
    def corrected(cls, new_index: int, new_position: np.ndarray) -> "Verdict":
        return cls(VerdictKind.CORRECTED, new_index=int(new_index),
                   new_position=np.asarray(new_position, dtype=np.float64))

    @classmethod
    def deleted(cls, reason: DeleteReason) -> "Verdict":
        return cls(VerdictKind.DELETED, reason=reason)

    @property
    def removed(self) -> bool:
        """True if the point is dropped from cleaned output clouds."""
        return self.kind in (VerdictKind.FALSE_INDEXED, VerdictKind.DELETED)


@dataclass(frozen=True, eq=False)
class VerifiedPoint:
    source: EvaluatedPoint
    verdict: Verdict
    residual: float

    @property
    def final_position(self) -> np.ndarray:
        if self.verdict.kind is VerdictKind.CORRECTED:
            return self.verdict.new_position
        return self.source.position


@dataclass(eq=False)
class PipelineStats:
    total_points: int = 0
    correct_count: int = 0
    false_count: int = 0
    corrected_count: int = 0
    deleted_count: int = 0
    unassigned_count: int = 0
    leakage_count: int = 0
    residual_histogram: np.ndarray = field(
        default_factory=lambda: np.zeros(len(RESIDUAL_BIN_EDGES) - 1, dtype=np.int64)
    )


def _second_view_residuals(
    second_cam: CameraModel, second_frame: Frame, positions: np.ndarray
) -> np.ndarray:
    """Distance from each back-projection to the nearest second-frame signal.

    Back-projections behind the camera or off the chip get +inf.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    uv, depth = project_points(second_cam, positions)
    with np.errstate(invalid="ignore"):
        ok = (
            (depth > 0)
            & (uv[:, 0] >= 0.0) & (uv[:, 0] < second_cam.width)
            & (uv[:, 1] >= 0.0) & (uv[:, 1] < second_cam.height)
        )
    residuals = np.full(len(positions), np.inf)
    if len(second_frame) and ok.any():
        dist, _ = second_frame.pixel_tree.query(uv[ok])
        residuals[ok] = dist
    return residuals


def stereo_test(
    point: EvaluatedPoint,
    second_cam: CameraModel,
    second_frame: Frame,
    tol: MatchTolerance,
):
    """Back-project the 3D point and compare with real second-camera signals.

    Returns (passes, residual). Raises Unverifiable when the second frame
    holds no signals at all.
    """
    if len(second_frame) == 0:
        raise Unverifiable("second frame holds no signals")
    residual = float(_second_view_residuals(second_cam, second_frame,
                                            point.position[None, :])[0])
    return residual <= tol.epsilon, residual


def _candidate_residuals(
    pixels: np.ndarray,
    main_cam: CameraModel,
    second_cam: CameraModel,
    second_frame: Frame,
    projector: LineProjector,
):
    """Stereo residual of every candidate index for every pixel.

    Returns (residuals (S, N), positions (S, N, 3)); candidates whose
    triangulation is invalid (grazing or behind the ray) get +inf.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    n_lines = projector.num_lines
    residuals = np.full((len(pixels), n_lines), np.inf)
    positions = np.full((len(pixels), n_lines, 3), np.nan)
    for n in range(1, n_lines + 1):
        pts, t = triangulate_pixels(main_cam, pixels, light_plane(projector, n))
        valid = np.isfinite(t)
        if not valid.any():
            continue
        positions[valid, n - 1] = pts[valid]
        if len(second_frame):
            residuals[valid, n - 1] = _second_view_residuals(
                second_cam, second_frame, pts[valid]
            )
    return residuals, positions


def correct_point(
    source: IndexedSignal,
    main_cam: CameraModel,
    second_cam: CameraModel,
    second_frame: Frame,
    projector: LineProjector,
    tol: MatchTolerance,
) -> Verdict:
    """Re-index a signal that failed the stereo test.

    Every candidate index is tried: the signal is re-triangulated with
    each light plane and the result checked against the second camera.
    Exactly one consistent candidate repairs the point; zero or several
    delete it (with several candidates there is no information to prefer
    one, and a silently wrong point is worse than a missing one).
    """
    residuals, positions = _candidate_residuals(
        source.signal.pixel[None, :], main_cam, second_cam, second_frame, projector
    )
    hits = np.flatnonzero(residuals[0] <= tol.epsilon)
    if len(hits) == 1:
        n = int(hits[0]) + 1
        return Verdict.corrected(n, positions[0, hits[0]])
    if len(hits) == 0:
        return Verdict.deleted(DeleteReason.NO_CANDIDATE)
    return Verdict.deleted(DeleteReason.AMBIGUOUS_CANDIDATES)


def _evaluate_batch(
    pixels: np.ndarray,
    assigned: np.ndarray,
    main_cam: CameraModel,
    projector: LineProjector,
) -> np.ndarray:
    """Triangulated positions for assigned signals (NaN where invalid)."""
    positions = np.full((len(pixels), 3), np.nan)
    for n in np.unique(assigned):
        mask = assigned == n
        pts, _ = triangulate_pixels(main_cam, pixels[mask], light_plane(projector, int(n)))
        positions[mask] = pts
    return positions


def process_dataset(
    frames,
    region_map: RegionMap,
    cams,
    projector: LineProjector,
    tol: MatchTolerance,
    mode: str = CORRECT_MODE,
    keep_unverified: bool = False,
):
    """Run the full per-signal pipeline over one exposure pair.

    assign index -> evaluate -> stereo test -> on failure delete or
    correct, depending on ``mode``. Returns (verified points, stats);
    the list keeps deleted points (they carry their verdicts) so raw
    clouds can be written, while cleaned outputs filter on the verdict.
    """
    main_frame, second_frame = frames
    main_cam, second_cam = cams
    if mode not in (DELETE_MODE, CORRECT_MODE):
        raise ValidationError(f"mode must be '{DELETE_MODE}' or '{CORRECT_MODE}'")
    if main_frame.camera_id != MAIN or second_frame.camera_id != SECOND:
        raise ConfigMismatch(
            f"expected frames ({MAIN!r}, {SECOND!r}), got "
            f"({main_frame.camera_id!r}, {second_frame.camera_id!r})"
        )
    if region_map.camera_id != MAIN:
        raise ConfigMismatch("region map was not built for the main camera")
    if region_map.num_lines != projector.num_lines:
        raise ConfigMismatch(
            f"region map holds {region_map.num_lines} lines but the projector "
            f"projects {projector.num_lines}"
        )
    tol.warn_if_tight(main_frame.noise_sigma)

    assigned_all = assign_index_batch(region_map, main_frame.pixels)
    kept = assigned_all > 0
    stats = PipelineStats(unassigned_count=int((~kept).sum()))

    pixels = main_frame.pixels[kept]
    assigned = assigned_all[kept]
    truth_idx = main_frame.truth_indices[kept]
    positions = _evaluate_batch(pixels, assigned, main_cam, projector)
    stats.total_points = len(pixels)

    if len(second_frame) == 0:
        residuals = np.full(len(pixels), np.inf)
        verdicts = [Verdict.deleted(DeleteReason.UNVERIFIABLE) for _ in range(len(pixels))]
        stats.deleted_count = len(pixels)
    else:
        residuals = _second_view_residuals(second_cam, second_frame, positions)
        passes = residuals <= tol.epsilon
        verdicts: list = [None] * len(pixels)
        for i in np.flatnonzero(passes):
            verdicts[i] = Verdict.correct()
        stats.correct_count = int(passes.sum())
        stats.leakage_count = int((passes & (assigned != truth_idx)).sum())

        failed = np.flatnonzero(~passes)
        stats.false_count = len(failed)
        if mode == DELETE_MODE:
            for i in failed:
                verdicts[i] = Verdict.false_indexed()
            stats.deleted_count = len(failed)
        elif len(failed):
            cand_res, cand_pos = _candidate_residuals(
                pixels[failed], main_cam, second_cam, second_frame, projector
            )
            ok = cand_res <= tol.epsilon
            n_ok = ok.sum(axis=1)
            for k, i in enumerate(failed):
                if n_ok[k] == 1:
                    j = int(np.flatnonzero(ok[k])[0])
                    verdicts[i] = Verdict.corrected(j + 1, cand_pos[k, j])
                    stats.corrected_count += 1
                elif n_ok[k] == 0:
                    verdicts[i] = Verdict.deleted(DeleteReason.NO_CANDIDATE)
                    stats.deleted_count += 1
                else:
                    verdicts[i] = Verdict.deleted(DeleteReason.AMBIGUOUS_CANDIDATES)
                    stats.deleted_count += 1

    finite = np.isfinite(residuals)
    hist, _ = np.histogram(residuals[finite], bins=RESIDUAL_BIN_EDGES)
    hist[-1] += int((~finite).sum())
    stats.residual_histogram = hist.astype(np.int64)

    kept_rows = np.flatnonzero(kept)
    points = []
    for i in range(len(pixels)):
        indexed = IndexedSignal(
            signal=main_frame.signal(int(kept_rows[i])),
            assigned_index=int(assigned[i]),
        )
        points.append(
            VerifiedPoint(
                source=EvaluatedPoint(
                    position=positions[i], assigned_index=int(assigned[i]),
                    source=indexed,
                ),
                verdict=verdicts[i],
                residual=float(residuals[i]),
            )
        )
    return points, stats
