"""Joint perceptual-privacy saliency scoring per cube.

Each cube gets s = alpha * phi_p + (1 - alpha) * phi_s where both component
scores are convex combinations of normalized cues:

    phi_p: point density (relative to the fullest cube in the frame),
           centroid motion against the previous boundary-matched cube,
           and proximity to the viewpoint;
    phi_s: fraction of points carrying the sensitive label, and proximity
           to the user anchor.

Proximities use the soft falloff 1 / (1 + distance / scale) so scores stay
in (0, 1] without hard cutoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .frame_io import PointCloudFrame
from .partition import Cube, CubeId, CubeSet

__all__ = [
    "SaliencyConfig",
    "SaliencyScore",
    "perceptual_saliency",
    "privacy_saliency",
    "joint_saliency",
    "score_cubes",
]


@dataclass(frozen=True)
class SaliencyConfig:
    alpha: float = 0.5
    w_density: float = 1.0 / 3.0
    w_motion: float = 1.0 / 3.0
    w_view: float = 1.0 / 3.0
    w_identity: float = 0.5
    w_user: float = 0.5
    motion_scale: float = 0.5  # meters of per-frame displacement mapping to motion=1
    proximity_scale: float = 1.0  # meters; softness of both proximity cues

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must be in [0, 1]")
        for name in ("w_density", "w_motion", "w_view", "w_identity", "w_user"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if abs(self.w_density + self.w_motion + self.w_view - 1.0) > 1e-9:
            raise ValidationError("perceptual weights must sum to 1")
        if abs(self.w_identity + self.w_user - 1.0) > 1e-9:
            raise ValidationError("privacy weights must sum to 1")
        if self.motion_scale <= 0 or self.proximity_scale <= 0:
            raise ValidationError("scales must be positive")


@dataclass(frozen=True)
class SaliencyScore:
    cube_id: CubeId
    phi_p: float
    phi_s: float
    s: float


def _proximity(a: np.ndarray, b: np.ndarray, scale: float) -> float:
    return 1.0 / (1.0 + float(np.linalg.norm(a - b)) / scale)


def perceptual_saliency(
    cube: Cube,
    frame: PointCloudFrame,
    prev_centroid: np.ndarray | None,
    cfg: SaliencyConfig,
    max_points: int | None = None,
) -> float:
    """phi_p for one cube.

    ``max_points`` is the size of the fullest cube in the frame's cube set
    (the density normalizer); it defaults to this cube's own size, which is
    only correct for single-cube frames.
    """
    if cube.num_points == 0:
        raise ValidationError("perceptual saliency of an empty cube")
    norm = max_points if max_points is not None else cube.num_points
    density = cube.num_points / norm if norm > 0 else 0.0
    if prev_centroid is None:
        motion = 0.0
    else:
        disp = float(np.linalg.norm(cube.centroid - np.asarray(prev_centroid)))
        motion = min(1.0, disp / cfg.motion_scale)
    view = _proximity(cube.centroid, frame.viewpoint, cfg.proximity_scale)
    phi = cfg.w_density * density + cfg.w_motion * motion + cfg.w_view * view
    return min(1.0, max(0.0, phi))


def privacy_saliency(cube: Cube, frame: PointCloudFrame, cfg: SaliencyConfig) -> float:
    """phi_s for one cube: label exposure plus user proximity."""
    if cube.num_points == 0:
        raise ValidationError("privacy saliency of an empty cube")
    exposure = float(frame.sensitivity[cube.point_indices].mean())
    user = _proximity(cube.centroid, frame.user_anchor, cfg.proximity_scale)
    phi = cfg.w_identity * exposure + cfg.w_user * user
    return min(1.0, max(0.0, phi))


def joint_saliency(phi_p: float, phi_s: float, alpha: float) -> float:
    """s = alpha * phi_p + (1 - alpha) * phi_s."""
    for name, v in (("phi_p", phi_p), ("phi_s", phi_s), ("alpha", alpha)):
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise ValidationError(f"{name}={v} outside [0, 1]")
    return alpha * phi_p + (1.0 - alpha) * phi_s


def _match_prev_centroid(
    centroid: np.ndarray, prev_centroids: np.ndarray | None, radius: float
) -> np.ndarray | None:
    """Previous-frame centroid for motion estimation.

    Matching is by nearest previous centroid within ``radius`` rather than
    by cube id: content that moved across a cell boundary would otherwise
    lose its motion history exactly when it matters.
    """
    if prev_centroids is None or len(prev_centroids) == 0:
        return None
    d2 = np.sum((prev_centroids - centroid) ** 2, axis=1)
    best = int(np.argmin(d2))
    if d2[best] >= radius * radius:
        return None
    return prev_centroids[best]


def score_cubes(
    cubes: CubeSet,
    frame: PointCloudFrame,
    prev_cubes: CubeSet | None,
    cfg: SaliencyConfig = SaliencyConfig(),
) -> list[SaliencyScore]:
    """Score every cube; result sorted by s descending, CubeId breaking ties."""
    cfg.validate()
    if not cubes.cubes:
        return []
    max_points = max(c.num_points for c in cubes.cubes)
    match_radius = 2.0 * cubes.grid_edge
    prev_centroids = None
    if prev_cubes is not None and prev_cubes.cubes:
        prev_centroids = np.array([c.centroid for c in prev_cubes.cubes])
    scores = []
    for cube in cubes.cubes:
        prev_c = _match_prev_centroid(cube.centroid, prev_centroids, match_radius)
        phi_p = perceptual_saliency(cube, frame, prev_c, cfg, max_points)
        phi_s = privacy_saliency(cube, frame, cfg)
        scores.append(SaliencyScore(cube.id, phi_p, phi_s, joint_saliency(phi_p, phi_s, cfg.alpha)))
    scores.sort(key=lambda r: (-r.s, r.cube_id))
    return scores
