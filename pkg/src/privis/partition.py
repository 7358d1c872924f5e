"""Spatial cube partitioning with temporal boundary reuse.

Frames are decomposed on a uniform voxel grid. The grid edge is auto-tuned
by bisection so the number of non-empty cubes lands within
[target/2, 2*target]; boundaries are then reused across frames until the
fraction of points changing cell membership exceeds a threshold, at which
point the frame is re-partitioned and the boundary epoch increments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .frame_io import PointCloudFrame

__all__ = [
    "CubeId",
    "Cube",
    "CubeSet",
    "PartitionConfig",
    "partition_frame",
    "reuse_or_repartition",
    "membership_change_fraction",
]

_BISECT_MAX_ITERS = 24


class CubeId(NamedTuple):
    """Grid cell index; tuple ordering doubles as the lexicographic order."""

    ix: int
    iy: int
    iz: int


@dataclass
class Cube:
    """One non-empty grid cell of a frame."""

    id: CubeId
    point_indices: np.ndarray  # indices into the frame's point arrays
    centroid: np.ndarray  # (3,)
    aabb_min: np.ndarray  # (3,)
    aabb_max: np.ndarray  # (3,)

    @property
    def num_points(self) -> int:
        return len(self.point_indices)


@dataclass
class CubeSet:
    """All cubes of one frame plus the grid geometry they came from."""

    frame_id: int
    cubes: list[Cube]
    boundary_epoch: int
    grid_edge: float
    grid_origin: np.ndarray  # (3,)
    point_cells: np.ndarray | None = None  # (N, 3) cell per point, reuse cache

    def by_id(self) -> dict[CubeId, Cube]:
        return {c.id: c for c in self.cubes}


@dataclass(frozen=True)
class PartitionConfig:
    target_cubes: int = 64
    change_threshold: float = 0.2

    def validate(self) -> None:
        if self.target_cubes < 1:
            raise ValidationError("target_cubes must be >= 1")
        if not 0.0 <= self.change_threshold <= 1.0:
            raise ValidationError("change_threshold must be in [0, 1]")


def _cells_for(positions: np.ndarray, origin: np.ndarray, edge: float) -> np.ndarray:
    """Integer cell index per point, shape (N, 3).

    The relative slack keeps points lying exactly on the outer bounding-box
    face inside the last cell instead of spilling into a phantom index.
    """
    return np.floor((positions - origin) / (edge * (1.0 + 1e-9))).astype(np.int64)


_PACK_BIAS = 1 << 20  # 21 bits per axis fills an int64 exactly


def _pack_cells(cells: np.ndarray) -> np.ndarray | None:
    """Bijective int64 key per cell row; None when indices exceed 21 bits."""
    if cells.size and (cells.min() < -_PACK_BIAS or cells.max() >= _PACK_BIAS):
        return None
    biased = cells + _PACK_BIAS
    return (biased[:, 0] << 42) | (biased[:, 1] << 21) | biased[:, 2]


def _count_nonempty(positions: np.ndarray, origin: np.ndarray, edge: float) -> int:
    cells = _cells_for(positions, origin, edge)
    keys = _pack_cells(cells)
    if keys is None:  # degenerate tiny edges on small frames
        return len(np.unique(cells, axis=0))
    return len(np.unique(keys))


def _build_cubes(
    frame: PointCloudFrame,
    origin: np.ndarray,
    edge: float,
    cells: np.ndarray | None = None,
) -> list[Cube]:
    if cells is None:
        cells = _cells_for(frame.positions, origin, edge)
    keys = _pack_cells(cells)
    if keys is None:
        keys = np.unique(cells, axis=0, return_inverse=True)[1]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.nonzero(np.diff(sorted_keys, prepend=sorted_keys[0] - 1))[0]
    counts = np.diff(starts, append=len(order))
    sorted_pos = frame.positions[order]
    sums = np.add.reduceat(sorted_pos, starts, axis=0)
    mins = np.minimum.reduceat(sorted_pos, starts, axis=0)
    maxs = np.maximum.reduceat(sorted_pos, starts, axis=0)
    cubes = []
    for g, start in enumerate(starts):
        grp = order[start : start + counts[g]]
        cid = CubeId(*(int(v) for v in cells[grp[0]]))
        cubes.append(
            Cube(
                id=cid,
                point_indices=grp,
                centroid=sums[g] / counts[g],
                aabb_min=mins[g],
                aabb_max=maxs[g],
            )
        )
    cubes.sort(key=lambda c: c.id)
    return cubes, cells


def partition_frame(
    frame: PointCloudFrame,
    target_cubes: int = 64,
    boundary_epoch: int = 0,
) -> CubeSet:
    """Voxelize a frame with a bisection-tuned grid edge.

    The bisection runs on [0, extent] where extent is the largest bounding
    box dimension: a larger edge gives fewer cubes, so the search is
    monotone in practice. It stops at the first edge whose non-empty cube
    count falls within [ceil(target/2), 2*target]; after the iteration cap
    the closest count wins, ties resolved toward more cubes.
    """
    if target_cubes < 1:
        raise ValidationError("target_cubes must be >= 1")
    if frame.num_points == 0:
        return CubeSet(frame.frame_id, [], boundary_epoch, 1.0, np.zeros(3))

    origin = frame.positions.min(axis=0)
    extent = float((frame.positions.max(axis=0) - origin).max())
    if extent <= 0.0:  # all points coincide
        cubes, cells = _build_cubes(frame, origin, 1.0)
        return CubeSet(frame.frame_id, cubes, boundary_epoch, 1.0, origin, cells)

    band_lo = (target_cubes + 1) // 2
    band_hi = 2 * target_cubes
    lo, hi = 0.0, extent
    best_edge, best_count = extent, _count_nonempty(frame.positions, origin, extent)
    for _ in range(_BISECT_MAX_ITERS):
        mid = (lo + hi) / 2.0
        if mid <= 0.0:
            break
        count = _count_nonempty(frame.positions, origin, mid)
        better = abs(count - target_cubes) < abs(best_count - target_cubes) or (
            abs(count - target_cubes) == abs(best_count - target_cubes)
            and count > best_count
        )
        if better:
            best_edge, best_count = mid, count
        if band_lo <= count <= band_hi:
            best_edge = mid
            break
        if count < band_lo:  # too few cubes: shrink cells
            hi = mid
        else:  # too many cubes: grow cells
            lo = mid
    cubes, cells = _build_cubes(frame, origin, best_edge)
    return CubeSet(frame.frame_id, cubes, boundary_epoch, best_edge, origin, cells)


def _prev_cells_of(prev: CubeSet) -> np.ndarray:
    if prev.point_cells is not None:
        return prev.point_cells
    n = sum(c.num_points for c in prev.cubes)
    cells = np.empty((n, 3), dtype=np.int64)
    for cube in prev.cubes:
        cells[cube.point_indices] = cube.id
    return cells


def membership_change_fraction(prev: CubeSet, frame: PointCloudFrame) -> float:
    """Fraction of points whose grid cell under ``prev``'s boundaries
    differs from their assignment in ``prev``. Index-aligned; a point-count
    change counts as total change."""
    prev_cells = _prev_cells_of(prev)
    if frame.num_points != len(prev_cells):
        return 1.0
    if frame.num_points == 0:
        return 0.0
    now_cells = _cells_for(frame.positions, prev.grid_origin, prev.grid_edge)
    changed = np.any(now_cells != prev_cells, axis=1)
    return float(changed.mean())


def reuse_or_repartition(
    prev: CubeSet,
    frame: PointCloudFrame,
    cfg: PartitionConfig = PartitionConfig(),
) -> CubeSet:
    """Keep the previous grid when the scene is stable, else re-partition.

    Reuse keeps boundaries (origin, edge) and the boundary epoch but
    reassigns point indices; a re-partition re-tunes the grid and
    increments the epoch.
    """
    cfg.validate()
    if frame.num_points == 0:
        return CubeSet(frame.frame_id, [], prev.boundary_epoch, prev.grid_edge, prev.grid_origin)
    prev_cells = _prev_cells_of(prev)
    now_cells = None
    if frame.num_points != len(prev_cells):
        fraction = 1.0
    else:
        now_cells = _cells_for(frame.positions, prev.grid_origin, prev.grid_edge)
        fraction = float(np.any(now_cells != prev_cells, axis=1).mean())
    if fraction <= cfg.change_threshold:
        cubes, cells = _build_cubes(frame, prev.grid_origin, prev.grid_edge, cells=now_cells)
        return CubeSet(
            frame.frame_id, cubes, prev.boundary_epoch, prev.grid_edge, prev.grid_origin, cells
        )
    return partition_frame(frame, cfg.target_cubes, boundary_epoch=prev.boundary_epoch + 1)
