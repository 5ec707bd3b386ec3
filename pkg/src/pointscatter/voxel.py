"""Sparse voxelization of scatter clouds and dense-grid bookkeeping.

Voxel indices are ``floor((p - origin) / voxel_size)`` per axis. Sparse
storage is a hash map keyed on the three indices packed into one signed
63-bit integer (21 bits per axis), so grids spanning about +/- a million
cells per axis are representable. Dense grids are never materialized;
only their cell counts and lazily generated cell centers exist, which is
what makes the sparse/dense memory comparison honest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .scatter import ScatterCloud

_BITS = 21
_OFFSET = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1
INDEX_RANGE = (-_OFFSET, _OFFSET - 1)


def pack_index(ix: int, iy: int, iz: int) -> int:
    """Pack three signed 21-bit voxel indices into one integer key."""
    for v in (ix, iy, iz):
        if not INDEX_RANGE[0] <= v <= INDEX_RANGE[1]:
            raise ValueError(f"voxel index {v} outside {INDEX_RANGE}")
    return ((ix + _OFFSET) << (2 * _BITS)) | ((iy + _OFFSET) << _BITS) | (iz + _OFFSET)


def unpack_index(key: int) -> tuple[int, int, int]:
    ix = ((key >> (2 * _BITS)) & _MASK) - _OFFSET
    iy = ((key >> _BITS) & _MASK) - _OFFSET
    iz = (key & _MASK) - _OFFSET
    return ix, iy, iz


def voxel_indices(points: np.ndarray, voxel_size: float, origin) -> np.ndarray:
    """(N, 3) integer voxel indices of points; floor semantics."""
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    return np.floor((p - o) / voxel_size).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SparseVoxelGrid:
    """Occupied voxels only: parallel arrays plus a key -> row hash map."""

    voxel_size: float
    origin: np.ndarray
    keys: np.ndarray
    counts: np.ndarray
    features: np.ndarray | None
    scores: np.ndarray | None
    cells: dict[int, int]

    def __len__(self) -> int:
        return len(self.keys)

    def indices(self) -> np.ndarray:
        return np.array([unpack_index(int(k)) for k in self.keys], dtype=np.int64).reshape(-1, 3)

    def centers(self) -> np.ndarray:
        return self.origin + (self.indices() + 0.5) * self.voxel_size

    def row(self, ix: int, iy: int, iz: int) -> int | None:
        return self.cells.get(pack_index(ix, iy, iz))


def voxelize(
    cloud: ScatterCloud,
    voxel_size: float,
    origin=(0.0, 0.0, 0.0),
    pooling: str = "mean",
) -> SparseVoxelGrid:
    """Pool a scatter cloud into occupied voxels.

    ``pooling`` is "mean" (default) or "max" and applies to both the
    feature rows and the scores, when present. Output rows are ordered
    by ascending packed key, which makes the result independent of the
    input point order up to float summation.
    """
    if pooling not in ("mean", "max"):
        raise ValueError(f"unknown pooling {pooling!r}")
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    idx = voxel_indices(cloud.positions, voxel_size, o)
    if len(idx) == 0:
        return SparseVoxelGrid(voxel_size, o, np.zeros(0, np.int64), np.zeros(0, np.int64), None, None, {})
    lo, hi = INDEX_RANGE
    if idx.min() < lo or idx.max() > hi:
        raise ValueError("points fall outside the packable index range")
    packed = (
        ((idx[:, 0] + _OFFSET).astype(np.int64) << (2 * _BITS))
        | ((idx[:, 1] + _OFFSET).astype(np.int64) << _BITS)
        | (idx[:, 2] + _OFFSET).astype(np.int64)
    )
    keys, inverse, counts = np.unique(packed, return_inverse=True, return_counts=True)

    def pool(values: np.ndarray) -> np.ndarray:
        cols = values if values.ndim == 2 else values[:, None]
        if pooling == "mean":
            acc = np.zeros((len(keys), cols.shape[1]))
            np.add.at(acc, inverse, cols)
            acc /= counts[:, None]
        else:
            acc = np.full((len(keys), cols.shape[1]), -np.inf)
            np.maximum.at(acc, inverse, cols)
        return acc if values.ndim == 2 else acc[:, 0]

    features = pool(cloud.features) if cloud.features is not None else None
    scores = pool(cloud.scores) if cloud.scores is not None else None
    cells = {int(k): i for i, k in enumerate(keys)}
    return SparseVoxelGrid(
        voxel_size=float(voxel_size),
        origin=o,
        keys=keys,
        counts=counts.astype(np.int64),
        features=features,
        scores=scores,
        cells=cells,
    )


@dataclass(frozen=True)
class DenseGridSpec:
    """Axis-aligned dense grid over ``[origin, origin + extent)``."""

    origin: tuple[float, float, float]
    extent: tuple[float, float, float]
    voxel_size: float

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if any(e <= 0 for e in self.extent):
            raise ValueError("extent must be positive per axis")

    @property
    def cells_per_axis(self) -> tuple[int, int, int]:
        return tuple(int(np.ceil(e / self.voxel_size)) for e in self.extent)

    @property
    def cell_count(self) -> int:
        nx, ny, nz = self.cells_per_axis
        return nx * ny * nz


def dense_grid_points(spec: DenseGridSpec) -> Iterator[np.ndarray]:
    """Lazily yield every dense cell center, x fastest, then y, then z."""
    nx, ny, nz = spec.cells_per_axis
    o = np.asarray(spec.origin, dtype=np.float64)
    s = spec.voxel_size
    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                yield o + (np.array([ix, iy, iz]) + 0.5) * s


# Byte model used by the sparsity report, documented in its output:
# a scatter record stores a float32 position (12 B), float32 features
# (4 B per channel) and 12 B of bookkeeping (frame id, category, score);
# a dense cell stores features only, its position being implicit.
_POSITION_BYTES = 12
_BOOKKEEPING_BYTES = 12


def sparsity_report(cloud: ScatterCloud, grid: SparseVoxelGrid, dense: DenseGridSpec) -> dict:
    """Compare scattered storage against a dense grid of the same region."""
    channels = 0 if cloud.features is None else cloud.features.shape[1]
    n = len(cloud)
    record = _POSITION_BYTES + 4 * channels + _BOOKKEEPING_BYTES
    dense_record = max(4 * channels, 4)
    return {
        "scatter_points": n,
        "occupied_voxels": len(grid),
        "dense_cells": dense.cell_count,
        "reduction_factor": dense.cell_count / max(1, n),
        "bytes_scatter": n * record,
        "bytes_dense": dense.cell_count * dense_record,
        "record_bytes": {
            "scatter_position": _POSITION_BYTES,
            "scatter_features": 4 * channels,
            "scatter_bookkeeping": _BOOKKEEPING_BYTES,
            "dense_cell": dense_record,
        },
        "voxel_size": grid.voxel_size,
        "dense_voxel_size": dense.voxel_size,
    }
