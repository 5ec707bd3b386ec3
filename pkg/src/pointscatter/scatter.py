"""Depth-map point scattering with stride sampling and radius dedup.

Points are back-projected from strided pixels inside GT 2D boxes. The
pixel stride adapts to object distance (``round(f * radius / depth)``)
so the world-space spacing of fresh samples roughly matches ``radius``;
a uniform spatial hash grid then discards any candidate closer than
``radius`` to a point accepted earlier (in this or any previous frame).
Acceptance order is deterministic: frames in call order, boxes in frame
order, pixels in raster order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .camera import backproject_pixels
from .scene import CameraFrame


@dataclass(frozen=True)
class ScatterConfig:
    radius: float = 0.04
    max_points: int = 100_000
    rng_seed: int = 0
    # dedup distance defaults to the sampling radius; override to decouple
    dedup_radius: float | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.max_points < 1:
            raise ValueError(f"max_points must be positive, got {self.max_points}")
        if self.dedup_radius is not None and self.dedup_radius <= 0:
            raise ValueError("dedup_radius must be positive when given")

    @property
    def effective_dedup_radius(self) -> float:
        return self.radius if self.dedup_radius is None else self.dedup_radius


@dataclass(frozen=True, eq=False)
class ScatterCloud:
    """Scattered points with per-point provenance and optional features.

    ``positions`` (N, 3); ``frame_ids`` the source frame of each point;
    ``pixels`` (N, 2) the source pixel (u, v); ``categories`` the
    category of the 2D box each point was sampled from. ``features`` and
    ``scores`` start as None and are attached by later stages.
    """

    positions: np.ndarray
    frame_ids: np.ndarray
    pixels: np.ndarray
    categories: np.ndarray
    features: np.ndarray | None = None
    scores: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.positions)

    def select(self, indices) -> "ScatterCloud":
        """Row subset, preserving order of ``indices``, all columns."""
        idx = np.asarray(indices)
        return ScatterCloud(
            positions=self.positions[idx],
            frame_ids=self.frame_ids[idx],
            pixels=self.pixels[idx],
            categories=self.categories[idx],
            features=None if self.features is None else self.features[idx],
            scores=None if self.scores is None else self.scores[idx],
        )

    def with_features(self, features: np.ndarray) -> "ScatterCloud":
        if len(features) != len(self):
            raise ValueError("feature rows must match point count")
        return replace(self, features=np.asarray(features, dtype=np.float64))

    def with_scores(self, scores: np.ndarray) -> "ScatterCloud":
        if len(scores) != len(self):
            raise ValueError("score rows must match point count")
        return replace(self, scores=np.asarray(scores, dtype=np.float64))


def empty_cloud() -> ScatterCloud:
    return ScatterCloud(
        positions=np.zeros((0, 3)),
        frame_ids=np.zeros(0, dtype=np.int64),
        pixels=np.zeros((0, 2)),
        categories=np.zeros(0, dtype=np.int64),
    )


class SpatialHashGrid:
    """Uniform hash grid for fixed-radius neighbor rejection.

    Cell edge equals the query radius, so any neighbor within the radius
    lies in the 3x3x3 block of cells around the query point and the scan
    is exact. Not thread-safe; callers serialize inserts.
    """

    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self._cells: dict[tuple[int, int, int], list[int]] = {}
        self._points: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._points)

    def _key(self, point) -> tuple[int, int, int]:
        return (
            math.floor(point[0] / self.radius),
            math.floor(point[1] / self.radius),
            math.floor(point[2] / self.radius),
        )

    def insert(self, point) -> None:
        p = np.asarray(point, dtype=np.float64)
        self._cells.setdefault(self._key(p), []).append(len(self._points))
        self._points.append(p)

    def has_neighbor_within(self, point, radius: float | None = None) -> bool:
        """True if any stored point is strictly closer than ``radius``.

        ``radius`` must not exceed the grid's cell edge or the 27-cell
        scan would miss neighbors.
        """
        r = self.radius if radius is None else float(radius)
        if r > self.radius:
            raise ValueError("query radius exceeds grid cell size")
        p = np.asarray(point, dtype=np.float64)
        kx, ky, kz = self._key(p)
        r2 = r * r
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    bucket = self._cells.get((kx + dx, ky + dy, kz + dz))
                    if not bucket:
                        continue
                    for idx in bucket:
                        q = self._points[idx]
                        d2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2
                        if d2 < r2:
                            return True
        return False


def box_sampling_stride(focal: float, radius: float, median_depth: float) -> int:
    """Pixel stride whose back-projected spacing is about ``radius``.

    ``max(1, round(focal * radius / median_depth))``; distant objects get
    stride 1 (every pixel), near objects are thinned.
    """
    if focal <= 0 or radius <= 0 or median_depth <= 0:
        raise ValueError("focal, radius and median_depth must be positive")
    return max(1, round(focal * radius / median_depth))


class ScatterAccumulator:
    """Grows a scatter cloud frame by frame with radius dedup.

    Calls to :meth:`add_frame` must be serialized; the spatial index is
    shared across frames and candidates are checked against every point
    accepted before them, including earlier points of the same frame.
    """

    def __init__(self, config: ScatterConfig):
        self.config = config
        self._grid = SpatialHashGrid(config.effective_dedup_radius)
        self._positions: list[np.ndarray] = []
        self._frame_ids: list[int] = []
        self._pixels: list[tuple[float, float]] = []
        self._categories: list[int] = []

    def __len__(self) -> int:
        return len(self._positions)

    def add_frame(self, frame: CameraFrame, frame_index: int | None = None) -> int:
        """Scatter one frame; returns the number of accepted points."""
        fid = frame.camera_index if frame_index is None else frame_index
        depth = frame.depth
        intr = frame.intrinsics
        accepted = 0
        for box in frame.boxes_2d:
            u0 = max(0, math.ceil(box.u_min))
            v0 = max(0, math.ceil(box.v_min))
            u1 = min(intr.width - 1, math.floor(box.u_max))
            v1 = min(intr.height - 1, math.floor(box.v_max))
            if u1 < u0 or v1 < v0:
                continue
            region = depth[v0 : v1 + 1, u0 : u1 + 1]
            valid = region > 0
            if not valid.any():
                continue
            stride = box_sampling_stride(intr.fx, self.config.radius, float(np.median(region[valid])))
            vs = np.arange(v0, v1 + 1, stride)
            us = np.arange(u0, u1 + 1, stride)
            uu, vv = np.meshgrid(us, vs)
            uu = uu.reshape(-1)
            vv = vv.reshape(-1)
            dd = depth[vv, uu]
            keep = dd > 0
            uu, vv, dd = uu[keep], vv[keep], dd[keep]
            if len(dd) == 0:
                continue
            world = backproject_pixels(uu.astype(np.float64), vv.astype(np.float64), dd, intr, frame.pose)
            for i in range(len(world)):
                p = world[i]
                if self._grid.has_neighbor_within(p):
                    continue
                self._grid.insert(p)
                self._positions.append(p)
                self._frame_ids.append(fid)
                self._pixels.append((float(uu[i]), float(vv[i])))
                self._categories.append(box.category)
                accepted += 1
        return accepted

    def cloud(self) -> ScatterCloud:
        if not self._positions:
            return empty_cloud()
        return ScatterCloud(
            positions=np.array(self._positions),
            frame_ids=np.array(self._frame_ids, dtype=np.int64),
            pixels=np.array(self._pixels),
            categories=np.array(self._categories, dtype=np.int64),
        )


def scatter_frames(frames, config: ScatterConfig) -> ScatterCloud:
    """Scatter a frame sequence in order and return the combined cloud."""
    acc = ScatterAccumulator(config)
    for frame in frames:
        acc.add_frame(frame)
    return acc.cloud()


def cap_points(cloud: ScatterCloud, max_points: int, rng: np.random.Generator) -> ScatterCloud:
    """Uniform random subsample to at most ``max_points`` points.

    Selected rows keep their original relative order, so capping an
    already-capped cloud with any seed is the identity.
    """
    if max_points < 1:
        raise ValueError("max_points must be positive")
    if len(cloud) <= max_points:
        return cloud
    idx = np.sort(rng.choice(len(cloud), size=max_points, replace=False))
    return cloud.select(idx)
