"""Sparse voxelization.

Voxels are half-open boxes ``[min + i*size, min + (i+1)*size)``. Only
occupied voxels are materialized; they are stored in ascending
``(ix, iy, iz)`` order in CSR form (``offsets`` into ``indices``).
Member lists hold original point indices in ascending order and are
truncated to the first ``max_points`` members.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_io import PointCloud
from .errors import InvalidArgument

_MAX_EXTENT = 2**31 - 1


def _extent(lo: float, hi: float, size: float) -> int:
    n = (hi - lo) / size
    r = round(n)
    if abs(n - r) < 1e-6 * max(1.0, n):
        return int(r)
    return int(math.ceil(n))


@dataclass(frozen=True)
class GridSpec:
    range_min: tuple
    range_max: tuple
    voxel_size: tuple
    max_points: int = 5

    def __post_init__(self):
        lo = tuple(float(v) for v in self.range_min)
        hi = tuple(float(v) for v in self.range_max)
        vs = tuple(float(v) for v in self.voxel_size)
        if not (len(lo) == len(hi) == len(vs) == 3):
            raise InvalidArgument("range_min, range_max and voxel_size need 3 components")
        if not all(a < b for a, b in zip(lo, hi)):
            raise InvalidArgument("range_min must be < range_max componentwise")
        if not all(v > 0 for v in vs):
            raise InvalidArgument("voxel_size must be positive")
        if int(self.max_points) < 1:
            raise InvalidArgument("max_points must be >= 1")
        object.__setattr__(self, "range_min", lo)
        object.__setattr__(self, "range_max", hi)
        object.__setattr__(self, "voxel_size", vs)
        object.__setattr__(self, "max_points", int(self.max_points))
        if any(e > _MAX_EXTENT for e in self.extents):
            raise InvalidArgument(f"grid extents {self.extents} exceed 32-bit indices")

    @classmethod
    def from_range(cls, rng, voxel, max_points: int = 5) -> "GridSpec":
        """Build from a 6-tuple ``(xmin, ymin, zmin, xmax, ymax, zmax)``."""
        rng = [float(v) for v in rng]
        if len(rng) != 6:
            raise InvalidArgument("range needs 6 values")
        return cls(tuple(rng[:3]), tuple(rng[3:]), tuple(voxel), max_points)

    @property
    def extents(self) -> tuple:
        return tuple(_extent(a, b, s) for a, b, s in zip(self.range_min, self.range_max, self.voxel_size))

    def shifted(self, offset) -> "GridSpec":
        off = np.broadcast_to(np.asarray(offset, dtype=np.float64), (3,))
        return GridSpec(
            tuple(np.add(self.range_min, off)),
            tuple(np.add(self.range_max, off)),
            self.voxel_size,
            self.max_points,
        )

    def with_voxel(self, voxel_size) -> "GridSpec":
        return GridSpec(self.range_min, self.range_max, tuple(voxel_size), self.max_points)

    def voxel_centers(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(self.range_min) + (coords + 0.5) * np.asarray(self.voxel_size)

    def to_dict(self) -> dict:
        return {
            "range": list(self.range_min) + list(self.range_max),
            "voxel": list(self.voxel_size),
            "max_points": self.max_points,
        }


def voxel_index(p, spec: GridSpec) -> Optional[tuple]:
    """Voxel coordinate of a single point, or ``None`` when out of range."""
    p = np.asarray(p, dtype=np.float64)[:3]
    lo = np.asarray(spec.range_min)
    hi = np.asarray(spec.range_max)
    if not ((p >= lo).all() and (p < hi).all()):
        return None
    idx = np.floor((p - lo) / np.asarray(spec.voxel_size)).astype(np.int64)
    idx = np.minimum(idx, np.asarray(spec.extents) - 1)
    return tuple(int(i) for i in idx)


@dataclass(frozen=True)
class VoxelSet:
    spec: GridSpec
    coords: np.ndarray  # (V, 3) int64, ascending lexicographic
    offsets: np.ndarray  # (V + 1,) int64
    indices: np.ndarray  # member point indices, grouped by voxel
    source_count: int
    dropped: int  # out-of-range points
    truncated: int  # in-range points removed by the max_points cap

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def voxels(self) -> dict:
        return {
            tuple(int(c) for c in self.coords[v]): self.indices[self.offsets[v]:self.offsets[v + 1]].tolist()
            for v in range(len(self))
        }

    def members(self, v: int) -> np.ndarray:
        return self.indices[self.offsets[v]:self.offsets[v + 1]]


def _chunks(n: int, parts: int):
    bounds = np.linspace(0, n, parts + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def point_keys(xyz: np.ndarray, spec: GridSpec):
    """Vectorized ``voxel_index``: positions of in-range points and their voxel indices."""
    lo = np.asarray(spec.range_min)
    hi = np.asarray(spec.range_max)
    sel = np.flatnonzero(((xyz >= lo) & (xyz < hi)).all(axis=1))
    idx = np.floor((xyz[sel] - lo) / np.asarray(spec.voxel_size)).astype(np.int64)
    np.minimum(idx, np.asarray(spec.extents, dtype=np.int64) - 1, out=idx)
    return sel, idx


def voxelize(cloud: PointCloud, spec: GridSpec, threads: int = 1) -> VoxelSet:
    """Group in-range points by voxel.

    The output is ordered by ``(voxel coordinate, point index)``, a strict
    total order, so it does not depend on ``threads``.
    """
    xyz = cloud.xyz
    n = xyz.shape[0]
    nx, ny, nz = spec.extents
    packable = nx * ny * nz < 2**62
    parts = max(1, min(int(threads), n // 4096 or 1))

    def keys_for(bounds):
        a, b = bounds
        sel, idx = point_keys(xyz[a:b], spec)
        if packable:
            key = (idx[:, 0] * ny + idx[:, 1]) * nz + idx[:, 2]
            order = np.argsort(key, kind="stable")
        else:
            key = idx
            order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        return key[order], idx[order], sel[order] + a

    pieces = _map(keys_for, _chunks(n, parts), parts)
    key = np.concatenate([p[0] for p in pieces]) if pieces else np.zeros(0, np.int64)
    vidx = np.concatenate([p[1] for p in pieces]).reshape(-1, 3) if pieces else np.zeros((0, 3), np.int64)
    pidx = np.concatenate([p[2] for p in pieces]) if pieces else np.zeros(0, np.int64)
    if len(pieces) > 1:
        # each piece is sorted by (key, index) and pieces are in index order,
        # so a stable merge reproduces the single-threaded order
        if packable:
            order = np.argsort(key, kind="stable")
        else:
            order = np.lexsort((vidx[:, 2], vidx[:, 1], vidx[:, 0]))
        key, vidx, pidx = key[order], vidx[order], pidx[order]

    in_range = pidx.shape[0]
    if in_range == 0:
        return VoxelSet(spec, np.zeros((0, 3), np.int64), np.zeros(1, np.int64),
                        np.zeros(0, np.int64), n, n, 0)

    if packable:
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    else:
        starts = np.flatnonzero(np.r_[True, (vidx[1:] != vidx[:-1]).any(axis=1)])
    group_len = np.diff(np.r_[starts, in_range])
    rank = np.arange(in_range) - np.repeat(starts, group_len)
    keep = rank < spec.max_points
    kept_len = np.minimum(group_len, spec.max_points)
    offsets = np.zeros(starts.shape[0] + 1, dtype=np.int64)
    np.cumsum(kept_len, out=offsets[1:])
    return VoxelSet(
        spec=spec,
        coords=vidx[starts],
        offsets=offsets,
        indices=pidx[keep],
        source_count=n,
        dropped=n - in_range,
        truncated=int(in_range - keep.sum()),
    )


def occupancy_histogram(vs: VoxelSet) -> dict:
    """Map from member count to the number of voxels with that count."""
    return dict(sorted(Counter(vs.counts.tolist()).items()))


def sparse_fraction(hist: dict, at_most: int = 2) -> float:
    """Fraction of voxels holding ``at_most`` points or fewer."""
    total = sum(hist.values())
    if total == 0:
        return 0.0
    return sum(c for k, c in hist.items() if k <= at_most) / total
