"""Point-cloud container, file loaders and simple geometric utilities.

Coordinates are held in float64 arrays. Values loaded from KITTI-style
``.bin`` files are exact float32 values widened to float64, so
``write_kitti_bin`` can reproduce the original bytes.

Random subsampling uses numpy's ``Philox`` (Philox4x64-10, counter based)
keyed directly with the caller's seed. Only the raw 64-bit output stream
is consumed, so results do not depend on numpy's distribution code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import InvalidArgument, InvalidTransform, MalformedFile

PathLike = Union[str, Path]

_KITTI_DTYPE = np.dtype("<f4")
_KITTI_RECORD = 16


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Immutable ordered point set.

    ``xyz`` is ``(count, 3)`` float64 in meters. ``intensity`` is either
    ``None`` (dims=3) or a ``(count,)`` array (dims=4).
    """

    xyz: np.ndarray
    intensity: Optional[np.ndarray] = None
    frame_id: str = "sensor"

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.isfinite(xyz).all():
            bad = int(np.flatnonzero(~np.isfinite(xyz).all(axis=1))[0])
            raise InvalidArgument(f"non-finite coordinate at point {bad}")
        object.__setattr__(self, "xyz", _readonly(xyz))
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64, copy=True).reshape(-1)
            if inten.shape[0] != xyz.shape[0]:
                raise InvalidArgument("intensity length does not match point count")
            if not np.isfinite(inten).all():
                raise InvalidArgument("non-finite intensity")
            object.__setattr__(self, "intensity", _readonly(inten))

    @property
    def count(self) -> int:
        return self.xyz.shape[0]

    @property
    def dims(self) -> int:
        return 3 if self.intensity is None else 4

    def __len__(self) -> int:
        return self.count

    def points(self, with_intensity: bool = True) -> np.ndarray:
        """Return an ``(count, M)`` float64 array."""
        if with_intensity and self.intensity is not None:
            return np.column_stack([self.xyz, self.intensity])
        return np.array(self.xyz)

    def take(self, idx: np.ndarray) -> "PointCloud":
        idx = np.asarray(idx, dtype=np.int64)
        inten = None if self.intensity is None else self.intensity[idx]
        return PointCloud(self.xyz[idx], inten, self.frame_id)

    @classmethod
    def from_array(cls, arr: np.ndarray, frame_id: str = "sensor") -> "PointCloud":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            raise InvalidArgument(f"expected (n, 3) or (n, 4) array, got {arr.shape}")
        inten = arr[:, 3] if arr.shape[1] == 4 else None
        return cls(arr[:, :3], inten, frame_id)


def load_kitti_bin(path: PathLike, frame_id: str = "sensor") -> PointCloud:
    """Read packed little-endian float32 ``(x, y, z, intensity)`` records."""
    raw = Path(path).read_bytes()
    if len(raw) % _KITTI_RECORD:
        raise MalformedFile(f"{path}: length {len(raw)} is not a multiple of {_KITTI_RECORD}")
    arr = np.frombuffer(raw, dtype=_KITTI_DTYPE).reshape(-1, 4)
    finite = np.isfinite(arr).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise MalformedFile(f"{path}: non-finite value in point {bad}")
    return PointCloud(arr[:, :3].astype(np.float64), arr[:, 3].astype(np.float64), frame_id)


def write_kitti_bin(cloud: PointCloud, path: PathLike) -> None:
    """Inverse of :func:`load_kitti_bin`. Missing intensity is written as 0."""
    inten = cloud.intensity if cloud.intensity is not None else np.zeros(cloud.count)
    arr = np.column_stack([cloud.xyz, inten]).astype(_KITTI_DTYPE)
    Path(path).write_bytes(arr.tobytes())


def load_xyz_csv(path: PathLike, frame_id: str = "sensor") -> PointCloud:
    rows = []
    arity = None
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) not in (3, 4):
            raise MalformedFile(f"{path}:{lineno}: expected 3 or 4 values, got {len(parts)}")
        if arity is None:
            arity = len(parts)
        elif len(parts) != arity:
            raise MalformedFile(f"{path}:{lineno}: mixed arity ({len(parts)} vs {arity})")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise MalformedFile(f"{path}:{lineno}: unparsable number") from None
        if not all(math.isfinite(v) for v in vals):
            raise MalformedFile(f"{path}:{lineno}: non-finite value")
        rows.append(vals)
    if not rows:
        return PointCloud(np.zeros((0, 3)), None, frame_id)
    return PointCloud.from_array(np.array(rows, dtype=np.float64), frame_id)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise InvalidTransform("non-finite transform")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise InvalidTransform("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidTransform("rotation determinant is not +1")
        object.__setattr__(self, "rotation", _readonly(r))
        object.__setattr__(self, "translation", _readonly(t))

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = math.cos(yaw), math.sin(yaw)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def is_identity(self) -> bool:
        return bool((self.rotation == np.eye(3)).all() and (self.translation == 0).all())


def transform(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    """Apply ``rotation @ p + translation`` to every point."""
    if not isinstance(t, RigidTransform):
        raise InvalidTransform(f"expected RigidTransform, got {type(t).__name__}")
    if t.is_identity():
        return cloud
    xyz = cloud.xyz @ t.rotation.T + t.translation
    return PointCloud(xyz, cloud.intensity, cloud.frame_id)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def philox_raw(seed: int, n: int) -> np.ndarray:
    """First ``n`` raw 64-bit outputs of Philox4x64-10 keyed by ``seed``."""
    bg = np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF)
    return bg.random_raw(n) if n else np.zeros(0, dtype=np.uint64)


def subsample_indices(count: int, keep_fraction: float, seed: int) -> np.ndarray:
    """Sorted indices of a uniform sample without replacement.

    Each point draws one Philox word; the ``round(keep_fraction * count)``
    smallest words (ties broken by index) are kept.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise InvalidArgument(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    k = round_half_up(keep_fraction * count)
    if k >= count:
        return np.arange(count, dtype=np.int64)
    keys = philox_raw(seed, count)
    chosen = np.argsort(keys, kind="stable")[:k]
    return np.sort(chosen)


def subsample(cloud: PointCloud, keep_fraction: float, seed: int) -> PointCloud:
    idx = subsample_indices(cloud.count, keep_fraction, seed)
    if idx.shape[0] == cloud.count:
        return cloud
    return cloud.take(idx)
