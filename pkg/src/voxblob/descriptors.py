"""Per-neighborhood feature encoders.

Two code paths exist on purpose. The scalar functions
(``neighborhood_mean``, ``neighborhood_cov``, ``gaussian_blob`` ...) act on
one neighborhood and are written for clarity. ``encode_voxels`` computes
the same quantities for every voxel at once with segment reductions; tests
check that the two agree.

Column layout of each kind, for point dimension ``M``:

===============  =====================  =====================================
kind             width                  content
===============  =====================  =====================================
global_mean      M                      voxel mean in sensor coordinates
d                M                      local-frame mean (see ``d_mode``)
sigma            M*M (or M(M+1)/2)      covariance, row-major (or upper tri)
gblobs           M + M*M                ``d`` followed by ``sigma``
rel_distance     2M                     mean and max of ``|p - mu|``
surface_normal   4                      unit normal (toward sensor), curvature
===============  =====================  =====================================
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core_io import PointCloud
from .errors import EmptyNeighborhood, InvalidArgument
from .voxelgrid import GridSpec, VoxelSet, voxelize

KINDS = ("global_mean", "d", "sigma", "gblobs", "rel_distance", "surface_normal")
D_MODES = ("literal", "padded", "voxel_center")

# intensity coordinate of a voxel "center" in voxel_center mode
_INTENSITY_CENTER = 0.5


def _as_points(pts) -> np.ndarray:
    a = np.asarray(pts, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.shape[0] == 0:
        raise EmptyNeighborhood("neighborhood has no points")
    return a


def neighborhood_mean(pts) -> np.ndarray:
    a = _as_points(pts)
    return a.sum(axis=0) / a.shape[0]


def neighborhood_cov(pts) -> np.ndarray:
    """Population covariance ``(1/N) sum (p - mu)(p - mu)^T``, two-pass."""
    a = _as_points(pts)
    c = a - neighborhood_mean(a)
    return (c.T @ c) / a.shape[0]


@dataclass(frozen=True)
class GBlobDescriptor:
    d: np.ndarray
    sigma: np.ndarray

    @property
    def M(self) -> int:
        return self.d.shape[0]

    def flatten(self, compact: bool = False) -> np.ndarray:
        if compact:
            iu = np.triu_indices(self.M)
            return np.concatenate([self.d, self.sigma[iu]])
        return np.concatenate([self.d, self.sigma.reshape(-1)])


def gaussian_blob(pts, mode: str = "literal", center=None, capacity: Optional[int] = None) -> GBlobDescriptor:
    """Mean/covariance blob of one neighborhood.

    ``mode`` selects how the local-frame mean ``d`` is realized:

    * ``literal``: ``(1/N) sum (p_i - mu)``, analytically zero.
    * ``padded``: the same sum divided by ``capacity`` instead of ``N``, as a
      zero-padded buffer of ``capacity`` slots would produce.
    * ``voxel_center``: ``mu - center``.
    """
    a = _as_points(pts)
    n, m = a.shape
    mu = a.sum(axis=0) / n
    c = a - mu
    sigma = (c.T @ c) / n
    if mode == "literal":
        d = c.sum(axis=0) / n
    elif mode == "padded":
        if capacity is None:
            raise InvalidArgument("padded mode needs a capacity")
        if capacity < n:
            raise InvalidArgument(f"capacity {capacity} is smaller than {n} points")
        d = c.sum(axis=0) / capacity
    elif mode == "voxel_center":
        if center is None:
            raise InvalidArgument("voxel_center mode needs a center")
        ctr = np.asarray(center, dtype=np.float64)
        if ctr.shape[0] == m - 1:
            ctr = np.append(ctr, _INTENSITY_CENTER)
        d = mu - ctr
    else:
        raise InvalidArgument(f"unknown d mode {mode!r}")
    return GBlobDescriptor(d, sigma)


def rel_distance_descriptor(pts) -> np.ndarray:
    """Mean and componentwise max of the absolute offsets from the centroid."""
    a = _as_points(pts)
    off = np.abs(a - neighborhood_mean(a))
    return np.concatenate([off.sum(axis=0) / a.shape[0], off.max(axis=0)])


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so their largest-magnitude component is positive.

    ``vecs`` has shape ``(..., 3, 3)`` with eigenvectors in columns.
    """
    pick = np.argmax(np.abs(vecs), axis=-2)[..., None, :]
    s = np.where(np.take_along_axis(vecs, pick, axis=-2) < 0, -1.0, 1.0)
    return vecs * s


def eig_sym3(m) -> list:
    """Eigenpairs of a symmetric 3x3 matrix, eigenvalues ascending.

    Returns ``[(lambda, v), ...]`` with unit ``v``.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.shape != (3, 3):
        raise InvalidArgument(f"expected 3x3 matrix, got {a.shape}")
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    if np.abs(a - a.T).max() > 1e-9 * scale:
        raise InvalidArgument("matrix is not symmetric")
    w, v = eig_sym3_batch(a[None])
    return [(float(w[0, k]), v[0, :, k].copy()) for k in range(3)]


def eig_sym3_batch(mats: np.ndarray):
    """Vectorized ``eig_sym3``: ``(B, 3)`` eigenvalues, ``(B, 3, 3)`` column eigenvectors."""
    mats = np.asarray(mats, dtype=np.float64)
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    w, v = np.linalg.eigh(sym)
    return w, _sign_fix(v)


def _normals_from_cov(cov: np.ndarray, mu: np.ndarray, n: np.ndarray, origin: np.ndarray) -> np.ndarray:
    out = np.zeros((cov.shape[0], 4))
    out[:, 2] = 1.0
    ok = n >= 3
    if ok.any():
        w, v = eig_sym3_batch(cov[ok])
        normal = v[:, :, 0]
        flip = np.einsum("ij,ij->i", normal, origin - mu[ok]) < 0
        normal[flip] *= -1.0
        tr = w.sum(axis=1)
        curv = np.divide(w[:, 0], tr, out=np.zeros_like(tr), where=tr > 0)
        out[ok, :3] = normal
        out[ok, 3] = np.maximum(curv, 0.0)
    return out


def surface_normal_descriptor(pts, sensor_origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """``(nx, ny, nz, curvature)``. Fewer than 3 points gives ``(0, 0, 1, 0)``."""
    a = _as_points(pts)[:, :3]
    mu = neighborhood_mean(a)
    cov = neighborhood_cov(a)
    return _normals_from_cov(cov[None], mu[None], np.array([a.shape[0]]), np.asarray(sensor_origin, float))[0]


@dataclass(frozen=True)
class EncoderSpec:
    kinds: tuple = ("gblobs",)
    d_mode: str = "padded"
    include_intensity: bool = False
    compact_sigma: bool = False
    sensor_origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        kinds = (self.kinds,) if isinstance(self.kinds, str) else tuple(self.kinds)
        if not kinds:
            raise InvalidArgument("encoder needs at least one kind")
        for k in kinds:
            if k not in KINDS:
                raise InvalidArgument(f"unknown encoder kind {k!r}")
        if len(set(kinds)) != len(kinds):
            raise InvalidArgument("concatenated kinds must be distinct")
        if self.d_mode not in D_MODES:
            raise InvalidArgument(f"unknown d mode {self.d_mode!r}")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "sensor_origin", tuple(float(v) for v in self.sensor_origin))

    @classmethod
    def parse(cls, text: str, **kw) -> "EncoderSpec":
        """``"global_mean+gblobs"`` style names."""
        return cls(tuple(t.strip() for t in text.split("+")), **kw)

    @property
    def name(self) -> str:
        return "+".join(self.kinds)

    @property
    def M(self) -> int:
        return 4 if self.include_intensity else 3

    def kind_width(self, kind: str) -> int:
        m = self.M
        sig = m * (m + 1) // 2 if self.compact_sigma else m * m
        return {
            "global_mean": m,
            "d": m,
            "sigma": sig,
            "gblobs": m + sig,
            "rel_distance": 2 * m,
            "surface_normal": 4,
        }[kind]

    @property
    def width(self) -> int:
        return sum(self.kind_width(k) for k in self.kinds)

    def layout(self) -> dict:
        """Column slice of each kind within a row."""
        out, at = {}, 0
        for k in self.kinds:
            w = self.kind_width(k)
            out[k] = slice(at, at + w)
            at += w
        return out

    def to_dict(self) -> dict:
        return {
            "kinds": list(self.kinds),
            "d_mode": self.d_mode,
            "include_intensity": self.include_intensity,
            "compact_sigma": self.compact_sigma,
            "sensor_origin": list(self.sensor_origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(
            tuple(d["kinds"]),
            d.get("d_mode", "padded"),
            bool(d.get("include_intensity", False)),
            bool(d.get("compact_sigma", False)),
            tuple(d.get("sensor_origin", (0.0, 0.0, 0.0))),
        )


@dataclass
class FeatureSet:
    spec: EncoderSpec
    rows: np.ndarray  # (V, width)
    coords: np.ndarray  # (V, 3) voxel coordinates, ascending
    dropped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def columns(self, kind: str) -> np.ndarray:
        return self.rows[:, self.spec.layout()[kind]]


def _segment_rows(pts: np.ndarray, starts: np.ndarray, counts: np.ndarray, enc: EncoderSpec,
                  spec: GridSpec, coords: np.ndarray) -> np.ndarray:
    """Encoder rows for a contiguous run of voxels.

    ``pts`` holds the member points of these voxels, grouped, and ``starts``
    indexes into it. The result of a voxel depends only on its own members.
    """
    m = pts.shape[1]
    nv = counts.shape[0]
    nf = counts.astype(np.float64)[:, None]
    mu = np.add.reduceat(pts, starts, axis=0) / nf
    c = pts - np.repeat(mu, counts, axis=0)
    need = set(enc.kinds)
    parts = {}

    cov = None
    if need & {"sigma", "gblobs", "surface_normal"}:
        cov = np.empty((nv, m, m))
        for a in range(m):
            for b in range(a, m):
                s = np.add.reduceat(c[:, a] * c[:, b], starts) / nf[:, 0]
                cov[:, a, b] = s
                cov[:, b, a] = s
        if enc.compact_sigma:
            iu = np.triu_indices(m)
            sig = cov[:, iu[0], iu[1]]
        else:
            sig = cov.reshape(nv, m * m)
    if need & {"d", "gblobs"}:
        if enc.d_mode == "literal":
            d = np.add.reduceat(c, starts, axis=0) / nf
        elif enc.d_mode == "padded":
            d = np.add.reduceat(c, starts, axis=0) / float(spec.max_points)
        else:
            ctr = spec.voxel_centers(coords)
            if m == 4:
                ctr = np.column_stack([ctr, np.full(nv, _INTENSITY_CENTER)])
            d = mu - ctr
    for k in enc.kinds:
        if k == "global_mean":
            parts[k] = mu
        elif k == "d":
            parts[k] = d
        elif k == "sigma":
            parts[k] = sig
        elif k == "gblobs":
            parts[k] = np.hstack([d, sig])
        elif k == "rel_distance":
            off = np.abs(c)
            parts[k] = np.hstack([np.add.reduceat(off, starts, axis=0) / nf,
                                  np.maximum.reduceat(off, starts, axis=0)])
        elif k == "surface_normal":
            parts[k] = _normals_from_cov(cov[:, :3, :3], mu[:, :3], counts,
                                         np.asarray(enc.sensor_origin))
    return np.hstack([parts[k] for k in enc.kinds])


def encode_voxels(cloud: PointCloud, vs: VoxelSet, enc: EncoderSpec, threads: int = 1) -> FeatureSet:
    """Encode every voxel of ``vs``; row ``v`` belongs to ``vs.coords[v]``."""
    if enc.include_intensity and cloud.dims != 4:
        raise InvalidArgument("encoder wants intensity but cloud has dims=3")
    nv = len(vs)
    rows = np.zeros((nv, enc.width))
    if nv:
        pts = cloud.points(with_intensity=enc.include_intensity)[vs.indices]
        counts = vs.counts
        parts = max(1, min(int(threads), nv // 2048 or 1))
        bounds = np.linspace(0, nv, parts + 1).astype(np.int64)

        def work(j):
            a, b = int(bounds[j]), int(bounds[j + 1])
            lo, hi = vs.offsets[a], vs.offsets[b]
            rows[a:b] = _segment_rows(pts[lo:hi], vs.offsets[a:b] - lo, counts[a:b], enc,
                                      vs.spec, vs.coords[a:b])

        if parts == 1:
            work(0)
        else:
            with ThreadPoolExecutor(max_workers=parts) as ex:
                list(ex.map(work, range(parts)))
    return FeatureSet(enc, rows, vs.coords.copy(), vs.dropped)


def encode_cloud(cloud: PointCloud, spec: GridSpec, enc: EncoderSpec, threads: int = 1) -> FeatureSet:
    vs = voxelize(cloud, spec, threads=threads)
    fs = encode_voxels(cloud, vs, enc, threads=threads)
    fs.extra["voxelset"] = vs
    return fs
