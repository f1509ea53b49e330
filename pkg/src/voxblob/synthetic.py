"""Seeded generator of labeled synthetic scenes and domain-shift operators.

Objects are closed surface shells (no ray casting, no occlusion):

* ``car``: cuboid
* ``pedestrian``: vertical cylinder (size given as diameter, diameter, height)
* ``cyclist``: thin cuboid

Points are sampled uniformly over the full shell, so density is area
proportional. Every object draws from its own Philox stream derived from
``(seed, object index)``.

``apply_domain`` runs its steps in a fixed order:

1. density resampling: each object (and the ground) is redrawn with
   ``round(density_factor * n)`` points on the same surface
2. isotropic Gaussian noise with ``noise_sigma``
3. translation by ``(0, 0, z_offset)``
4. uniform subsampling with ``keep_fraction``
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core_io import PointCloud, round_half_up, subsample_indices, write_kitti_bin
from .errors import GenerationFailure, InvalidArgument

CLASSES = ("car", "pedestrian", "cyclist")
SHAPES = {"car": "cuboid", "pedestrian": "cylinder", "cyclist": "cuboid"}
GROUND_ID = -1
MAX_PLACEMENT_RETRIES = 200

# stream tags for SeedSequence derivation
_PLACEMENT, _OBJECT, _GROUND, _DOMAIN = 1, 2, 3, 4


def rng_for(*words: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(w) & 0xFFFFFFFF for w in words])))


def _check_keys(cls, d: dict) -> None:
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidArgument(f"unknown {cls.__name__} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class SceneSpec:
    n_objects: dict = field(default_factory=lambda: {"car": 2, "pedestrian": 2, "cyclist": 2})
    # per class: ((len_lo, len_hi), (wid_lo, wid_hi), (hgt_lo, hgt_hi)) in meters
    sizes: dict = field(default_factory=lambda: {
        "car": ((4.2, 4.8), (1.7, 1.9), (1.4, 1.6)),
        "pedestrian": ((0.5, 0.7), (0.5, 0.7), (1.6, 1.85)),
        "cyclist": ((1.6, 1.9), (0.5, 0.7), (1.6, 1.85)),
    })
    region: tuple = ((-30.0, 30.0), (-30.0, 30.0))
    # per-class placement ((x0, x1), (y0, y1)); classes not listed use `region`.
    # Default layout: road along x, then a bike lane, then a sidewalk.
    class_regions: dict = field(default_factory=lambda: {
        "car": ((-30.0, 30.0), (-7.0, 3.3)),
        "cyclist": ((-30.0, 30.0), (3.05, 6.35)),
        "pedestrian": ((-30.0, 30.0), (6.1, 14.0)),
    })
    # per-class yaw range (lo, hi) in radians; classes not listed get a full turn
    class_yaw: dict = field(default_factory=lambda: {"car": (-0.2, 0.2), "cyclist": (-0.2, 0.2)})
    world: tuple = ((-50.0, 50.0), (-50.0, 50.0))
    ground: bool = True
    ground_z: float = -1.73
    ground_density: float = 2.0  # points per m^2 over the placement region
    surface_density: float = 150.0  # points per m^2 of object surface
    noise_sigma: float = 0.01
    clearance: float = 0.5

    def __post_init__(self):
        for cls_name, n in self.n_objects.items():
            if cls_name not in CLASSES:
                raise InvalidArgument(f"unknown class {cls_name!r}")
            if int(n) < 0:
                raise InvalidArgument("object counts must be non-negative")
        for cls_name, rngs in self.sizes.items():
            for lo, hi in rngs:
                if not (0 < lo <= hi):
                    raise InvalidArgument(f"bad size range for {cls_name}: {(lo, hi)}")
        for reg in [self.region, *self.class_regions.values()]:
            for (a, b), (wa, wb) in zip(reg, self.world):
                if not (wa <= a < b <= wb):
                    raise InvalidArgument("placement regions must lie inside the world box")
        if self.surface_density <= 0 or self.ground_density < 0 or self.noise_sigma < 0:
            raise InvalidArgument("densities must be positive and noise non-negative")

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        _check_keys(cls, d)
        d = dict(d)
        if "sizes" in d:
            d["sizes"] = {k: tuple(tuple(r) for r in v) for k, v in d["sizes"].items()}
        for key in ("region", "world"):
            if key in d:
                d[key] = tuple(tuple(r) for r in d[key])
        if "class_yaw" in d:
            d["class_yaw"] = {k: tuple(v) for k, v in d["class_yaw"].items()}
        if "class_regions" in d:
            d["class_regions"] = {k: tuple(tuple(r) for r in v) for k, v in d["class_regions"].items()}
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class DomainSpec:
    z_offset: float = 0.0
    density_factor: float = 1.0
    keep_fraction: float = 1.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.density_factor > 0:
            raise InvalidArgument("density_factor must be > 0")
        if not (0 < self.keep_fraction <= 1):
            raise InvalidArgument("keep_fraction must be in (0, 1]")
        if self.noise_sigma < 0:
            raise InvalidArgument("noise_sigma must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        _check_keys(cls, d)
        return cls(**d)


# Named after sensor setups; the beam -> density mapping is a stand-in.
DOMAIN_PRESETS = {
    "dense-64-beam": DomainSpec(),
    "mid-40-beam": DomainSpec(density_factor=0.5),
    "sparse-32-beam": DomainSpec(density_factor=0.25),
    "shifted-origin": DomainSpec(z_offset=1.6),
}


def resolve_domain(d) -> DomainSpec:
    if isinstance(d, DomainSpec):
        return d
    if isinstance(d, str):
        try:
            return DOMAIN_PRESETS[d]
        except KeyError:
            raise InvalidArgument(f"unknown domain preset {d!r}") from None
    return DomainSpec.from_dict(d)


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    label: str
    center: tuple  # (x, y, z_bottom)
    size: tuple  # (length, width, height); cylinders use length as diameter
    yaw: float

    @property
    def shape(self) -> str:
        return SHAPES[self.label]

    def area(self) -> float:
        l, w, h = self.size
        if self.shape == "cylinder":
            r = l / 2
            return 2 * math.pi * r * h + 2 * math.pi * r * r
        return 2 * (l * w + l * h + w * h)

    def to_local(self, xyz: np.ndarray) -> np.ndarray:
        """Object frame: origin at the bottom center, x along the length."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        p = np.asarray(xyz, dtype=np.float64) - np.asarray(self.center)
        return np.column_stack([c * p[:, 0] + s * p[:, 1], -s * p[:, 0] + c * p[:, 1], p[:, 2]])

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        l, w, h = self.size
        if self.shape == "cylinder":
            local = _sample_cylinder(l / 2, h, n, rng)
        else:
            local = _sample_cuboid(l, w, h, n, rng)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        out = np.empty_like(local)
        out[:, 0] = c * local[:, 0] - s * local[:, 1] + self.center[0]
        out[:, 1] = s * local[:, 0] + c * local[:, 1] + self.center[1]
        out[:, 2] = local[:, 2] + self.center[2]
        return out


def _sample_cuboid(l, w, h, n, rng):
    # faces: +-x (w*h), +-y (l*h), +-z (l*w)
    areas = np.array([w * h, w * h, l * h, l * h, l * w, l * w])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.random((n, 2))
    p = np.empty((n, 3))
    half = np.array([l / 2, w / 2])
    x = (u[:, 0] - 0.5) * l
    y = (u[:, 1] - 0.5) * w
    zx = u[:, 1] * h
    # defaults for x faces, then overwrite per face group
    p[:, 0] = np.where(face == 0, half[0], -half[0])
    p[:, 1] = (u[:, 0] - 0.5) * w
    p[:, 2] = zx
    yf = (face == 2) | (face == 3)
    p[yf, 0] = x[yf]
    p[yf, 1] = np.where(face[yf] == 2, half[1], -half[1])
    p[yf, 2] = zx[yf]
    zf = face >= 4
    p[zf, 0] = x[zf]
    p[zf, 1] = y[zf]
    p[zf, 2] = np.where(face[zf] == 4, h, 0.0)
    return p


def _sample_cylinder(r, h, n, rng):
    side, cap = 2 * math.pi * r * h, math.pi * r * r
    part = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    u = rng.random((n, 2))
    theta = 2 * math.pi * u[:, 0]
    rad = np.where(part == 0, r, r * np.sqrt(u[:, 1]))
    z = np.where(part == 0, u[:, 1] * h, np.where(part == 1, h, 0.0))
    return np.column_stack([rad * np.cos(theta), rad * np.sin(theta), z])


@dataclass(frozen=True)
class LabeledCloud:
    cloud: PointCloud
    object_ids: np.ndarray  # per point, GROUND_ID for ground
    classes: dict  # object_id -> class label
    objects: tuple = ()  # geometry in the scene frame
    scene: Optional[SceneSpec] = None
    z_shift: float = 0.0  # accumulated z_offset applied since generation

    def __post_init__(self):
        ids = np.asarray(self.object_ids, dtype=np.int64)
        if ids.shape[0] != self.cloud.count:
            raise InvalidArgument("object_ids length must match point count")
        missing = set(np.unique(ids[ids != GROUND_ID]).tolist()) - set(self.classes)
        if missing:
            raise InvalidArgument(f"object ids without class: {sorted(missing)}")
        ids.setflags(write=False)
        object.__setattr__(self, "object_ids", ids)

    def class_histogram(self) -> dict:
        out = {c: 0 for c in CLASSES}
        for lab in self.classes.values():
            out[lab] += 1
        return out


def _place(spec: SceneSpec, seed: int) -> list:
    rng = rng_for(seed, _PLACEMENT)
    placed = []
    oid = 0
    for label in CLASSES:
        for _ in range(int(spec.n_objects.get(label, 0))):
            (l0, l1), (w0, w1), (h0, h1) = spec.sizes[label]
            l = rng.uniform(l0, l1)
            w = l if SHAPES[label] == "cylinder" else rng.uniform(w0, w1)
            h = rng.uniform(h0, h1)
            radius = 0.5 * math.hypot(l, w)
            (x0, x1), (y0, y1) = spec.class_regions.get(label, spec.region)
            for _attempt in range(MAX_PLACEMENT_RETRIES):
                x = rng.uniform(x0, x1)
                y = rng.uniform(y0, y1)
                if all(math.hypot(x - o.center[0], y - o.center[1]) >= radius + r + spec.clearance
                       for o, r in placed):
                    break
            else:
                raise GenerationFailure(
                    f"could not place {label} #{oid} after {MAX_PLACEMENT_RETRIES} attempts")
            yaw_lo, yaw_hi = spec.class_yaw.get(label, (-math.pi, math.pi))
            yaw = rng.uniform(yaw_lo, yaw_hi)
            obj = SceneObject(oid, label, (x, y, spec.ground_z), (l, w, h), yaw)
            placed.append((obj, radius))
            oid += 1
    return [o for o, _ in placed]


def _ground_points(spec: SceneSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    (x0, x1), (y0, y1) = spec.region
    u = rng.random((n, 2))
    return np.column_stack([x0 + u[:, 0] * (x1 - x0), y0 + u[:, 1] * (y1 - y0), np.full(n, spec.ground_z)])


def _ground_count(spec: SceneSpec) -> int:
    if not spec.ground:
        return 0
    (x0, x1), (y0, y1) = spec.region
    return round_half_up(spec.ground_density * (x1 - x0) * (y1 - y0))


def _assemble(spec, objects, counts, n_ground, seed, tag, noise, z_shift=0.0):
    chunks, ids = [], []
    for obj, n in zip(objects, counts):
        rng = rng_for(seed, tag, _OBJECT, obj.object_id)
        pts = obj.sample_surface(n, rng)
        if noise > 0:
            pts = pts + rng.normal(0.0, noise, pts.shape)
        chunks.append(pts)
        ids.append(np.full(n, obj.object_id))
    if n_ground:
        rng = rng_for(seed, tag, _GROUND)
        pts = _ground_points(spec, n_ground, rng)
        if noise > 0:
            pts = pts + rng.normal(0.0, noise, pts.shape)
        chunks.append(pts)
        ids.append(np.full(n_ground, GROUND_ID))
    xyz = np.concatenate(chunks) if chunks else np.zeros((0, 3))
    oid = np.concatenate(ids) if ids else np.zeros(0, np.int64)
    if z_shift != 0.0:
        xyz[:, 2] = xyz[:, 2] + z_shift
    return xyz, oid


def generate_scene(spec: SceneSpec, seed: int) -> LabeledCloud:
    """Place objects without overlap and sample their surfaces."""
    objects = _place(spec, seed)
    counts = [max(1, round_half_up(spec.surface_density * o.area())) for o in objects]
    xyz, oid = _assemble(spec, objects, counts, _ground_count(spec), seed, 0, spec.noise_sigma)
    return LabeledCloud(PointCloud(xyz), oid, {o.object_id: o.label for o in objects}, tuple(objects), spec)


def apply_domain(lc: LabeledCloud, dom: DomainSpec, seed: int) -> LabeledCloud:
    dom = resolve_domain(dom)
    xyz = lc.cloud.xyz
    oid = lc.object_ids
    objects = lc.objects
    if dom.density_factor != 1.0:
        if lc.scene is None:
            raise InvalidArgument("density resampling needs the scene geometry")
        spec = lc.scene
        counts = [round_half_up(dom.density_factor * int((oid == o.object_id).sum())) for o in objects]
        n_ground = round_half_up(dom.density_factor * int((oid == GROUND_ID).sum()))
        xyz, oid = _assemble(spec, objects, counts, n_ground, seed, _DOMAIN, spec.noise_sigma, lc.z_shift)
    if dom.noise_sigma > 0:
        xyz = xyz + rng_for(seed, _DOMAIN, 1).normal(0.0, dom.noise_sigma, xyz.shape)
    z_shift = lc.z_shift
    if dom.z_offset != 0.0:
        xyz = np.array(xyz)
        xyz[:, 2] = xyz[:, 2] + dom.z_offset
        z_shift += dom.z_offset
    inten = None
    if dom.keep_fraction < 1.0:
        keep = subsample_indices(xyz.shape[0], dom.keep_fraction, seed)
        xyz, oid = xyz[keep], oid[keep]
    if xyz is lc.cloud.xyz:
        cloud = lc.cloud
    else:
        cloud = PointCloud(xyz, inten, lc.cloud.frame_id)
    return LabeledCloud(cloud, oid, dict(lc.classes), objects, lc.scene, z_shift)


def write_dataset(out_dir, scenes: list, spec: SceneSpec, seed: int, domain: Optional[DomainSpec] = None) -> Path:
    """Write ``scene_XXXX.bin`` + ``scene_XXXX.labels.csv`` per scene and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, lc in enumerate(scenes):
        stem = f"scene_{i:04d}"
        write_kitti_bin(lc.cloud, out / f"{stem}.bin")
        with open(out / f"{stem}.labels.csv", "w") as fh:
            fh.write("point_index,object_id,class\n")
            for j, o in enumerate(lc.object_ids.tolist()):
                fh.write(f"{j},{o},{lc.classes.get(o, 'ground')}\n")
        entries.append({"cloud": f"{stem}.bin", "labels": f"{stem}.labels.csv", "points": lc.cloud.count})
    manifest = {
        "seed": int(seed),
        "spec_hash": spec.digest(),
        "scene_spec": spec.to_dict(),
        "domain": None if domain is None else domain.to_dict(),
        "scenes": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
