"""Desk-scale domain-generalization harness.

Voxel descriptors are pooled per object and fed to a multinomial logistic
regression (a linear probe). Train on one synthetic domain, test on
shifted ones, and compare feature sets. Absolute accuracies say nothing
about detector performance; only the relative behavior under shift is of
interest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .descriptors import EncoderSpec, FeatureSet, encode_voxels
from .errors import InvalidArgument, TrainingFailure
from .synthetic import (
    CLASSES,
    GROUND_ID,
    DomainSpec,
    LabeledCloud,
    SceneSpec,
    apply_domain,
    generate_scene,
    resolve_domain,
)
from .voxelgrid import GridSpec, VoxelSet, occupancy_histogram, sparse_fraction, voxelize

POOLINGS = ("mean", "max")
ARTIFACT_NOTE = (
    "Feature sets are linear-probe analogues of detector input ablations on "
    "synthetic scenes; accuracies are not comparable to detection mAP."
)


# --------------------------------------------------------------------------
# pooling


@dataclass
class DesignMatrix:
    rows: np.ndarray
    labels: np.ndarray  # class index per row
    feature_meta: dict = field(default_factory=dict)
    object_ids: Optional[np.ndarray] = None
    skipped: int = 0

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            self.rows = self.rows.reshape(len(self.rows), -1)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape[0] != self.rows.shape[0]:
            raise InvalidArgument("labels and rows differ in length")

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def stack(cls, parts: list) -> "DesignMatrix":
        if not parts:
            raise InvalidArgument("nothing to stack")
        return cls(
            np.vstack([p.rows for p in parts]),
            np.concatenate([p.labels for p in parts]),
            dict(parts[0].feature_meta),
            None,
            sum(p.skipped for p in parts),
        )


def voxel_owners(vs: VoxelSet, object_ids: np.ndarray) -> np.ndarray:
    """Object owning the majority of each voxel's points; ties go to the lower id."""
    nv = len(vs)
    if nv == 0:
        return np.zeros(0, dtype=np.int64)
    vox = np.repeat(np.arange(nv), vs.counts)
    obj = np.asarray(object_ids)[vs.indices]
    shift = int(obj.min())
    span = int(obj.max()) - shift + 1
    pair, cnt = np.unique(vox * span + (obj - shift), return_counts=True)
    pv, po = pair // span, pair % span + shift
    # per voxel: highest count first, then lowest object id
    order = np.lexsort((po, -cnt, pv))
    first = np.r_[True, pv[order][1:] != pv[order][:-1]]
    owners = np.empty(nv, dtype=np.int64)
    owners[pv[order][first]] = po[order][first]
    return owners


def pool_object_features(fs: FeatureSet, vs: VoxelSet, lc: LabeledCloud, pooling: str = "mean",
                         owners: Optional[np.ndarray] = None) -> DesignMatrix:
    """One row per labeled object, pooling the descriptors of the voxels it owns.

    Rows are ordered by object id. Objects owning no voxel are skipped and
    counted in ``DesignMatrix.skipped``; ground-owned voxels are ignored.
    """
    if pooling not in POOLINGS:
        raise InvalidArgument(f"pooling must be one of {POOLINGS}")
    if len(fs) != len(vs):
        raise InvalidArgument("feature set and voxel set are not aligned")
    if owners is None:
        owners = voxel_owners(vs, lc.object_ids)
    meta = {"encoder": fs.spec.to_dict(), "pooling": pooling}
    sel = np.flatnonzero(owners != GROUND_ID)
    order = sel[np.argsort(owners[sel], kind="stable")]
    own = owners[order]
    if own.shape[0] == 0:
        return DesignMatrix(np.zeros((0, fs.width)), np.zeros(0, np.int64), meta,
                            np.zeros(0, np.int64), len(lc.classes))
    starts = np.flatnonzero(np.r_[True, own[1:] != own[:-1]])
    ids = own[starts]
    block = fs.rows[order]
    if pooling == "mean":
        rows = np.add.reduceat(block, starts, axis=0) / np.diff(np.r_[starts, own.shape[0]])[:, None]
    else:
        rows = np.maximum.reduceat(block, starts, axis=0)
    labels = np.array([CLASSES.index(lc.classes[int(i)]) for i in ids], dtype=np.int64)
    return DesignMatrix(rows, labels, meta, ids, len(lc.classes) - ids.shape[0])


# --------------------------------------------------------------------------
# classifier


@dataclass
class LinearClassifier:
    weights: np.ndarray  # (width + 1, n_classes), bias in the last row
    mean: np.ndarray
    scale: np.ndarray
    n_classes: int
    loss_history: list = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def zeros(cls, width: int, n_classes: int) -> "LinearClassifier":
        """Untrained model: all logits equal, so every prediction is class 0."""
        return cls(np.zeros((width + 1, n_classes)), np.zeros(width), np.ones(width), n_classes)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def logits(self, x: np.ndarray) -> np.ndarray:
        return _with_bias(self.standardize(x)) @ self.weights

    def predict(self, x: np.ndarray) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest class index on ties
        return np.argmax(self.logits(x), axis=1)


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(w: np.ndarray, xb: np.ndarray, y: np.ndarray) -> float:
    z = xb @ w
    zmax = z.max(axis=1, keepdims=True)
    lse = (zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1)))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def objective(w: np.ndarray, xb: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` over the non-bias rows."""
    return cross_entropy(w, xb, y) + 0.5 * l2 * float(np.sum(w[:-1] ** 2))


def objective_grad(w: np.ndarray, xb: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    p = _softmax(xb @ w)
    p[np.arange(len(y)), y] -= 1.0
    g = xb.T @ p / len(y)
    g[:-1] += l2 * w[:-1]
    return g


def train_classifier(dm: DesignMatrix, lr: float = 0.5, epochs: int = 300, l2: float = 1e-4,
                     seed: int = 0, n_classes: Optional[int] = None) -> LinearClassifier:
    """Full-batch proximal gradient descent on softmax cross-entropy.

    The L2 term is applied as a proximal shrink, so any ``l2`` is stable.
    If an epoch would increase the objective the step size is halved and
    the epoch retried, which keeps the loss history non-increasing.
    """
    y = dm.labels
    present = np.unique(y)
    if present.shape[0] < 2:
        raise InvalidArgument("training needs at least two classes")
    n_classes = int(n_classes or int(y.max()) + 1)
    x = dm.rows
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 1e-12, std, 1.0)
    xb = _with_bias((x - mean) / scale)

    rng = np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))
    w = rng.normal(0.0, 1e-3, (xb.shape[1], n_classes))
    shrink_mask = np.ones((xb.shape[1], 1))
    shrink_mask[-1] = 0.0

    loss = objective(w, xb, y, l2)
    history = [loss]
    step = float(lr)
    for _ in range(int(epochs)):
        g = xb.T @ _residual(w, xb, y) / len(y)
        for _retry in range(60):
            cand = w - step * g
            cand = cand / (1.0 + step * l2 * shrink_mask)
            new = objective(cand, xb, y, l2)
            if not math.isfinite(new):
                raise TrainingFailure("loss became non-finite")
            if new <= loss + 1e-12:
                break
            step *= 0.5
        w, loss = cand, new
        history.append(loss)
    if not np.isfinite(w).all():
        raise TrainingFailure("weights became non-finite")
    return LinearClassifier(w, mean, scale, n_classes, history)


def _residual(w, xb, y):
    p = _softmax(xb @ w)
    p[np.arange(len(y)), y] -= 1.0
    return p


def evaluate(clf: LinearClassifier, dm: DesignMatrix):
    """Accuracy and confusion matrix (rows: true class, columns: predicted)."""
    if dm.width != clf.width:
        raise InvalidArgument(f"width {dm.width} does not match classifier width {clf.width}")
    conf = np.zeros((clf.n_classes, clf.n_classes), dtype=np.int64)
    if len(dm) == 0:
        return float("nan"), conf
    pred = clf.predict(dm.rows)
    np.add.at(conf, (dm.labels, pred), 1)
    return float(np.mean(pred == dm.labels)), conf


# --------------------------------------------------------------------------
# experiments

FEATURE_SETS = {
    "global": ("global_mean",),
    "global+sigma": ("global_mean", "sigma"),
    "d": ("d",),
    "sigma": ("sigma",),
    "gblobs": ("d", "sigma"),
}


@dataclass
class ExperimentConfig:
    experiment_id: str = "dg"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_train_scenes: int = 300
    n_test_scenes: int = 100
    scene: dict = field(default_factory=dict)
    grid_range: list = field(default_factory=lambda: [-40.0, -40.0, -4.0, 40.0, 40.0, 4.0])
    voxel_size: list = field(default_factory=lambda: [0.2, 0.2, 0.2])
    max_points: int = 32
    d_mode: str = "padded"
    pooling: str = "mean"
    train_domain: object = "dense-64-beam"
    test_domains: dict = field(default_factory=lambda: {"shifted": "shifted-origin"})
    realign_grid: bool = False
    feature_sets: list = field(default_factory=lambda: list(FEATURE_SETS))
    lr: float = 0.5
    epochs: int = 1000
    l2: float = 1e-4
    keep_fractions: list = field(default_factory=lambda: [1.0, 0.75, 0.5, 0.25, 0.1])
    voxel_sizes: list = field(default_factory=lambda: [0.1, 0.2, 0.4])
    sweep_feature_sets: list = field(default_factory=lambda: ["global", "gblobs"])

    def __post_init__(self):
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise InvalidArgument("config needs at least one seed")
        if self.n_train_scenes < 1 or self.n_test_scenes < 1:
            raise InvalidArgument("scene counts must be positive")
        for name in list(self.feature_sets) + list(self.sweep_feature_sets):
            feature_kinds(name)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @property
    def scene_spec(self) -> SceneSpec:
        return SceneSpec.from_dict(self.scene)

    def grid(self, voxel=None) -> GridSpec:
        return GridSpec.from_range(self.grid_range, voxel or self.voxel_size, self.max_points)


def feature_kinds(name: str) -> tuple:
    if name in FEATURE_SETS:
        return FEATURE_SETS[name]
    kinds = tuple(k.strip() for k in name.split("+"))
    EncoderSpec(kinds)  # validates
    return kinds


def _seed_words(seed: int, *tags: int) -> int:
    h = hashlib.sha256(json.dumps([int(seed), *tags]).encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass
class _SceneFeatures:
    pooled: dict  # kind -> (n_objects, width)
    labels: np.ndarray
    skipped: int
    occupancy: dict  # all voxels
    object_occupancy: dict  # voxels owned by a labeled object
    n_voxels: int


def _scene_features(lc: LabeledCloud, grid: GridSpec, kinds: tuple, d_mode: str, pooling: str) -> _SceneFeatures:
    vs = voxelize(lc.cloud, grid)
    enc = EncoderSpec(kinds, d_mode=d_mode)
    fs = encode_voxels(lc.cloud, vs, enc)
    owners = voxel_owners(vs, lc.object_ids)
    dm = pool_object_features(fs, vs, lc, pooling, owners)
    pooled = {k: dm.rows[:, sl] for k, sl in enc.layout().items()}
    occ, cnt = np.unique(vs.counts[owners != GROUND_ID], return_counts=True)
    obj_hist = {int(k): int(v) for k, v in zip(occ, cnt)}
    return _SceneFeatures(pooled, dm.labels, dm.skipped, occupancy_histogram(vs), obj_hist, len(vs))


def _design(scenes: list, name: str, meta: dict) -> DesignMatrix:
    kinds = feature_kinds(name)
    rows = np.vstack([np.hstack([s.pooled[k] for k in kinds]) for s in scenes])
    labels = np.concatenate([s.labels for s in scenes])
    return DesignMatrix(rows, labels, dict(meta, feature_set=name), None, sum(s.skipped for s in scenes))


def _merge_hist(hists) -> dict:
    out = {}
    for h in hists:
        for k, v in h.items():
            out[k] = out.get(k, 0) + v
    return dict(sorted(out.items()))


class _Dataset:
    """Scenes of one seed: generated once, re-used across domains."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        spec = cfg.scene_spec
        self.train_base = [generate_scene(spec, _seed_words(seed, 1, i)) for i in range(cfg.n_train_scenes)]
        self.test_base = [generate_scene(spec, _seed_words(seed, 2, i)) for i in range(cfg.n_test_scenes)]

    def domain_scenes(self, which: str, dom: DomainSpec) -> list:
        base = self.train_base if which == "train" else self.test_base
        tag = 3 if which == "train" else 4
        return [apply_domain(lc, dom, _seed_words(self.seed, tag, i)) for i, lc in enumerate(base)]


def _all_kinds(names) -> tuple:
    out = []
    for n in names:
        for k in feature_kinds(n):
            if k not in out:
                out.append(k)
    return tuple(out)


def _summary(values: list) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.shape[0] > 1 else 0.0
    return {
        "mean": float(arr.mean()),
        "std": std,
        "n_seeds": int(arr.shape[0]),
        "per_seed": [float(v) for v in arr],
    }


@dataclass
class Report:
    experiment_id: str
    kind: str
    config: dict
    config_hash: str
    seeds: list
    cells: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    occupancy: list = field(default_factory=list)
    skipped_objects: int = 0
    failures: list = field(default_factory=list)
    note: str = ARTIFACT_NOTE
    runtime_s: float = 0.0

    def to_dict(self, with_runtime: bool = True) -> dict:
        d = asdict(self)
        if not with_runtime:
            d.pop("runtime_s")
        return d

    def to_json(self, with_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(with_runtime), indent=2, sort_keys=True) + "\n"

    def cell(self, domain: str, feature_set: str, **match) -> dict:
        for c in self.cells:
            if c["domain"] == domain and c["feature_set"] == feature_set and all(c.get(k) == v for k, v in match.items()):
                return c
        raise KeyError((domain, feature_set, match))

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        if self.curves:
            csv_path = path.with_suffix(".curves.csv")
            with open(csv_path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["curve", "feature_set", "x", "accuracy_mean", "accuracy_std", "n_seeds"])
                for c in self.curves:
                    for x, m, s in zip(c["x"], c["mean"], c["std"]):
                        wr.writerow([c["name"], c["feature_set"], x, m, s, c["n_seeds"]])
        return path


def _new_report(cfg: ExperimentConfig, kind: str) -> Report:
    return Report(cfg.experiment_id, kind, cfg.to_dict(), cfg.digest(), list(cfg.seeds))


def _fit_eval(train: DesignMatrix, tests: dict, cfg: ExperimentConfig, seed: int) -> dict:
    clf = train_classifier(train, cfg.lr, cfg.epochs, cfg.l2, seed, n_classes=len(CLASSES))
    return {name: evaluate(clf, dm)[0] for name, dm in tests.items()}


def run_dg_experiment(cfg: ExperimentConfig, out: Optional[Path] = None) -> Report:
    """Train on ``train_domain``, test in-domain and on every ``test_domains`` entry."""
    t0 = time.perf_counter()
    rep = _new_report(cfg, "dg")
    kinds = _all_kinds(cfg.feature_sets)
    grid = cfg.grid()
    train_dom = resolve_domain(cfg.train_domain)
    domains = {"in_domain": train_dom}
    domains.update({k: resolve_domain(v) for k, v in cfg.test_domains.items()})
    acc = {(d, f): [] for d in domains for f in cfg.feature_sets}
    widths = {}
    try:
        for seed in cfg.seeds:
            data = _Dataset(cfg, seed)
            meta = {"pooling": cfg.pooling, "d_mode": cfg.d_mode}
            train = [_scene_features(lc, grid, kinds, cfg.d_mode, cfg.pooling)
                     for lc in data.domain_scenes("train", train_dom)]
            rep.skipped_objects += sum(s.skipped for s in train)
            tests = {}
            for dname, dom in domains.items():
                g = grid.shifted((0.0, 0.0, dom.z_offset - train_dom.z_offset)) if cfg.realign_grid else grid
                tests[dname] = [_scene_features(lc, g, kinds, cfg.d_mode, cfg.pooling)
                                for lc in data.domain_scenes("test", dom)]
                rep.skipped_objects += sum(s.skipped for s in tests[dname])
            for fname in cfg.feature_sets:
                tr = _design(train, fname, meta)
                widths[fname] = tr.width
                res = _fit_eval(tr, {d: _design(ts, fname, meta) for d, ts in tests.items()}, cfg, seed)
                for d, a in res.items():
                    acc[(d, fname)].append(a)
    except Exception as e:  # keep whatever finished
        rep.failures.append({"error": type(e).__name__, "message": str(e)})
        _finish(rep, acc, widths, t0, out)
        raise
    _finish(rep, acc, widths, t0, out)
    return rep


def _finish(rep: Report, acc: dict, widths: dict, t0: float, out) -> None:
    for (d, f), vals in acc.items():
        if vals:
            rep.cells.append(dict(domain=d, feature_set=f, width=widths.get(f), accuracy=_summary(vals)))
    rep.runtime_s = time.perf_counter() - t0
    if out is not None:
        rep.write(out)


def run_sparsity_sweep(cfg: ExperimentConfig, out: Optional[Path] = None) -> Report:
    """Train at full density, test on uniformly subsampled copies of the in-domain test set."""
    t0 = time.perf_counter()
    rep = _new_report(cfg, "sparsity")
    names = list(cfg.feature_sets)
    kinds = _all_kinds(names)
    grid = cfg.grid()
    train_dom = resolve_domain(cfg.train_domain)
    fracs = [float(f) for f in cfg.keep_fractions]
    acc = {(f, n): [] for f in fracs for n in names}
    hists = {f: [] for f in fracs}
    obj_hists = {f: [] for f in fracs}
    widths = {}
    try:
        for seed in cfg.seeds:
            data = _Dataset(cfg, seed)
            meta = {"pooling": cfg.pooling, "d_mode": cfg.d_mode}
            train = [_scene_features(lc, grid, kinds, cfg.d_mode, cfg.pooling)
                     for lc in data.domain_scenes("train", train_dom)]
            tests = {}
            for f in fracs:
                dom = replace(train_dom, keep_fraction=train_dom.keep_fraction * f)
                tests[f] = [_scene_features(lc, grid, kinds, cfg.d_mode, cfg.pooling)
                            for lc in data.domain_scenes("test", dom)]
                hists[f].extend(s.occupancy for s in tests[f])
                obj_hists[f].extend(s.object_occupancy for s in tests[f])
            for n in names:
                tr = _design(train, n, meta)
                widths[n] = tr.width
                res = _fit_eval(tr, {f: _design(ts, n, meta) for f, ts in tests.items()}, cfg, seed)
                for f, a in res.items():
                    acc[(f, n)].append(a)
    except Exception as e:
        rep.failures.append({"error": type(e).__name__, "message": str(e)})
        raise
    finally:
        for n in names:
            cells = [_summary(acc[(f, n)]) for f in fracs if acc[(f, n)]]
            for f, c in zip(fracs, cells):
                rep.cells.append(dict(domain=f"keep={f}", feature_set=n, width=widths.get(n),
                                      keep_fraction=f, accuracy=c))
            if cells:
                rep.curves.append(dict(name="sparsity", feature_set=n, x=fracs[:len(cells)],
                                       mean=[c["mean"] for c in cells], std=[c["std"] for c in cells],
                                       n_seeds=cells[0]["n_seeds"]))
        for f in fracs:
            if hists[f]:
                h = _merge_hist(hists[f])
                oh = _merge_hist(obj_hists[f])
                # fraction_le2 is taken over object voxels, the ones the probe sees;
                # ground voxels are near-singletons that vanish under thinning
                rep.occupancy.append(dict(keep_fraction=f,
                                          histogram={str(k): v for k, v in h.items()},
                                          object_histogram={str(k): v for k, v in oh.items()},
                                          fraction_le2=sparse_fraction(oh, 2),
                                          fraction_le2_all=sparse_fraction(h, 2)))
        rep.runtime_s = time.perf_counter() - t0
        if out is not None:
            rep.write(out)
    return rep


def run_voxel_sweep(cfg: ExperimentConfig, out: Optional[Path] = None) -> Report:
    """In-domain accuracy per (voxel edge, feature set)."""
    t0 = time.perf_counter()
    rep = _new_report(cfg, "voxel")
    names = list(cfg.sweep_feature_sets)
    kinds = _all_kinds(names)
    train_dom = resolve_domain(cfg.train_domain)
    sizes = [float(s) for s in cfg.voxel_sizes]
    acc = {(s, n): [] for s in sizes for n in names}
    nvox = {s: [] for s in sizes}
    widths = {}
    try:
        for seed in cfg.seeds:
            data = _Dataset(cfg, seed)
            train_lc = data.domain_scenes("train", train_dom)
            test_lc = data.domain_scenes("test", train_dom)
            meta = {"pooling": cfg.pooling, "d_mode": cfg.d_mode}
            for s in sizes:
                grid = cfg.grid((s, s, s))
                train = [_scene_features(lc, grid, kinds, cfg.d_mode, cfg.pooling) for lc in train_lc]
                test = [_scene_features(lc, grid, kinds, cfg.d_mode, cfg.pooling) for lc in test_lc]
                nvox[s].append(sum(t.n_voxels for t in test))
                for n in names:
                    tr = _design(train, n, meta)
                    widths[n] = tr.width
                    acc[(s, n)].append(_fit_eval(tr, {"in_domain": _design(test, n, meta)}, cfg, seed)["in_domain"])
    except Exception as e:
        rep.failures.append({"error": type(e).__name__, "message": str(e)})
        raise
    finally:
        for n in names:
            cells = [_summary(acc[(s, n)]) for s in sizes if acc[(s, n)]]
            for s, c in zip(sizes, cells):
                rep.cells.append(dict(domain="in_domain", feature_set=n, width=widths.get(n),
                                      voxel_size=s, n_voxels=nvox[s], accuracy=c))
            if cells:
                rep.curves.append(dict(name="voxel_size", feature_set=n, x=sizes[:len(cells)],
                                       mean=[c["mean"] for c in cells], std=[c["std"] for c in cells],
                                       n_seeds=cells[0]["n_seeds"]))
        rep.runtime_s = time.perf_counter() - t0
        if out is not None:
            rep.write(out)
    return rep
