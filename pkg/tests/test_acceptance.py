"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
numbers, then asserts. Experiment criteria run the checked-in configs under
``configs/`` at full default scale and take a few minutes in total.
"""

import struct
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_neighborhoods, random_rotation
from voxblob.cli import bench_cloud, time_encode
from voxblob.core_io import PointCloud, load_kitti_bin, load_xyz_csv, write_kitti_bin
from voxblob.descriptors import EncoderSpec, eig_sym3, encode_cloud, encode_voxels, gaussian_blob, neighborhood_cov
from voxblob.errors import MalformedFile
from voxblob.featureset_io import featureset_bytes, parse_featureset
from voxblob.genbench import (
    DesignMatrix,
    ExperimentConfig,
    _with_bias,
    objective,
    objective_grad,
    run_dg_experiment,
    run_sparsity_sweep,
    run_voxel_sweep,
)
from voxblob.synthetic import apply_domain, generate_scene, resolve_domain
from voxblob.voxelgrid import GridSpec, voxelize

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        assert ok, detail
    return emit


def test_c01_feature_width(verdict):
    grid = GridSpec((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0), (1.0, 1.0, 1.0), 5)
    cloud = PointCloud(np.random.default_rng(0).uniform(-2, 2, (200, 3)), np.full(200, 0.5))
    w3 = encode_cloud(cloud, grid, EncoderSpec(("gblobs",))).width
    w4 = encode_cloud(cloud, grid, EncoderSpec(("gblobs",), include_intensity=True)).width
    verdict(1, (w3, w4) == (12, 20), f"gblobs width M=3 -> {w3}, M=4 -> {w4}")


def test_c02_invariance_suite(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    perm_err = trans_err = rot_err = scale_err = 0.0
    psd_ok = True
    n1_ok = True
    for pts in random_neighborhoods(1000, 20, max_size=64, extent=75.2):
        n = len(pts)
        base = gaussian_blob(pts, "padded", capacity=64)
        perm = rng.permutation(n)
        b = gaussian_blob(pts[perm], "padded", capacity=64)
        perm_err = max(perm_err, np.abs(b.sigma - base.sigma).max(), np.abs(b.d - base.d).max())
        shift = rng.normal(size=3)
        shift *= rng.uniform(0, 200) / np.linalg.norm(shift)
        b = gaussian_blob(pts + shift, "padded", capacity=64)
        trans_err = max(trans_err, np.abs(b.sigma - base.sigma).max(), np.abs(b.d - base.d).max())
        r = random_rotation(rng)
        b = gaussian_blob(pts @ r.T, "padded", capacity=64)
        rot_err = max(rot_err, np.abs(b.sigma - r @ base.sigma @ r.T).max())
        s = 10 ** rng.uniform(-2, 2)
        b = gaussian_blob(pts * s, "padded", capacity=64)
        ref = s * s * base.sigma
        denom = max(np.abs(ref).max(), np.finfo(float).tiny)
        scale_err = max(scale_err, np.abs(b.sigma - ref).max() / denom if n > 1 else np.abs(b.sigma).max())
        w = np.linalg.eigvalsh(base.sigma)
        psd_ok &= bool(w[0] >= -1e-9 * w.sum())
        if n == 1:
            n1_ok &= bool(np.all(base.sigma == 0.0))
    dt = time.perf_counter() - t0
    ok = (perm_err <= 1e-12 and trans_err <= 1e-9 and rot_err <= 1e-9 and scale_err <= 1e-9
          and psd_ok and n1_ok and dt < 5.0)
    verdict(2, ok, f"perm {perm_err:.1e} trans {trans_err:.1e} rot {rot_err:.1e} scale(rel) {scale_err:.1e} "
                   f"psd {psd_ok} N=1 zero {n1_ok} in {dt:.2f}s")


def test_c03_literal_d_degeneracy(verdict):
    t0 = time.perf_counter()
    worst = max(np.abs(gaussian_blob(p, "literal").d).max() for p in random_neighborhoods(1000, 30))
    dt = time.perf_counter() - t0
    verdict(3, worst <= 1e-6 and dt < 1.0, f"max |d| = {worst:.2e} in {dt:.2f}s")


def _cov_double_loop(pts):
    n, m = pts.shape
    mu = [sum(pts[i, k] for i in range(n)) / n for k in range(m)]
    out = np.zeros((m, m))
    for i in range(n):
        for a in range(m):
            for b in range(m):
                out[a, b] += (pts[i, a] - mu[a]) * (pts[i, b] - mu[b])
    return out / n


def test_c04_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    cov_err = 0.0
    for pts in random_neighborhoods(200, 40):
        ref = _cov_double_loop(pts)
        if np.abs(ref).max() > 0:
            cov_err = max(cov_err, np.abs(neighborhood_cov(pts) - ref).max() / np.abs(ref).max())
    eig_err = 0.0
    for _ in range(200):
        a = rng.normal(size=(3, 3)) * 10 ** rng.uniform(-2, 2)
        m = a + a.T
        pairs = eig_sym3(m)
        v = np.column_stack([p[1] for p in pairs])
        lam = np.array([p[0] for p in pairs])
        eig_err = max(eig_err, np.abs(v @ np.diag(lam) @ v.T - m).max() / max(1.0, np.abs(m).max()))
    grad_err = 0.0
    for _ in range(20):
        xb = _with_bias(rng.normal(size=(5, 3)))
        y = rng.integers(0, 3, 5)
        w = rng.normal(size=(4, 3))
        g = objective_grad(w, xb, y, 0.01)
        h = 1e-5
        for idx in np.ndindex(w.shape):
            e = np.zeros_like(w)
            e[idx] = h
            num = (objective(w + e, xb, y, 0.01) - objective(w - e, xb, y, 0.01)) / (2 * h)
            grad_err = max(grad_err, abs(g[idx] - num) / max(abs(num), 1e-8))
    dt = time.perf_counter() - t0
    ok = cov_err <= 1e-10 and eig_err <= 1e-7 and grad_err <= 1e-5 and dt < 10
    verdict(4, ok, f"cov rel {cov_err:.1e}, eig recon {eig_err:.1e}, grad rel {grad_err:.1e} in {dt:.2f}s")


def _per_seed(cell):
    return np.asarray(cell["accuracy"]["per_seed"])


@pytest.mark.slow
def test_c05_zshift_domain_generalization(verdict):
    cfg = ExperimentConfig.load(CONFIGS / "dg_zshift.json")
    assert not cfg.realign_grid and resolve_domain(cfg.test_domains["shifted"]).z_offset == 1.6
    assert (cfg.n_train_scenes, cfg.n_test_scenes, len(cfg.seeds)) == (300, 100, 5)
    rep = run_dg_experiment(cfg)
    g_in, b_in = _per_seed(rep.cell("in_domain", "global")), _per_seed(rep.cell("in_domain", "gblobs"))
    g_sh, b_sh = _per_seed(rep.cell("shifted", "global")), _per_seed(rep.cell("shifted", "gblobs"))
    a = np.abs(g_in - b_in) * 100
    b = (b_sh - g_sh) * 100
    c = (b_in - b_sh) * 100
    ok = bool(np.all(a <= 5) and np.all(b >= 15) and np.all(c <= 3) and rep.runtime_s < 300)
    verdict(5, ok, f"(a) max in-domain gap {a.max():.1f} pts; (b) min shifted margin {b.min():.1f} pts; "
                   f"(c) max gblobs drop {c.max():.1f} pts; in-domain global {g_in.mean():.3f} gblobs "
                   f"{b_in.mean():.3f}, shifted global {g_sh.mean():.3f} gblobs {b_sh.mean():.3f}; "
                   f"{rep.runtime_s:.0f}s")


@pytest.mark.slow
def test_c06_sigma_exact_under_coshifted_grid(verdict):
    t0 = time.perf_counter()
    cfg = ExperimentConfig.load(CONFIGS / "dg_realigned.json")
    assert cfg.realign_grid
    # feature-matrix check on individual scenes
    spec = cfg.scene_spec
    base_dom = resolve_domain(cfg.train_domain)
    shift_dom = resolve_domain(cfg.test_domains["shifted"])
    grid = cfg.grid()
    shifted_grid = grid.shifted((0.0, 0.0, shift_dom.z_offset - base_dom.z_offset))
    enc = EncoderSpec(("sigma",))
    worst, same_coords = 0.0, True
    for i in range(10):
        lc = generate_scene(spec, 1000 + i)
        a = apply_domain(lc, base_dom, i)
        b = apply_domain(lc, shift_dom, i)
        fa = encode_voxels(a.cloud, voxelize(a.cloud, grid), enc)
        fb = encode_voxels(b.cloud, voxelize(b.cloud, shifted_grid), enc)
        same_coords &= bool(np.array_equal(fa.coords, fb.coords))
        if same_coords:
            worst = max(worst, float(np.abs(fa.rows - fb.rows).max()))
    rep = run_dg_experiment(cfg)
    acc_in = _per_seed(rep.cell("in_domain", "sigma"))
    acc_sh = _per_seed(rep.cell("shifted", "sigma"))
    dt = time.perf_counter() - t0
    ok = same_coords and worst <= 1e-6 and np.array_equal(acc_in, acc_sh) and dt < 60
    verdict(6, ok, f"max |sigma diff| {worst:.1e}, voxel coords identical {same_coords}, accuracies "
                   f"{acc_in.tolist()} vs {acc_sh.tolist()}; {dt:.0f}s")


@pytest.mark.slow
def test_c07_sparsity_sweep(verdict):
    cfg = ExperimentConfig.load(CONFIGS / "sparsity.json")
    assert cfg.keep_fractions == [1.0, 0.75, 0.5, 0.25, 0.1] and len(cfg.seeds) == 5
    rep = run_sparsity_sweep(cfg)
    worst = -np.inf
    for c in rep.curves:
        m, s = np.asarray(c["mean"]), np.asarray(c["std"])
        for i in range(len(m)):
            for j in range(i + 1, len(m)):
                worst = max(worst, m[j] - m[i] - 2 * max(s[i], s[j]))
    frac = [o["fraction_le2"] for o in rep.occupancy]
    mono = bool(np.all(np.diff(frac) > 0))
    ok = worst <= 0 and mono and rep.runtime_s < 300
    curves = "; ".join(f"{c['feature_set']} " + "/".join(f"{v:.3f}" for v in c["mean"]) for c in rep.curves)
    verdict(7, ok, f"worst rise beyond 2 std {worst:+.4f}; <=2-pt voxel fraction "
                   + "/".join(f"{v:.3f}" for v in frac) + f"; {curves}; {rep.runtime_s:.0f}s")


@pytest.mark.slow
def test_c08_voxel_size_sweep(verdict):
    cfg = ExperimentConfig.load(CONFIGS / "voxel.json")
    assert cfg.voxel_sizes == [0.1, 0.2, 0.4] and len(cfg.seeds) == 5
    rep = run_voxel_sweep(cfg)
    g04 = rep.cell("in_domain", "global", voxel_size=0.4)
    b04 = rep.cell("in_domain", "gblobs", voxel_size=0.4)
    g01 = rep.cell("in_domain", "global", voxel_size=0.1)
    b01 = rep.cell("in_domain", "gblobs", voxel_size=0.1)
    dominates = bool(np.all(_per_seed(b04) >= _per_seed(g04)))
    degrade = all(
        hi["accuracy"]["mean"] <= lo["accuracy"]["mean"] + 2 * lo["accuracy"]["std"]
        for lo, hi in ((g01, g04), (b01, b04))
    )
    ok = dominates and degrade and rep.runtime_s < 300
    verdict(8, ok, f"0.4 m gblobs {_per_seed(b04).tolist()} vs global {_per_seed(g04).tolist()}; "
                   f"0.1->0.4 global {g01['accuracy']['mean']:.3f}->{g04['accuracy']['mean']:.3f}, "
                   f"gblobs {b01['accuracy']['mean']:.3f}->{b04['accuracy']['mean']:.3f}; {rep.runtime_s:.0f}s")


@pytest.fixture(scope="module")
def bench():
    cloud = bench_cloud(160_000, 0)
    grid = GridSpec.from_range([-75.2, -75.2, -2.0, 75.2, 75.2, 4.0], [0.1, 0.1, 0.15], 5)
    enc = EncoderSpec(("gblobs",))
    t1, b1 = time_encode(cloud, grid, enc, 1, 3)
    t4, b4 = time_encode(cloud, grid, enc, 4, 3)
    return cloud.count, t1, b1, t4, b4


def test_c09a_throughput_single_thread(verdict, bench):
    n, t1, *_ = bench
    verdict("9a", n == 160_000 and t1 < 1.0, f"{n} points voxelize+encode in {t1:.3f}s single-threaded")


def test_c09b_thread_determinism(verdict, bench):
    _, _, b1, _, b4 = bench
    verdict("9b", b1 == b4, f"4-thread FeatureSet bytes identical to 1-thread: {b1 == b4}")


def test_c09c_parallel_speedup(verdict, bench):
    import os

    _, t1, _, t4, _ = bench
    cores = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    verdict("9c", t1 / t4 >= 2.0, f"speedup at 4 threads {t1 / t4:.2f}x (need >= 2x; {cores} core(s) available)")


def test_c10_format_roundtrips(verdict, tmp_path):
    rng = np.random.default_rng(10)
    raw = rng.normal(0, 40, (1000, 4)).astype("<f4").tobytes()
    src, dst = tmp_path / "a.bin", tmp_path / "b.bin"
    src.write_bytes(raw)
    write_kitti_bin(load_kitti_bin(src), dst)
    kitti_ok = dst.read_bytes() == raw

    grid = GridSpec((-5.0, -5.0, -5.0), (5.0, 5.0, 5.0), (0.5, 0.5, 0.5), 5)
    fs = encode_cloud(PointCloud(rng.normal(0, 2, (2000, 3))), grid, EncoderSpec(("global_mean", "gblobs")))
    blob = featureset_bytes(fs)
    fs_ok = featureset_bytes(parse_featureset(blob)) == blob

    errors = []
    for name, data in [("short.bin", b"\0" * 17), ("nan.bin", struct.pack("<4f", 0, float("nan"), 0, 0))]:
        p = tmp_path / name
        p.write_bytes(data)
        try:
            load_kitti_bin(p)
            errors.append(name)
        except MalformedFile:
            pass
    for name, text in [("arity.csv", "1,2\n"), ("mixed.csv", "1,2,3\n1,2,3,4\n"), ("num.csv", "a,b,c\n")]:
        p = tmp_path / name
        p.write_text(text)
        try:
            load_xyz_csv(p)
            errors.append(name)
        except MalformedFile:
            pass
    for name, data in [("magic", b"ABCD" + blob[4:]), ("truncated", blob[:-4]), ("trailing", blob + b"\0")]:
        try:
            parse_featureset(data)
            errors.append(name)
        except MalformedFile:
            pass
    ok = kitti_ok and fs_ok and not errors
    verdict(10, ok, f"kitti identity {kitti_ok}, FeatureSet identity {fs_ok}, "
                    f"malformed inputs not rejected: {errors or 'none'}")
