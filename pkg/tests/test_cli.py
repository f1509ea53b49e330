import json
import struct

import pytest

from voxblob.cli import PRESETS, main
from voxblob.featureset_io import read_featureset


@pytest.fixture
def two_points(tmp_path):
    p = tmp_path / "two.bin"
    p.write_bytes(struct.pack("<8f", 1.0, 2.0, 0.5, 0.1, 1.02, 2.03, 0.51, 0.2))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_encode_two_points(capsys, tmp_path, two_points):
    out = tmp_path / "f.vxfs"
    code, stdout, _ = run(capsys, "encode", "--input", two_points, "--out", out)
    assert code == 0
    assert "width: 12" in stdout and "rows: 1" in stdout and "dropped: 0" in stdout
    assert stdout.startswith("config: ")
    assert read_featureset(out).width == 12


def test_encode_threads_same_bytes(capsys, tmp_path, two_points):
    a, b = tmp_path / "a.vxfs", tmp_path / "b.vxfs"
    run(capsys, "encode", "--input", two_points, "--out", a, "--threads", "1")
    run(capsys, "encode", "--input", two_points, "--out", b, "--threads", "4")
    assert a.read_bytes() == b.read_bytes()


def test_encode_out_of_range_warns(capsys, tmp_path, two_points):
    code, stdout, err = run(capsys, "encode", "--input", two_points, "--out", tmp_path / "f",
                            "--range", 10, 10, 10, 20, 20, 20)
    assert code == 0 and "rows: 0" in stdout and "warning" in err


def test_encode_intensity_and_csv(capsys, tmp_path, two_points):
    out = tmp_path / "f.csv"
    code, stdout, _ = run(capsys, "encode", "--input", two_points, "--out", out, "--intensity", "--csv",
                          "--encoder", "global_mean+gblobs", "--d-mode", "voxel_center")
    assert code == 0 and "width: 24" in stdout
    assert out.read_text().splitlines()[0].startswith("ix,iy,iz,f0")


def test_usage_errors(capsys, tmp_path, two_points):
    assert run(capsys, "encode", "--out", tmp_path / "x")[0] == 1
    assert run(capsys, "encode", "--input", two_points, "--out", tmp_path / "x", "--bogus")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "encode", "--input", two_points, "--out", tmp_path / "x", "--voxel", "1", "1")[0] == 1


def test_missing_input_usage_text(capsys, tmp_path):
    code = main(["encode", "--out", str(tmp_path / "x")])
    err = capsys.readouterr().err
    assert code == 1 and "usage:" in err and "--input" in err


def test_data_errors(capsys, tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\0" * 17)
    assert run(capsys, "encode", "--input", bad, "--out", tmp_path / "x")[0] == 2
    assert run(capsys, "stats", "--input", tmp_path / "missing.bin")[0] == 2
    csv = tmp_path / "bad.csv"
    csv.write_text("1,2\n")
    assert run(capsys, "stats", "--input", csv)[0] == 2


def test_stats_single_point(capsys, tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("0,0,0\n")
    out = tmp_path / "h.csv"
    code, stdout, _ = run(capsys, "stats", "--input", p, "--csv-out", out)
    assert code == 0
    assert "1,1" in stdout.splitlines() and "fraction_le2: 1.000000" in stdout
    assert out.read_text() == "occupancy,count\n1,1\n"


def test_stats_dense_cube(capsys, tmp_path):
    import numpy as np

    rng = np.random.default_rng(0)
    p = tmp_path / "cube.csv"
    pts = rng.uniform(0, 1, (5000, 3))
    p.write_text("\n".join(",".join(f"{v:.6f}" for v in r) for r in pts))
    code, stdout, _ = run(capsys, "stats", "--input", p, "--range", 0, 0, 0, 1, 1, 1, "--voxel", 0.25, 0.25, 0.25)
    frac = float([l for l in stdout.splitlines() if l.startswith("fraction_le2")][0].split()[1])
    assert code == 0 and frac < 0.1


def test_preset_expansion(capsys, two_points, tmp_path):
    code, stdout, _ = run(capsys, "stats", "--input", two_points, "--preset", "waymo-voxel")
    cfg = json.loads(stdout.splitlines()[0][len("config: "):])
    assert cfg["grid"]["range"] == [-75.2, -75.2, -2.0, 75.2, 75.2, 4.0]
    assert cfg["grid"]["voxel"] == [0.1, 0.1, 0.15]
    assert set(PRESETS) >= {"waymo-voxel", "kitti-pillar"}


def test_synth_reproducible(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_objects": {"car": 1, "pedestrian": 1}, "ground_density": 0.05}))
    dom = tmp_path / "dom.json"
    dom.write_text(json.dumps({"keep_fraction": 0.5}))
    for d in ("a", "b"):
        code, stdout, _ = run(capsys, "synth", "--spec", spec, "--domain", dom, "--seed", 3,
                              "--n-scenes", 2, "--out-dir", tmp_path / d)
        assert code == 0 and '"seed": 3' in stdout
    for name in ("scene_0000.bin", "scene_0001.labels.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_bad_spec(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"n_objects": {"truck": 1}}')
    assert run(capsys, "synth", "--spec", spec, "--out-dir", tmp_path / "o")[0] == 2
    spec.write_text("{not json")
    assert run(capsys, "synth", "--spec", spec, "--out-dir", tmp_path / "o")[0] == 2


def small_config(tmp_path, **kw):
    cfg = dict(seeds=[0], n_train_scenes=6, n_test_scenes=3, epochs=50, feature_sets=["global", "gblobs"])
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_dg_zero_seeds(capsys, tmp_path):
    assert run(capsys, "dg", "--config", small_config(tmp_path, seeds=[]), "--out", tmp_path / "r.json")[0] == 1


def test_dg_runs(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "dg", "--config", small_config(tmp_path), "--out", out)
    assert code == 0 and '"seeds": [0]' in stdout
    assert json.loads(out.read_text())["kind"] == "dg"


def test_sweep_sparsity_five_points(capsys, tmp_path):
    out = tmp_path / "s.json"
    code, _, _ = run(capsys, "sweep", "--kind", "sparsity", "--config", small_config(tmp_path), "--out", out)
    rep = json.loads(out.read_text())
    assert code == 0
    assert all(len(c["x"]) == 5 for c in rep["curves"])


def test_experiment_failure_exit_3(capsys, tmp_path):
    # all test objects outside the grid: nothing to evaluate, training has no rows
    cfg = small_config(tmp_path, grid_range=[100, 100, 100, 101, 101, 101])
    out = tmp_path / "r.json"
    code, _, err = run(capsys, "dg", "--config", cfg, "--out", out)
    assert code == 3 and "experiment failed" in err
    assert json.loads(out.read_text())["failures"]


def test_bench_small(capsys):
    code, stdout, _ = run(capsys, "bench", "--points", 20000, "--threads", 2, "--repeats", 1)
    assert code == 0
    assert "points: 20000" in stdout and "speedup:" in stdout and "identical_output: True" in stdout
