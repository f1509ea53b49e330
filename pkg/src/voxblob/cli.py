"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 experiment failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core_io import PointCloud, load_kitti_bin, load_xyz_csv
from .descriptors import D_MODES, EncoderSpec, encode_cloud
from .errors import InvalidArgument, MalformedFile, VoxblobError
from .featureset_io import featureset_bytes, write_featureset, write_featureset_csv
from .genbench import ExperimentConfig, run_dg_experiment, run_sparsity_sweep, run_voxel_sweep
from .synthetic import DomainSpec, SceneSpec, apply_domain, generate_scene, write_dataset
from .voxelgrid import GridSpec, occupancy_histogram, sparse_fraction, voxelize

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXPERIMENT = 0, 1, 2, 3

# (range, voxel) of detector configurations the descriptors were evaluated with
PRESETS = {
    "waymo-voxel": ([-75.2, -75.2, -2.0, 75.2, 75.2, 4.0], [0.1, 0.1, 0.15]),
    "mdt3d-voxel": ([-75.2, -75.2, -2.0, 75.2, 75.2, 4.0], [0.1, 0.1, 0.2]),
    "centerpoint-voxel": ([-75.2, -75.2, -3.0, 75.2, 75.2, 5.0], [0.1, 0.1, 0.2]),
    "kitti-pillar": ([0.0, -39.68, -2.0, 69.12, 39.68, 4.0], [0.16, 0.16, 6.0]),
    "waymo-pillar": ([-74.88, -74.88, -2.0, 74.88, 74.88, 4.0], [0.32, 0.32, 6.0]),
}
DEFAULT_PRESET = "waymo-voxel"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_grid_args(p, with_k=True):
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("kitti_bin", "csv"), default=None,
                   help="default: from the file extension")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--range", type=float, nargs=6, metavar="R", default=None,
                   help="xmin ymin zmin xmax ymax zmax")
    p.add_argument("--voxel", type=float, nargs=3, metavar="V", default=None)
    if with_k:
        p.add_argument("--max-points", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voxblob", description="Voxel neighborhood descriptors for LiDAR point clouds.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a point cloud file into a FeatureSet container")
    _add_grid_args(p)
    p.add_argument("--encoder", default="gblobs", help="kinds joined by '+', e.g. global_mean+gblobs")
    p.add_argument("--d-mode", choices=D_MODES, default="padded")
    p.add_argument("--intensity", action="store_true", help="use (x, y, z, intensity), M=4")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", action="store_true", help="write CSV instead of the binary container")

    p = sub.add_parser("stats", help="voxel occupancy histogram")
    _add_grid_args(p)
    p.add_argument("--csv-out", default=None)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--spec", default=None, help="scene spec JSON (default: built-in road scene)")
    p.add_argument("--domain", default=None, help="domain spec JSON (default: identity)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-scenes", type=int, default=10)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("dg", help="run the domain-generalization experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a sparsity or voxel-size sweep")
    p.add_argument("--kind", choices=("sparsity", "voxel"), required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="voxelize+encode throughput at 1 and N threads")
    p.add_argument("--input", default=None, help="point cloud file (default: generated 160k points)")
    p.add_argument("--format", choices=("kitti_bin", "csv"), default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--points", type=int, default=160_000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load(path, fmt) -> PointCloud:
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith((".csv", ".xyz", ".txt")) else "kitti_bin"
    if fmt == "csv":
        return load_xyz_csv(path)
    return load_kitti_bin(path)


def _grid(args) -> GridSpec:
    rng, vox = PRESETS[args.preset or DEFAULT_PRESET]
    if args.range is not None:
        rng = args.range
    if args.voxel is not None:
        vox = args.voxel
    return GridSpec.from_range(rng, vox, getattr(args, "max_points", 5))


def _echo(**kw):
    print("config: " + json.dumps(kw, sort_keys=True))


def cmd_encode(args) -> int:
    grid = _grid(args)
    enc = EncoderSpec.parse(args.encoder, d_mode=args.d_mode, include_intensity=args.intensity)
    _echo(command="encode", input=args.input, grid=grid.to_dict(), encoder=enc.to_dict(), threads=args.threads)
    cloud = _load(args.input, args.format)
    fs = encode_cloud(cloud, grid, enc, threads=max(1, args.threads))
    if args.csv:
        write_featureset_csv(fs, args.out)
    else:
        write_featureset(fs, args.out)
    if len(fs) == 0:
        print("warning: no points inside the grid range", file=sys.stderr)
    print(f"rows: {len(fs)}")
    print(f"width: {fs.width}")
    print(f"dropped: {fs.dropped}")
    return EXIT_OK


def cmd_stats(args) -> int:
    grid = _grid(args)
    _echo(command="stats", input=args.input, grid=grid.to_dict())
    cloud = _load(args.input, args.format)
    vs = voxelize(cloud, grid)
    hist = occupancy_histogram(vs)
    print("occupancy,count")
    for k, v in hist.items():
        print(f"{k},{v}")
    print(f"voxels: {len(vs)}")
    print(f"fraction_le2: {sparse_fraction(hist, 2):.6f}")
    print(f"dropped: {vs.dropped}")
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write("occupancy,count\n")
            for k, v in hist.items():
                fh.write(f"{k},{v}\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SceneSpec.from_dict(json.loads(Path(args.spec).read_text())) if args.spec else SceneSpec()
    dom = DomainSpec.from_dict(json.loads(Path(args.domain).read_text())) if args.domain else DomainSpec()
    _echo(command="synth", seed=args.seed, n_scenes=args.n_scenes, domain=dom.to_dict(), spec_hash=spec.digest())
    scenes = []
    for i in range(args.n_scenes):
        lc = generate_scene(spec, args.seed * 100_003 + i)
        scenes.append(apply_domain(lc, dom, args.seed * 100_003 + i))
    path = write_dataset(args.out_dir, scenes, spec, args.seed, dom)
    print(f"wrote {len(scenes)} scenes, manifest {path}")
    return EXIT_OK


def _run_experiment(fn, args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except (InvalidArgument, TypeError) as e:
        print(f"error: bad config: {e}", file=sys.stderr)
        return EXIT_USAGE
    _echo(command=args.command, config_hash=cfg.digest(), seeds=cfg.seeds, **{"kind": getattr(args, "kind", "dg")})
    try:
        rep = fn(cfg, out=Path(args.out))
    except Exception as e:
        print(f"error: experiment failed ({type(e).__name__}: {e}); partial report in {args.out}", file=sys.stderr)
        return EXIT_EXPERIMENT
    for c in rep.cells:
        a = c["accuracy"]
        extra = "".join(f" {k}={c[k]}" for k in ("keep_fraction", "voxel_size") if k in c)
        print(f"{c['domain']:>14} {c['feature_set']:>14}{extra}  acc={a['mean']:.4f} +- {a['std']:.4f} (n={a['n_seeds']})")
    print(f"report: {args.out}")
    return EXIT_OK


def cmd_dg(args) -> int:
    return _run_experiment(run_dg_experiment, args)


def cmd_sweep(args) -> int:
    return _run_experiment(run_sparsity_sweep if args.kind == "sparsity" else run_voxel_sweep, args)


def bench_cloud(n: int = 160_000, seed: int = 0) -> PointCloud:
    """Road scene with enough ground and objects to reach ``n`` points."""
    spec = SceneSpec(
        n_objects={"car": 12, "pedestrian": 12, "cyclist": 8},
        region=((-70.0, 70.0), (-70.0, 70.0)),
        world=((-75.0, 75.0), (-75.0, 75.0)),
        class_regions={},
        ground_density=4.0,
    )
    lc = generate_scene(spec, seed)
    cloud = lc.cloud
    if cloud.count > n:
        cloud = cloud.take(np.arange(n))
    elif cloud.count < n:
        reps = -(-n // cloud.count)
        rng = np.random.default_rng(seed)
        xyz = np.vstack([cloud.xyz] + [cloud.xyz + rng.normal(0, 0.02, cloud.xyz.shape) for _ in range(reps - 1)])
        cloud = PointCloud(xyz[:n])
    return cloud


def time_encode(cloud, grid, enc, threads: int, repeats: int = 3):
    best, data = float("inf"), None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fs = encode_cloud(cloud, grid, enc, threads=threads)
        best = min(best, time.perf_counter() - t0)
        data = featureset_bytes(fs)
    return best, data


def cmd_bench(args) -> int:
    cloud = _load(args.input, args.format) if args.input else bench_cloud(args.points, args.seed)
    rng, vox = PRESETS[DEFAULT_PRESET]
    grid = GridSpec.from_range(rng, vox, 5)
    enc = EncoderSpec(("gblobs",))
    _echo(command="bench", points=cloud.count, grid=grid.to_dict(), threads=args.threads, seed=args.seed)
    t1, b1 = time_encode(cloud, grid, enc, 1, args.repeats)
    tn, bn = time_encode(cloud, grid, enc, max(1, args.threads), args.repeats)
    print(f"points: {cloud.count}")
    print(f"threads=1: {t1:.4f} s, {cloud.count / t1:,.0f} points/s")
    print(f"threads={args.threads}: {tn:.4f} s, {cloud.count / tn:,.0f} points/s")
    print(f"speedup: {t1 / tn:.2f}x")
    print(f"identical_output: {b1 == bn}")
    return EXIT_OK


COMMANDS = {
    "encode": cmd_encode,
    "stats": cmd_stats,
    "synth": cmd_synth,
    "dg": cmd_dg,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (MalformedFile, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except VoxblobError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
