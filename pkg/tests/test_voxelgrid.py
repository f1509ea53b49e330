import numpy as np
import pytest

from voxblob.core_io import PointCloud
from voxblob.errors import InvalidArgument
from voxblob.voxelgrid import GridSpec, occupancy_histogram, sparse_fraction, voxel_index, voxelize

UNIT = GridSpec((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0), (1.0, 1.0, 1.0), 5)


def brute_voxelize(xyz, spec):
    """Reference grouping with a plain dict, no sorting tricks."""
    groups = {}
    dropped = 0
    for i, p in enumerate(xyz):
        key = voxel_index(p, spec)
        if key is None:
            dropped += 1
            continue
        groups.setdefault(key, []).append(i)
    return {k: v[: spec.max_points] for k, v in groups.items()}, dropped


def test_voxel_index_examples():
    assert voxel_index((0, 0, 0), UNIT) == (1, 1, 1)
    assert voxel_index((-1, -1, -1), UNIT) == (0, 0, 0)
    assert voxel_index((1, 0, 0), UNIT) is None
    assert voxel_index((0, 0, 1.0), UNIT) is None


def test_gridspec_validation():
    with pytest.raises(InvalidArgument):
        GridSpec((0, 0, 0), (0, 1, 1), (1, 1, 1))
    with pytest.raises(InvalidArgument):
        GridSpec((0, 0, 0), (1, 1, 1), (0, 1, 1))
    with pytest.raises(InvalidArgument):
        GridSpec((0, 0, 0), (1, 1, 1), (1, 1, 1), 0)
    with pytest.raises(InvalidArgument):
        GridSpec((0, 0, 0), (1e6, 1, 1), (1e-6, 1, 1))


def test_two_points_same_cell():
    vs = voxelize(PointCloud(np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]])), UNIT)
    assert vs.voxels == {(1, 1, 1): [0, 1]}


def test_truncation_keeps_first_k():
    xyz = np.full((7, 3), 0.5)
    vs = voxelize(PointCloud(xyz), UNIT)
    assert vs.voxels == {(1, 1, 1): [0, 1, 2, 3, 4]}
    assert vs.truncated == 2 and vs.dropped == 0


def test_all_out_of_range():
    vs = voxelize(PointCloud(np.full((4, 3), 5.0)), UNIT)
    assert len(vs) == 0 and vs.dropped == 4


def test_matches_brute_force(rng):
    spec = GridSpec((-5.0, -5.0, -2.0), (5.0, 5.0, 2.0), (0.7, 0.5, 0.9), 4)
    xyz = rng.uniform(-6, 6, (3000, 3))
    vs = voxelize(PointCloud(xyz), spec)
    ref, dropped = brute_voxelize(xyz, spec)
    assert vs.voxels == ref
    assert vs.dropped == dropped
    keys = [tuple(c) for c in vs.coords.tolist()]
    assert keys == sorted(keys)


def test_members_inside_half_open_box(rng):
    spec = GridSpec((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0), (0.3, 0.3, 0.3), 100)
    xyz = rng.uniform(-3, 3, (2000, 3))
    vs = voxelize(PointCloud(xyz), spec)
    lo = np.asarray(spec.range_min)
    size = np.asarray(spec.voxel_size)
    seen = set()
    for v in range(len(vs)):
        m = vs.members(v)
        assert len(m) > 0
        assert not seen.intersection(m.tolist())
        seen.update(m.tolist())
        box_lo = lo + vs.coords[v] * size
        assert np.all(xyz[m] >= box_lo - 1e-12) and np.all(xyz[m] < box_lo + size + 1e-12)
    assert vs.counts.sum() + vs.dropped == vs.source_count


def test_thread_count_does_not_change_output(rng):
    spec = GridSpec((-20.0, -20.0, -3.0), (20.0, 20.0, 3.0), (0.2, 0.2, 0.2), 5)
    cloud = PointCloud(rng.normal(0, 8, (50_000, 3)))
    a = voxelize(cloud, spec, threads=1)
    for t in (2, 3, 8):
        b = voxelize(cloud, spec, threads=t)
        np.testing.assert_array_equal(a.coords, b.coords)
        np.testing.assert_array_equal(a.offsets, b.offsets)
        np.testing.assert_array_equal(a.indices, b.indices)
        assert (a.dropped, a.truncated) == (b.dropped, b.truncated)


def test_translation_consistency():
    spec = GridSpec((-4.0, -4.0, -4.0), (4.0, 4.0, 4.0), (0.5, 0.5, 0.5), 10)
    # lattice-aligned points well inside cells, so the shift cannot cross a boundary
    rng = np.random.default_rng(3)
    xyz = (rng.integers(-8, 8, (400, 3)) + rng.uniform(0.1, 0.9, (400, 3))) * 0.5
    off = np.array([1.0, -0.5, 2.0])
    a = voxelize(PointCloud(xyz), spec)
    b = voxelize(PointCloud(xyz + off), spec.shifted(off))
    assert a.voxels == b.voxels


def test_occupancy_histogram_examples():
    xyz = np.array([[0.1, 0.1, 0.1], [-0.5, -0.5, -0.5], [0.5, -0.5, 0.5], [0.6, -0.6, 0.6], [0.7, -0.7, 0.7]])
    h = occupancy_histogram(voxelize(PointCloud(xyz), UNIT))
    assert h == {1: 2, 3: 1}
    assert occupancy_histogram(voxelize(PointCloud(np.zeros((0, 3))), UNIT)) == {}


def test_one_point_per_cell_is_all_singletons():
    spec = GridSpec((0.0, 0.0, 0.0), (10.0, 10.0, 1.0), (1.0, 1.0, 1.0), 5)
    g = np.stack(np.meshgrid(np.arange(10), np.arange(10), [0], indexing="ij"), -1).reshape(-1, 3) + 0.5
    h = occupancy_histogram(voxelize(PointCloud(g), spec))
    assert h == {1: 100}
    assert sparse_fraction(h) == 1.0


def test_sparse_fraction_empty():
    assert sparse_fraction({}) == 0.0
