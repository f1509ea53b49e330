"""FeatureSet serialization.

Binary container (all integers little-endian)::

    offset  size        field
    0       4           magic b"VXFS"
    4       2           version (uint16, currently 1)
    6       2           reserved, zero
    8       4           width W (uint32)
    12      8           row count R (uint64)
    20      4           header length H (uint32)
    24      H           encoder header, UTF-8 JSON (sorted keys, compact)
    24+H    4*R*W       rows, float32 '<f4', row-major
    ...     12*R        voxel coordinates, int32 '<i4' (ix, iy, iz) per row

The CSV alternative has a header line ``ix,iy,iz,f0,...,f{W-1}`` and one
line per row; floats use ``repr`` of the float32 value so they round-trip.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .descriptors import EncoderSpec, FeatureSet
from .errors import MalformedFile

MAGIC = b"VXFS"
VERSION = 1
_HEAD = struct.Struct("<4sHHIQI")


def featureset_bytes(fs: FeatureSet) -> bytes:
    header = json.dumps(fs.spec.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    rows = np.ascontiguousarray(fs.rows, dtype="<f4")
    coords = np.ascontiguousarray(fs.coords, dtype="<i4").reshape(-1, 3)
    return b"".join([
        _HEAD.pack(MAGIC, VERSION, 0, fs.width, rows.shape[0], len(header)),
        header,
        rows.tobytes(),
        coords.tobytes(),
    ])


def write_featureset(fs: FeatureSet, path) -> None:
    Path(path).write_bytes(featureset_bytes(fs))


def parse_featureset(raw: bytes, source: str = "<bytes>") -> FeatureSet:
    if len(raw) < _HEAD.size:
        raise MalformedFile(f"{source}: truncated header")
    magic, version, _, width, nrows, hlen = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedFile(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise MalformedFile(f"{source}: unsupported version {version}")
    expected = _HEAD.size + hlen + 4 * nrows * width + 12 * nrows
    if len(raw) != expected:
        raise MalformedFile(f"{source}: expected {expected} bytes, found {len(raw)}")
    at = _HEAD.size
    try:
        spec = EncoderSpec.from_dict(json.loads(raw[at:at + hlen].decode()))
    except (ValueError, KeyError, TypeError) as e:
        raise MalformedFile(f"{source}: bad encoder header ({e})") from None
    if spec.width != width:
        raise MalformedFile(f"{source}: header width {spec.width} != stored width {width}")
    at += hlen
    rows = np.frombuffer(raw, dtype="<f4", count=nrows * width, offset=at).reshape(nrows, width)
    at += 4 * nrows * width
    coords = np.frombuffer(raw, dtype="<i4", count=3 * nrows, offset=at).reshape(nrows, 3)
    return FeatureSet(spec, rows.astype(np.float32), coords.astype(np.int64))


def read_featureset(path) -> FeatureSet:
    return parse_featureset(Path(path).read_bytes(), str(path))


def write_featureset_csv(fs: FeatureSet, path) -> None:
    cols = ["ix", "iy", "iz"] + [f"f{i}" for i in range(fs.width)]
    rows32 = np.asarray(fs.rows, dtype=np.float32)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for c, r in zip(fs.coords, rows32):
            fh.write(",".join([str(int(v)) for v in c] + [repr(float(v)) for v in r]) + "\n")
