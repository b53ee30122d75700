"""Writer for the refgame binary feature-file format.

Implemented against the documented byte layout (magic ``RFGSCNE1``,
version 1), independently of the refgame package: the file format is the
interface between the two.

Layout, all little-endian:
  magic 8 bytes, version u32, dim u32, n_scenes u64,
  n_groups u32, per group: name (u32 length + utf-8), n_values u32,
  per value: name (u32 length + utf-8);
  per scene: scene_id u64, split u8 (0 unsplit / 1 train / 2 test),
  referent_id u64, context_id u64,
  referent value indices (u32 count, 0 = unknown, + count x u32),
  context value indices (same), referent feature dim x f32,
  context feature dim x f32, gold (u32 count + count x u32).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"RFGSCNE1"
VERSION = 1

SPLIT_CODES = {"unsplit": 0, "train": 1, "test": 2}


@dataclass
class SceneRecord:
    scene_id: int
    referent_id: int
    context_id: int
    referent_feature: np.ndarray  # (dim,) float32
    context_feature: np.ndarray
    gold: tuple  # sorted gold attribute indices
    referent_values: tuple | None = None
    context_values: tuple | None = None
    split: str = "unsplit"


def _write_str(out, s):
    data = s.encode("utf-8")
    out.write(struct.pack("<I", len(data)))
    out.write(data)


def write_feature_file(path, dim, schema_groups, records):
    """Write scene records; ``schema_groups`` is [(group_name, [value names])]."""
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<IIQ", VERSION, dim, len(records)))
        out.write(struct.pack("<I", len(schema_groups)))
        for name, values in schema_groups:
            _write_str(out, name)
            out.write(struct.pack("<I", len(values)))
            for v in values:
                _write_str(out, v)
        for rec in records:
            out.write(struct.pack("<QB", rec.scene_id, SPLIT_CODES[rec.split]))
            out.write(struct.pack("<QQ", rec.referent_id, rec.context_id))
            for values in (rec.referent_values, rec.context_values):
                if values is None:
                    out.write(struct.pack("<I", 0))
                else:
                    out.write(struct.pack("<I", len(values)))
                    out.write(struct.pack(f"<{len(values)}I", *values))
            for feat in (rec.referent_feature, rec.context_feature):
                arr = np.ascontiguousarray(feat, dtype="<f4")
                if arr.shape != (dim,):
                    raise ValueError(f"feature shape {arr.shape} does not match dim {dim}")
                out.write(arr.tobytes())
            gold = sorted(rec.gold)
            out.write(struct.pack("<I", len(gold)))
            if gold:
                out.write(struct.pack(f"<{len(gold)}I", *gold))
