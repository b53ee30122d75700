"""Scene generation and feature-file I/O.

A scene pairs a referent object with a context object.  Each object carries
a feature vector (synthetic here, or externally extracted for real images)
and, when known, one value per attribute group.  The gold annotation of a
scene is the set difference of the two objects' attribute bundles: exactly
the attributes that are true of the referent but not of the context.  Pairs
whose bundles fully overlap would have an empty annotation and are never
emitted.

Feature files come in two flavours sharing one logical schema: a binary
format (magic ``RFGSCNE1``) for real runs and a tab-separated text format
for hand-written fixtures.  Both round-trip exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import make_rng, spawn_rngs, RNG_ALGORITHM

SPLIT_NAMES = ("unsplit", "train", "test")

FEATURE_MODES = ("one-hot-noisy", "random-projection")


class FeatureFileError(ValueError):
    """A feature file violated the documented format."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute groups; every object takes exactly one value per group.

    Attribute indices are global: group 0's values come first, then group 1's,
    and so on.  Value names must be unique across groups so that an attribute
    name alone identifies an index.
    """

    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        if not self.groups:
            raise ValueError("schema needs at least one attribute group")
        names = [v for _, values in self.groups for v in values]
        if not names:
            raise ValueError("schema has no attribute values")
        if len(set(names)) != len(names):
            raise ValueError("attribute value names must be unique across groups")

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def group_sizes(self):
        return tuple(len(values) for _, values in self.groups)

    @property
    def group_offsets(self):
        offsets = []
        total = 0
        for size in self.group_sizes:
            offsets.append(total)
            total += size
        return tuple(offsets)

    @property
    def n_attributes(self):
        return sum(self.group_sizes)

    @property
    def attribute_names(self):
        return tuple(v for _, values in self.groups for v in values)

    def attribute_index(self, value_name):
        try:
            return self.attribute_names.index(value_name)
        except ValueError:
            raise KeyError(f"unknown attribute value {value_name!r}") from None


#: Stock single-object schema: 5 groups, 18 values in total.
DEFAULT_SCHEMA = AttributeSchema(
    groups=(
        ("shape", ("triangle", "square", "circle")),
        ("border-color", ("fuchsia", "indigo", "crimson", "cyan", "black", "limegreen", "brown", "gray")),
        ("horizontal-position", ("up", "down")),
        ("vertical-position", ("right", "left")),
        ("shape-size", ("small", "medium", "big")),
    )
)


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    """One object: a value index per schema group plus its feature vector.

    ``values`` is None for objects loaded from external feature files, where
    only the vectors and the scene-level gold annotation are known.
    """

    values: tuple[int, ...] | None
    feature: np.ndarray  # (D,) float32

    def __eq__(self, other):
        if not isinstance(other, ObjectSpec):
            return NotImplemented
        return self.values == other.values and np.array_equal(self.feature, other.feature)


@dataclass(frozen=True, eq=False)
class Scene:
    """A (referent, context) pair with its gold attribute annotation."""

    scene_id: int
    referent: ObjectSpec
    context: ObjectSpec
    gold_attributes: frozenset[int]
    referent_id: int
    context_id: int
    split: str = "unsplit"

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.referent == other.referent
            and self.context == other.context
            and self.gold_attributes == other.gold_attributes
            and self.referent_id == other.referent_id
            and self.context_id == other.context_id
            and self.split == other.split
        )


@dataclass(eq=False)
class SceneSet:
    """An immutable collection of scenes plus schema and provenance."""

    scenes: tuple[Scene, ...]
    schema: AttributeSchema
    dim: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scenes = tuple(self.scenes)

    def __len__(self):
        return len(self.scenes)

    @property
    def n_attributes(self):
        return self.schema.n_attributes

    def train_scenes(self):
        return [s for s in self.scenes if s.split == "train"]

    def test_scenes(self):
        return [s for s in self.scenes if s.split == "test"]

    def scene_index(self):
        """Map scene id -> Scene."""
        return {s.scene_id: s for s in self.scenes}

    def __eq__(self, other):
        if not isinstance(other, SceneSet):
            return NotImplemented
        # provenance is intentionally excluded: loading a file records the
        # file path, not the generator seed it came from
        return (
            self.schema == other.schema
            and self.dim == other.dim
            and len(self.scenes) == len(other.scenes)
            and all(a == b for a, b in zip(self.scenes, other.scenes))
        )


def attributes_of(obj, schema):
    """Global attribute indices of an object: one per schema group."""
    if obj.values is None:
        raise ValueError("object has no attribute values (loaded from an external feature file)")
    if len(obj.values) != schema.n_groups:
        raise ValueError(f"object has {len(obj.values)} values, schema has {schema.n_groups} groups")
    offsets = schema.group_offsets
    sizes = schema.group_sizes
    out = set()
    for g, v in enumerate(obj.values):
        if not 0 <= v < sizes[g]:
            raise ValueError(f"value index {v} out of range for group {schema.groups[g][0]!r}")
        out.add(offsets[g] + v)
    return frozenset(out)


def object_code(values, schema):
    """Mixed-radix code identifying an attribute bundle.

    Identical bundles share one id, so repeated specs aggregate when the
    analysis builds per-object activation sets.
    """
    code = 0
    for v, size in zip(values, schema.group_sizes):
        code = code * size + v
    return code


def _bundle_vector(values, schema):
    vec = np.zeros(schema.n_attributes, dtype=np.float64)
    for g, v in enumerate(values):
        vec[schema.group_offsets[g] + v] = 1.0
    return vec


def generate_shapes(
    n_scenes,
    *,
    schema=DEFAULT_SCHEMA,
    feature_mode="one-hot-noisy",
    dim=64,
    noise_sigma=0.1,
    seed=0,
):
    """Generate synthetic single-object scenes with gold annotations.

    Feature modes:

    * ``one-hot-noisy``: the binary attribute-bundle vector, zero-padded to
      ``dim``, plus i.i.d. Gaussian noise.  Requires ``dim`` >= total
      attribute count.
    * ``random-projection``: the bundle mapped through a fixed seeded
      ``dim x n_attributes`` Gaussian projection (scaled by 1/sqrt(n)) plus
      noise, emulating distributed visual codes.

    Referent and context are sampled independently and uniformly over the
    attribute space; pairs with identical bundles are rejected and resampled,
    so every scene has a non-empty gold annotation.  Same seed, same output,
    bit for bit.
    """
    if n_scenes <= 0:
        raise ValueError("n_scenes must be positive")
    if feature_mode not in FEATURE_MODES:
        raise ValueError(f"unknown feature_mode {feature_mode!r}, expected one of {FEATURE_MODES}")
    n_attr = schema.n_attributes
    if feature_mode == "one-hot-noisy" and dim < n_attr:
        raise ValueError(
            f"one-hot-noisy features need dim >= {n_attr} (schema attribute count), got {dim}"
        )

    proj_rng, scene_rng = spawn_rngs(seed, 2)
    projection = None
    if feature_mode == "random-projection":
        projection = proj_rng.normal(size=(dim, n_attr)) / math.sqrt(n_attr)

    sizes = schema.group_sizes

    def draw_values():
        return tuple(int(scene_rng.integers(0, size)) for size in sizes)

    def synthesize(values):
        bundle = _bundle_vector(values, schema)
        if feature_mode == "one-hot-noisy":
            base = np.zeros(dim, dtype=np.float64)
            base[:n_attr] = bundle
        else:
            base = projection @ bundle
        feat = base + scene_rng.normal(0.0, noise_sigma, size=dim)
        return feat.astype(np.float32)

    scenes = []
    for scene_id in range(n_scenes):
        while True:
            ref_values = draw_values()
            ctx_values = draw_values()
            if ref_values != ctx_values:
                break
        referent = ObjectSpec(ref_values, synthesize(ref_values))
        context = ObjectSpec(ctx_values, synthesize(ctx_values))
        gold = attributes_of(referent, schema) - attributes_of(context, schema)
        scenes.append(
            Scene(
                scene_id=scene_id,
                referent=referent,
                context=context,
                gold_attributes=gold,
                referent_id=object_code(ref_values, schema),
                context_id=object_code(ctx_values, schema),
            )
        )

    provenance = {
        "kind": "generated",
        "seed": seed,
        "feature_mode": feature_mode,
        "noise_sigma": noise_sigma,
        "rng_algorithm": RNG_ALGORITHM,
    }
    return SceneSet(scenes=tuple(scenes), schema=schema, dim=dim, provenance=provenance)


def split_train_test(scene_set, test_count, seed=0):
    """Label scenes train/test with a deterministic shuffled split.

    The test split holds exactly ``test_count`` scenes and never shares a
    (referent, context) pair with the train split: duplicated pairs travel
    together.  Individual objects may appear on both sides.
    """
    total = len(scene_set)
    if not 0 < test_count < total:
        raise ValueError(f"test_count must be in (0, {total}), got {test_count}")

    groups = {}  # ordered pair key -> scene ids
    order = []
    for s in scene_set.scenes:
        key = (s.referent_id, s.context_id)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s.scene_id)

    rng = make_rng(seed)
    perm = rng.permutation(len(order))

    test_ids = set()
    taken = 0
    for idx in perm:
        if taken == test_count:
            break
        ids = groups[order[idx]]
        if taken + len(ids) <= test_count:
            test_ids.update(ids)
            taken += len(ids)
    if taken != test_count:
        raise ValueError(
            f"could not assemble a test split of exactly {test_count} scenes "
            f"without splitting a duplicated pair across splits (reached {taken})"
        )

    scenes = tuple(
        replace(s, split="test" if s.scene_id in test_ids else "train") for s in scene_set.scenes
    )
    provenance = dict(scene_set.provenance)
    provenance.update({"split_seed": seed, "test_count": test_count})
    return SceneSet(scenes=scenes, schema=scene_set.schema, dim=scene_set.dim, provenance=provenance)


# ---------------------------------------------------------------------------
# Feature files.
#
# Binary layout (all little-endian):
#   magic           8 bytes  b"RFGSCNE1"
#   version         u32      currently 1
#   dim             u32
#   n_scenes        u64
#   n_groups        u32
#   per group:      name (u32 length + utf-8), n_values u32,
#                   then each value name (u32 length + utf-8)
#   per scene:
#     scene_id      u64
#     split         u8       0 unsplit / 1 train / 2 test
#     referent_id   u64
#     context_id    u64
#     ref values    u32 count (0 = unknown) + count x u32
#     ctx values    u32 count + count x u32
#     ref feature   dim x f32
#     ctx feature   dim x f32
#     gold          u32 count + count x u32
#
# The text sibling is one scene per line, tab-separated:
#   scene_id  split  referent_id  context_id  ref_values  ctx_values
#   ref_feature  ctx_feature  gold
# where list fields are comma-separated and "-" marks unknown values.
# Header lines start with "#" and carry dim and the schema.
# ---------------------------------------------------------------------------

_MAGIC = b"RFGSCNE1"
_VERSION = 1


def _write_str(out, s):
    data = s.encode("utf-8")
    out.write(struct.pack("<I", len(data)))
    out.write(data)


class _Reader:
    def __init__(self, f):
        self.f = f
        self.offset = 0

    def read(self, n, what):
        data = self.f.read(n)
        if len(data) != n:
            raise FeatureFileError(f"truncated file while reading {what} at byte {self.offset}")
        self.offset += n
        return data

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.read(size, what))

    def read_str(self, what):
        (n,) = self.unpack("<I", what)
        return self.read(n, what).decode("utf-8")


def save_feature_file(scene_set, path, format="binary"):
    """Write a SceneSet to ``path`` in the binary or text feature format."""
    if format == "binary":
        _save_binary(scene_set, path)
    elif format == "text":
        _save_text(scene_set, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def _save_binary(scene_set, path):
    with open(path, "wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<IIQ", _VERSION, scene_set.dim, len(scene_set)))
        out.write(struct.pack("<I", scene_set.schema.n_groups))
        for name, values in scene_set.schema.groups:
            _write_str(out, name)
            out.write(struct.pack("<I", len(values)))
            for v in values:
                _write_str(out, v)
        for s in scene_set.scenes:
            out.write(struct.pack("<QB", s.scene_id, SPLIT_NAMES.index(s.split)))
            out.write(struct.pack("<QQ", s.referent_id, s.context_id))
            for values in (s.referent.values, s.context.values):
                if values is None:
                    out.write(struct.pack("<I", 0))
                else:
                    out.write(struct.pack("<I", len(values)))
                    out.write(struct.pack(f"<{len(values)}I", *values))
            out.write(np.asarray(s.referent.feature, dtype="<f4").tobytes())
            out.write(np.asarray(s.context.feature, dtype="<f4").tobytes())
            gold = sorted(s.gold_attributes)
            out.write(struct.pack("<I", len(gold)))
            if gold:
                out.write(struct.pack(f"<{len(gold)}I", *gold))


def _format_floats(vec):
    return ",".join(repr(float(x)) for x in np.asarray(vec, dtype=np.float64))


def _save_text(scene_set, path):
    with open(path, "w", encoding="utf-8") as out:
        out.write("# refgame-features v1\n")
        out.write(f"# dim={scene_set.dim}\n")
        for name, values in scene_set.schema.groups:
            out.write(f"# group {name}: {','.join(values)}\n")
        out.write(
            "# columns: scene_id split referent_id context_id ref_values ctx_values"
            " ref_feature ctx_feature gold\n"
        )
        for s in scene_set.scenes:
            ref_vals = "-" if s.referent.values is None else ",".join(map(str, s.referent.values))
            ctx_vals = "-" if s.context.values is None else ",".join(map(str, s.context.values))
            gold = ",".join(map(str, sorted(s.gold_attributes)))
            out.write(
                "\t".join(
                    [
                        str(s.scene_id),
                        s.split,
                        str(s.referent_id),
                        str(s.context_id),
                        ref_vals,
                        ctx_vals,
                        _format_floats(s.referent.feature),
                        _format_floats(s.context.feature),
                        gold,
                    ]
                )
                + "\n"
            )


def load_feature_file(path):
    """Load a SceneSet from a binary or text feature file.

    The format is sniffed from the leading bytes.  Gold attributes are read
    from the file, never recomputed.  Violations (truncation, non-finite
    floats, duplicate scene ids, out-of-range indices) raise
    FeatureFileError naming the offending record.
    """
    with open(path, "rb") as f:
        head = f.read(len(_MAGIC))
    if head == _MAGIC:
        return _load_binary(path)
    return _load_text(path)


def _check_scene(scene_id, record, ref_feat, ctx_feat, gold, n_attr, seen_ids):
    if scene_id in seen_ids:
        raise FeatureFileError(f"duplicate scene id {scene_id} at record {record}")
    seen_ids.add(scene_id)
    if not np.isfinite(ref_feat).all() or not np.isfinite(ctx_feat).all():
        raise FeatureFileError(f"non-finite feature values at record {record}")
    for g in gold:
        if not 0 <= g < n_attr:
            raise FeatureFileError(f"gold attribute index {g} out of range at record {record}")


def _load_binary(path):
    with open(path, "rb") as f:
        r = _Reader(f)
        magic = r.read(len(_MAGIC), "magic")
        if magic != _MAGIC:
            raise FeatureFileError(f"bad magic {magic!r}")
        version, dim, n_scenes = r.unpack("<IIQ", "header")
        if version != _VERSION:
            raise FeatureFileError(f"unsupported version {version}")
        (n_groups,) = r.unpack("<I", "schema")
        groups = []
        for _ in range(n_groups):
            name = r.read_str("group name")
            (n_values,) = r.unpack("<I", "group size")
            values = tuple(r.read_str("value name") for _ in range(n_values))
            groups.append((name, values))
        schema = AttributeSchema(groups=tuple(groups))
        n_attr = schema.n_attributes

        scenes = []
        seen_ids = set()
        for record in range(n_scenes):
            try:
                scene_id, split_code = r.unpack("<QB", f"record {record}")
                referent_id, context_id = r.unpack("<QQ", f"record {record}")
                values = []
                for _ in range(2):
                    (count,) = r.unpack("<I", f"record {record}")
                    if count == 0:
                        values.append(None)
                    else:
                        vals = r.unpack(f"<{count}I", f"record {record}")
                        values.append(tuple(vals))
                ref_feat = np.frombuffer(r.read(4 * dim, f"record {record}"), dtype="<f4").copy()
                ctx_feat = np.frombuffer(r.read(4 * dim, f"record {record}"), dtype="<f4").copy()
                (n_gold,) = r.unpack("<I", f"record {record}")
                gold = r.unpack(f"<{n_gold}I", f"record {record}") if n_gold else ()
            except FeatureFileError as e:
                raise FeatureFileError(
                    f"expected {n_scenes} records but the file ends inside record {record}: {e}"
                ) from None
            if split_code >= len(SPLIT_NAMES):
                raise FeatureFileError(f"invalid split code {split_code} at record {record}")
            _check_scene(scene_id, record, ref_feat, ctx_feat, gold, n_attr, seen_ids)
            scenes.append(
                Scene(
                    scene_id=scene_id,
                    referent=ObjectSpec(values[0], ref_feat),
                    context=ObjectSpec(values[1], ctx_feat),
                    gold_attributes=frozenset(gold),
                    referent_id=referent_id,
                    context_id=context_id,
                    split=SPLIT_NAMES[split_code],
                )
            )
        trailing = f.read(1)
        if trailing:
            raise FeatureFileError(f"trailing data after the declared {n_scenes} records")

    return SceneSet(
        scenes=tuple(scenes),
        schema=schema,
        dim=dim,
        provenance={"kind": "file", "path": str(path)},
    )


def _parse_values(text):
    if text == "-":
        return None
    return tuple(int(x) for x in text.split(","))


def _load_text(path):
    dim = None
    groups = []
    scenes = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as f:
        record = 0
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("dim="):
                    dim = int(body[4:])
                elif body.startswith("group "):
                    name, _, values = body[6:].partition(":")
                    groups.append((name.strip(), tuple(v.strip() for v in values.split(","))))
                continue
            if dim is None or not groups:
                raise FeatureFileError(f"scene data before dim/schema headers at line {lineno}")
            fields = line.split("\t")
            if len(fields) != 9:
                raise FeatureFileError(f"expected 9 tab-separated fields at line {lineno}, got {len(fields)}")
            schema = AttributeSchema(groups=tuple(groups))
            try:
                scene_id = int(fields[0])
                split = fields[1]
                referent_id = int(fields[2])
                context_id = int(fields[3])
                ref_values = _parse_values(fields[4])
                ctx_values = _parse_values(fields[5])
                ref_feat = np.array([float(x) for x in fields[6].split(",")], dtype=np.float32)
                ctx_feat = np.array([float(x) for x in fields[7].split(",")], dtype=np.float32)
                gold = tuple(int(x) for x in fields[8].split(",")) if fields[8] else ()
            except ValueError as e:
                raise FeatureFileError(f"malformed record {record} at line {lineno}: {e}") from None
            if split not in SPLIT_NAMES:
                raise FeatureFileError(f"invalid split {split!r} at line {lineno}")
            if ref_feat.size != dim or ctx_feat.size != dim:
                raise FeatureFileError(
                    f"feature length {ref_feat.size}/{ctx_feat.size} does not match dim={dim}"
                    f" at line {lineno}"
                )
            _check_scene(scene_id, record, ref_feat, ctx_feat, gold, schema.n_attributes, seen_ids)
            scenes.append(
                Scene(
                    scene_id=scene_id,
                    referent=ObjectSpec(ref_values, ref_feat),
                    context=ObjectSpec(ctx_values, ctx_feat),
                    gold_attributes=frozenset(gold),
                    referent_id=referent_id,
                    context_id=context_id,
                    split=split,
                )
            )
            record += 1
    if dim is None or not groups:
        raise FeatureFileError("missing dim/schema headers")
    return SceneSet(
        scenes=tuple(scenes),
        schema=AttributeSchema(groups=tuple(groups)),
        dim=dim,
        provenance={"kind": "file", "path": str(path)},
    )
