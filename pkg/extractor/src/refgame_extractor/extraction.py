"""Penultimate-layer feature extraction for real-image scene files.

The job reads two text tables:

* the images manifest: ``object_id <TAB> image_path [<TAB> attributes]``
  where attributes are comma-separated gold-attribute indices of the object;
* the scenes table: ``scene_id <TAB> referent_id <TAB> context_id [<TAB> gold]``.
  When a scene omits its gold annotation it is derived as the set difference
  of the two objects' attribute lists (both must then carry attributes).

Each unique image is decoded, resized, normalized, and pushed through the
backbone once; vectors are cached by path, so repeated references to one
image are bitwise identical.  Unreadable images are skipped with a warning,
recorded in a sidecar report next to the output file, and every scene
touching a skipped object is dropped (also recorded).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .feature_file import SceneRecord, write_feature_file

#: Penultimate fully connected width per supported backbone.
MODEL_DIMS = {"vgg16": 4096, "alexnet": 4096}

_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass
class ImageObject:
    object_id: int
    path: str
    attributes: tuple | None = None


@dataclass
class ScenePair:
    scene_id: int
    referent_id: int
    context_id: int
    gold: tuple | None = None


@dataclass
class ExtractionJob:
    objects: list
    scenes: list
    model: str = "vgg16"
    weights: str | None = None  # state-dict path; seeded random init when absent
    weights_seed: int = 0
    output: str = "features.bin"
    batch_size: int = 8
    attribute_names: list | None = None


def read_images_manifest(path):
    objects = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise ValueError(f"images manifest line {lineno}: expected 2 or 3 fields")
            object_id = int(fields[0])
            if object_id in seen:
                raise ValueError(f"images manifest line {lineno}: duplicate object id {object_id}")
            seen.add(object_id)
            attrs = None
            if len(fields) == 3 and fields[2].strip():
                attrs = tuple(int(x) for x in fields[2].split(","))
            objects.append(ImageObject(object_id, fields[1], attrs))
    return objects


def read_scenes_table(path):
    scenes = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ValueError(f"scenes table line {lineno}: expected 3 or 4 fields")
            scene_id = int(fields[0])
            if scene_id in seen:
                raise ValueError(f"scenes table line {lineno}: duplicate scene id {scene_id}")
            seen.add(scene_id)
            gold = None
            if len(fields) == 4 and fields[3].strip():
                gold = tuple(int(x) for x in fields[3].split(","))
            scenes.append(ScenePair(scene_id, int(fields[1]), int(fields[2]), gold))
    return scenes


def build_model(name, weights=None, weights_seed=0):
    """Backbone truncated at its penultimate fully connected activation."""
    import torchvision.models as models

    if name not in MODEL_DIMS:
        raise ValueError(f"unsupported model {name!r}, expected one of {sorted(MODEL_DIMS)}")
    torch.manual_seed(weights_seed)
    if name == "vgg16":
        net = models.vgg16(weights=None)
        head_end = 5  # linear, relu, dropout, linear, relu
    else:
        net = models.alexnet(weights=None)
        head_end = 6  # dropout, linear, relu, dropout, linear, relu
    if weights is not None:
        state = torch.load(weights, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    net.eval()

    head = torch.nn.Sequential(*list(net.classifier.children())[:head_end])

    def forward(batch):
        with torch.no_grad():
            x = net.features(batch)
            x = net.avgpool(x)
            x = torch.flatten(x, 1)
            return head(x)

    return forward, MODEL_DIMS[name]


def load_image(path):
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((224, 224), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - _IMAGENET_MEAN) / _IMAGENET_STD
    return torch.from_numpy(arr.transpose(2, 0, 1))


def extract_vectors(objects, forward, dim, batch_size=8):
    """One vector per unique readable image path; returns (vectors, skipped)."""
    paths = []
    for obj in objects:
        if obj.path not in paths:
            paths.append(obj.path)
    tensors = {}
    skipped = []
    for path in paths:
        try:
            tensors[path] = load_image(path)
        except OSError as e:
            warnings.warn(f"skipping unreadable image {path}: {e}", stacklevel=2)
            skipped.append(path)
    vectors = {}
    good = [p for p in paths if p in tensors]
    for start in range(0, len(good), batch_size):
        chunk = good[start : start + batch_size]
        batch = torch.stack([tensors[p] for p in chunk])
        out = forward(batch).numpy().astype(np.float32)
        if out.shape[1] != dim:
            raise RuntimeError(f"model produced {out.shape[1]}-D vectors, expected {dim}")
        for p, vec in zip(chunk, out):
            vectors[p] = vec
    return vectors, skipped


def extract(job):
    """Run the whole job; returns the sidecar report as a dict.

    Writes the feature file in the refgame binary format plus a
    ``<output>.report.json`` sidecar listing skipped images and dropped
    scenes.  Deterministic given the model weights.
    """
    forward, dim = build_model(job.model, job.weights, job.weights_seed)
    vectors, skipped_paths = extract_vectors(job.objects, forward, dim, job.batch_size)

    by_id = {obj.object_id: obj for obj in job.objects}
    skipped_objects = [obj.object_id for obj in job.objects if obj.path in skipped_paths]

    records = []
    dropped_scenes = []
    n_attr = 0
    for scene in job.scenes:
        ref = by_id.get(scene.referent_id)
        ctx = by_id.get(scene.context_id)
        if ref is None or ctx is None:
            raise ValueError(f"scene {scene.scene_id} references an unknown object id")
        if ref.object_id in skipped_objects or ctx.object_id in skipped_objects:
            dropped_scenes.append(scene.scene_id)
            continue
        gold = scene.gold
        if gold is None:
            if ref.attributes is None or ctx.attributes is None:
                raise ValueError(
                    f"scene {scene.scene_id} has no gold annotation and its objects "
                    "carry no attribute lists to derive one from"
                )
            gold = tuple(sorted(set(ref.attributes) - set(ctx.attributes)))
        n_attr = max([n_attr, *(g + 1 for g in gold)]) if gold else n_attr
        records.append(
            SceneRecord(
                scene_id=scene.scene_id,
                referent_id=ref.object_id,
                context_id=ctx.object_id,
                referent_feature=vectors[ref.path],
                context_feature=vectors[ctx.path],
                gold=gold,
            )
        )

    if job.attribute_names is not None:
        names = list(job.attribute_names)
        if n_attr > len(names):
            raise ValueError(f"gold indices reach {n_attr} but only {len(names)} names given")
    else:
        names = [f"attr{i}" for i in range(max(n_attr, 1))]
    write_feature_file(job.output, dim, [("attributes", names)], records)

    report = {
        "model": job.model,
        "dim": dim,
        "extracted_scenes": len(records),
        "skipped_images": sorted(skipped_paths),
        "skipped_objects": sorted(skipped_objects),
        "dropped_scenes": sorted(dropped_scenes),
    }
    Path(str(job.output) + ".report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
