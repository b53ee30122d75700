"""End-to-end experiment runs with reproducible provenance.

A run owns one fresh directory: scenes, config snapshot, checkpoint,
transcript, stats table and audit reports, all referenced from a manifest
carrying content checksums.  Reissuing the run with the same config and
seeds reproduces every artifact byte for byte.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .agents import save_checkpoint
from .analysis import (
    align_attributes,
    gold_similarity,
    referential_inconsistency,
    summarize,
    write_alignment,
    write_ri_report,
    write_similarity,
)
from .datasets import generate_shapes, load_feature_file, save_feature_file, split_train_test
from .game import write_transcript
from .numerics import RNG_ALGORITHM
from .training import train, write_stats

MANIFEST_NAME = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config: dict
    seed: int
    artifacts: dict  # name -> {"path": relative path, "sha256": hex digest}
    results: dict
    rng_algorithm: str = RNG_ALGORITHM
    package_version: str = __version__
    numpy_version: str = np.__version__
    created_utc: str = ""

    def to_json(self):
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _artifact(run_dir, name):
    return run_dir / name


def run_experiment(config, out_dir, scenes_path=None, progress=None):
    """Generate (or load) scenes, train, evaluate and audit, all under ``out_dir``.

    The directory must not already exist: a run never overwrites another.
    Any stage failure raises StageError naming the stage; artifacts written
    by earlier stages are left in place.
    """
    config.validate()
    run_dir = Path(out_dir)
    if run_dir.exists():
        raise StageError("setup", f"run directory {run_dir} already exists; runs are never overwritten")
    run_dir.mkdir(parents=True)

    artifacts = {}

    def register(name, filename):
        artifacts[name] = {"path": filename, "sha256": _sha256(run_dir / filename)}

    stage = "scenes"
    try:
        if scenes_path is None:
            scene_set = generate_shapes(
                config.n_scenes,
                feature_mode=config.feature_mode,
                dim=config.dim,
                noise_sigma=config.noise_sigma,
                seed=config.seed,
            )
        else:
            scene_set = load_feature_file(scenes_path)
            if scene_set.dim != config.dim:
                raise ValueError(
                    f"scene file has dim {scene_set.dim}, config expects {config.dim}"
                )
        if not scene_set.test_scenes():
            scene_set = split_train_test(scene_set, config.test_count, seed=config.seed)
        save_feature_file(scene_set, _artifact(run_dir, "scenes.bin"))
        register("scenes", "scenes.bin")
        config.to_file(_artifact(run_dir, "config.txt"))
        register("config", "config.txt")
    except Exception as e:
        raise StageError(stage, e) from e

    stage = "train"
    try:
        result = train(scene_set, config, progress=progress)
        save_checkpoint(
            _artifact(run_dir, "checkpoint.bin"),
            result.speaker,
            result.listener,
            metadata={"config": config.as_dict(), "rng_algorithm": RNG_ALGORITHM},
        )
        register("checkpoint", "checkpoint.bin")
        write_stats(_artifact(run_dir, "stats.csv"), result.stats)
        register("stats", "stats.csv")
        write_transcript(_artifact(run_dir, "transcript.tsv"), result.transcript.episodes)
        register("transcript", "transcript.tsv")
    except Exception as e:
        raise StageError(stage, e) from e

    stage = "analyze"
    try:
        names = scene_set.schema.attribute_names
        ri = referential_inconsistency(result.transcript, vocab_size=config.vocab_size)
        write_ri_report(_artifact(run_dir, "ri.csv"), ri)
        register("ri", "ri.csv")
        amap = align_attributes(result.transcript, scene_set, vocab_size=config.vocab_size)
        write_alignment(_artifact(run_dir, "alignment.csv"), amap, names)
        register("alignment", "alignment.csv")
        sim = gold_similarity(result.transcript, scene_set, vocab_size=config.vocab_size)
        write_similarity(_artifact(run_dir, "similarity.csv"), sim, names)
        register("similarity", "similarity.csv")
        summary = summarize(ri, amap, sim, names)
        summary += f"final held-out success: {result.final_heldout_success!r}\n"
        (run_dir / "summary.txt").write_text(summary, encoding="utf-8")
        register("summary", "summary.txt")
    except Exception as e:
        raise StageError(stage, e) from e

    stage = "manifest"
    try:
        manifest = RunManifest(
            config=config.as_dict(),
            seed=config.seed,
            artifacts=artifacts,
            results={
                "final_heldout_success": result.final_heldout_success,
                "ri_proportion_inconsistent": ri.proportion_inconsistent,
                "n_active_attributes": ri.n_active,
            },
            created_utc=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        )
        (run_dir / MANIFEST_NAME).write_text(manifest.to_json() + "\n", encoding="utf-8")
    except Exception as e:
        raise StageError(stage, e) from e
    return manifest
