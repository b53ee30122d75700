"""Command-line entry point: gen-shapes, train, eval, analyze, run."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .agents import load_checkpoint, save_checkpoint
from .analysis import (
    align_attributes,
    gold_similarity,
    referential_inconsistency,
    success_curve,
    summarize,
    write_alignment,
    write_curve,
    write_ri_report,
    write_similarity,
)
from .datasets import generate_shapes, load_feature_file, save_feature_file, split_train_test
from .game import accumulate_transcript, read_transcript, write_transcript
from .manifest import StageError, run_experiment
from .numerics import make_rng
from .training import TrainConfig, evaluate, read_stats, train, write_stats


def _cmd_gen_shapes(args):
    scene_set = generate_shapes(
        args.n,
        feature_mode=args.feature_mode,
        dim=args.dim,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    save_feature_file(scene_set, args.out)
    print(f"wrote {len(scene_set)} scenes (dim={scene_set.dim}) to {args.out}")
    return 0


def _load_config(args):
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config.validate()


def _cmd_train(args):
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.scenes:
        scene_set = load_feature_file(args.scenes)
    else:
        scene_set = generate_shapes(
            config.n_scenes, feature_mode=config.feature_mode, dim=config.dim,
            noise_sigma=config.noise_sigma, seed=config.seed,
        )
    if not scene_set.test_scenes():
        scene_set = split_train_test(scene_set, config.test_count, seed=config.seed)

    def progress(point):
        print(f"iteration {point.iteration}: heldout success {point.heldout_success:.3f}")

    result = train(scene_set, config, progress=progress)
    save_checkpoint(out / "checkpoint.bin", result.speaker, result.listener,
                    metadata={"config": config.as_dict()})
    write_stats(out / "stats.csv", result.stats)
    write_transcript(out / "transcript.tsv", result.transcript.episodes)
    save_feature_file(scene_set, out / "scenes.bin")
    print(f"final held-out success: {result.final_heldout_success:.3f}")
    return 0


def _cmd_eval(args):
    speaker, listener, _ = load_checkpoint(args.checkpoint)
    scene_set = load_feature_file(args.scenes)
    scenes = {
        "test": scene_set.test_scenes(),
        "train": scene_set.train_scenes(),
        "all": list(scene_set.scenes),
    }[args.split]
    if not scenes:
        raise ValueError(f"scene file has no {args.split} scenes")
    rate = evaluate(speaker, listener, scenes, mode=args.mode, rng=make_rng(args.seed))
    print(f"success rate over {len(scenes)} scenes ({args.mode}): {rate:.4f}")
    return 0


def _cmd_analyze(args):
    if args.metric == "curve":
        if not args.stats:
            raise ValueError("--stats is required for the curve metric")
        stats = read_stats(args.stats)
        curve = success_curve(stats, smooth_window=args.smooth)
        write_curve(args.out, curve)
        print(f"wrote {len(curve)} curve points to {args.out}")
        return 0

    if not args.transcript or not args.scenes:
        raise ValueError("--transcript and --scenes are required for this metric")
    episodes = read_transcript(args.transcript)
    scene_set = load_feature_file(args.scenes)
    transcript = accumulate_transcript(episodes, scene_set)
    names = scene_set.schema.attribute_names
    if args.metric == "ri":
        report = referential_inconsistency(transcript, vocab_size=args.vocab_size)
        write_ri_report(args.out, report)
        print(summarize(report=report), end="")
    elif args.metric == "align":
        amap = align_attributes(transcript, scene_set, vocab_size=args.vocab_size)
        write_alignment(args.out, amap, names)
        print(summarize(amap=amap, attribute_names=names), end="")
    elif args.metric == "sim":
        categories = _read_categories(args.categories) if args.categories else None
        sim = gold_similarity(transcript, scene_set, vocab_size=args.vocab_size,
                              categories=categories)
        write_similarity(args.out, sim, names)
        print(summarize(sim=sim), end="")
    print(f"wrote {args.metric} table to {args.out}")
    return 0


def _read_categories(path):
    """Category file: one 'gold_index<TAB>category' pair per line."""
    categories = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            idx, _, cat = line.partition("\t")
            categories[int(idx)] = cat.strip()
    return categories


def _cmd_run(args):
    config = _load_config(args)

    def progress(point):
        print(f"iteration {point.iteration}: heldout success {point.heldout_success:.3f}")

    manifest = run_experiment(config, args.out, scenes_path=args.scenes,
                              progress=progress if args.verbose else None)
    print(f"run complete: {args.out}")
    for key, value in sorted(manifest.results.items()):
        print(f"  {key}: {value}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="refgame",
        description="Referential-game lab: generate scenes, train agents, audit protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-shapes", help="generate synthetic single-object scenes")
    p.add_argument("--n", type=int, required=True, help="number of scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-mode", default="one-hot-noisy",
                   choices=["one-hot-noisy", "random-projection"])
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_shapes)

    p = sub.add_parser("train", help="train both agents on a scene set")
    p.add_argument("--config", help="key = value config file (defaults apply if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenes", help="feature file to train on (generated if omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a scene file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--split", default="test", choices=["test", "train", "all"])
    p.add_argument("--mode", default="sampled", choices=["sampled", "greedy"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("analyze", help="audit a transcript or plot a success curve")
    p.add_argument("--transcript")
    p.add_argument("--scenes")
    p.add_argument("--metric", required=True, choices=["ri", "align", "sim", "curve"])
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="stats.csv (curve metric)")
    p.add_argument("--smooth", type=int, help="moving-average window for the curve")
    p.add_argument("--vocab-size", type=int, help="induced vocabulary size (inferred if omitted)")
    p.add_argument("--categories", help="gold-index<TAB>category file for similarity ordering")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("run", help="full pipeline: scenes, train, evaluate, audit")
    p.add_argument("--config", help="key = value config file (defaults apply if omitted)")
    p.add_argument("--out", required=True, help="fresh run directory")
    p.add_argument("--scenes", help="existing feature file instead of generation")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as e:
        print(f"error {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error [{args.command}] {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
