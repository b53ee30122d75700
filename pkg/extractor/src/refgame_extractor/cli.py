"""Command-line feature extraction: images + scene pairs -> feature file."""

from __future__ import annotations

import argparse
import sys

from .extraction import ExtractionJob, extract, read_images_manifest, read_scenes_table


def build_parser():
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract ConvNet penultimate-layer vectors into a refgame feature file.",
    )
    parser.add_argument("--images", required=True,
                        help="object table: object_id<TAB>image_path[<TAB>attr,indices]")
    parser.add_argument("--scenes", required=True,
                        help="scene table: scene_id<TAB>referent_id<TAB>context_id[<TAB>gold,indices]")
    parser.add_argument("--model", default="vgg16", choices=["vgg16", "alexnet"])
    parser.add_argument("--weights", help="state-dict path (seeded random init when omitted)")
    parser.add_argument("--weights-seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--attribute-names",
                        help="optional file with one gold-attribute name per line")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        names = None
        if args.attribute_names:
            with open(args.attribute_names, "r", encoding="utf-8") as f:
                names = [line.strip() for line in f if line.strip()]
        job = ExtractionJob(
            objects=read_images_manifest(args.images),
            scenes=read_scenes_table(args.scenes),
            model=args.model,
            weights=args.weights,
            weights_seed=args.weights_seed,
            output=args.out,
            batch_size=args.batch_size,
            attribute_names=names,
        )
        report = extract(job)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error [extract] {e}", file=sys.stderr)
        return 1
    print(f"wrote {report['extracted_scenes']} scenes (dim={report['dim']}) to {args.out}")
    if report["skipped_images"]:
        print(f"skipped {len(report['skipped_images'])} unreadable images, "
              f"dropped {len(report['dropped_scenes'])} scenes (see sidecar report)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
