"""Command line for the feature exporter."""

import argparse
import sys

from .backbone import available_backbones
from .export import ExportJob, export


def build_parser():
    parser = argparse.ArgumentParser(
        prog="featexport",
        description="Export pretrained-backbone features of an MVTec-AD-style "
                    "dataset into engine-ready tensor files.",
    )
    parser.add_argument("--dataset-root", required=True)
    parser.add_argument("--category", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--backbone", default="wide_resnet50_2",
                        choices=available_backbones())
    parser.add_argument(
        "--weights", default="imagenet",
        help="'imagenet', 'none' (seeded random init), or a state-dict path",
    )
    parser.add_argument("--levels", default="2,3",
                        help="comma-separated hierarchy levels")
    parser.add_argument("--image-size", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--force", action="store_true",
                        help="recompute files that already exist")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        levels = tuple(int(tok) for tok in args.levels.split(",") if tok)
    except ValueError:
        print(f"bad --levels value {args.levels!r}", file=sys.stderr)
        return 2
    job = ExportJob(
        dataset_root=args.dataset_root,
        category=args.category,
        out_dir=args.out,
        backbone=args.backbone,
        weights=args.weights,
        levels=levels,
        image_size=args.image_size,
        seed=args.seed,
        force=args.force,
    )
    try:
        train_manifest, test_manifest, report = export(job)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 3
    print(f"train manifest: {train_manifest}")
    print(f"test manifest:  {test_manifest}")
    print(f"tensors written: {report.written}, reused: {report.skipped}")
    for line in report.errors:
        print(f"error: {line}", file=sys.stderr)
    return 0 if report.ok() else 3


if __name__ == "__main__":
    sys.exit(main())
