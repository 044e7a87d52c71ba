#!/usr/bin/env python3
"""Full-data reproduction driver: export one MVTec AD category with the
pretrained backbone, train with reference defaults, and evaluate.

Requires the MVTec AD dataset on disk and network access the first time
the pretrained weights are fetched. Runtime is hours-scale on CPU.

    python scripts/reproduce_mvtec.py --dataset-root /data/mvtec_ad \
        --category carpet --out runs/carpet

Expected outcome on "carpet" with defaults: image AUROC >= 0.98 and pixel
AUROC >= 0.975.
"""

import argparse
import json
import subprocess
import sys


def run(cmd):
    print("+", " ".join(cmd), flush=True)
    subprocess.run(cmd, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset-root", required=True)
    parser.add_argument("--category", default="carpet")
    parser.add_argument("--out", required=True)
    parser.add_argument("--epochs", type=int, default=400)
    parser.add_argument("--weights", default="imagenet")
    parser.add_argument("--skip-export", action="store_true",
                        help="reuse an existing export under <out>/features")
    args = parser.parse_args()

    features = f"{args.out}/features"
    if not args.skip_export:
        run([
            sys.executable, "-m", "featexport.cli",
            "--dataset-root", args.dataset_root,
            "--category", args.category,
            "--out", features,
            "--backbone", "wide_resnet50_2",
            "--weights", args.weights,
            "--levels", "2,3",
        ])
    run([
        sys.executable, "-m", "featad.cli", "train",
        "--manifest", f"{features}/train.json",
        "--out", f"{args.out}/run",
        "--levels", "2,3",
        "--epochs", str(args.epochs),
    ])
    run([
        sys.executable, "-m", "featad.cli", "eval",
        "--checkpoint", f"{args.out}/run",
        "--manifest", f"{features}/test.json",
        "--out", f"{args.out}/eval",
        "--category", args.category,
    ])
    with open(f"{args.out}/eval/metrics.json") as fh:
        metrics = json.load(fh)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    ok = metrics["image_auroc"] >= 0.98 and metrics["pixel_auroc"] >= 0.975
    print("reproduction target:", "MET" if ok else "NOT MET")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
