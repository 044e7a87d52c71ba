"""Command-line interface.

Subcommands: train, eval, score, synth, diagnose. Every run writes a
resolved-config snapshot next to its outputs. Exit codes: 0 success,
2 config error, 3 data error, 4 training divergence.
"""

import argparse
import csv
import json
import os
import sys

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .errors import ConfigError, DataError, DivergenceError
from .manifest import load_manifest
from . import synthbench

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4

_CONFIG_FLAGS = {
    "p": int,
    "beta": float,
    "alpha": float,
    "gamma": float,
    "delta": float,
    "batch_size": int,
    "epochs": int,
    "seed": int,
    "lr_projector": float,
    "lr_discriminator": float,
    "smoothing_sigma": float,
    "subsample_ratio": float,
    "gaussian_noise_std": float,
}


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON config file with base settings")
    for name, typ in _CONFIG_FLAGS.items():
        parser.add_argument(f"--{name.replace('_', '-')}", type=typ, default=None)
    parser.add_argument(
        "--levels", type=str, default=None,
        help="comma-separated hierarchy levels, e.g. 2,3",
    )
    parser.add_argument("--center", choices=["alignment", "average"], default=None)
    parser.add_argument("--synthesis", choices=["ray", "gaussian"], default=None)


def _resolve_config(args):
    base = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.levels is not None:
        try:
            overrides["levels"] = [int(tok) for tok in args.levels.split(",") if tok]
        except ValueError as exc:
            raise ConfigError(f"bad --levels value {args.levels!r}") from exc
    if args.center is not None:
        overrides["center_method"] = args.center
    if args.synthesis is not None:
        overrides["synthesis_method"] = args.synthesis
    return base.replace(**overrides) if overrides else base


def _find_checkpoint(path):
    if os.path.isfile(os.path.join(path, "header.json")):
        return path
    nested = os.path.join(path, "checkpoint")
    if os.path.isfile(os.path.join(nested, "header.json")):
        return nested
    raise DataError(f"no checkpoint found under {path}")


def cmd_train(args):
    from .report import render_loss_curves
    from .train import train

    config = _resolve_config(args)
    manifest = load_manifest(args.manifest)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    config.save(os.path.join(out_dir, "config.json"))
    log_path = os.path.join(out_dir, "training_log.csv")
    columns = [
        "epoch", "center_loss", "normal_loss", "anomaly_loss", "total",
        "mean_normal_conf", "mean_anomaly_conf",
    ]
    with open(log_path, "w", newline="", encoding="utf-8") as log_fh:
        writer = csv.writer(log_fh)
        writer.writerow(columns)

        def progress(row):
            writer.writerow(
                [row["epoch"]] + [f"{row[c]:.9f}" for c in columns[1:]]
            )
            log_fh.flush()
            if not args.quiet:
                print(
                    f"epoch {row['epoch']:4d}  "
                    f"L_c {row['center_loss']:.5f}  "
                    f"L_n {row['normal_loss']:.5f}  "
                    f"L_a {row['anomaly_loss']:.5f}"
                )

        model = train(manifest, config, progress=progress)
    save_checkpoint(os.path.join(out_dir, "checkpoint"), model, force=args.force)
    render_loss_curves(
        model.history, os.path.join(out_dir, "figures", "loss_curves.png")
    )
    if not args.quiet:
        print(f"checkpoint written to {os.path.join(out_dir, 'checkpoint')}")
    return 0


def cmd_eval(args):
    from .evaluation import run_eval

    checkpoint = _find_checkpoint(args.checkpoint)
    model = load_checkpoint(checkpoint)
    if args.smoothing_sigma is not None:
        model.config = model.config.replace(smoothing_sigma=args.smoothing_sigma)
    manifest = load_manifest(args.manifest, require_masks=args.pixel_metrics)
    os.makedirs(args.out, exist_ok=True)
    model.config.save(os.path.join(args.out, "config.json"))
    category = args.category or os.path.basename(
        os.path.dirname(os.path.abspath(args.manifest))
    )
    metric_values = run_eval(
        model, manifest, args.out,
        category=category,
        pixel_metrics=args.pixel_metrics,
        heatmaps=not args.no_heatmaps,
        figures=not args.no_figures,
    )
    print(json.dumps({"category": category, **metric_values}, indent=2,
                     sort_keys=True))
    return 0


def cmd_score(args):
    from .evaluation import run_score

    checkpoint = _find_checkpoint(args.checkpoint)
    model = load_checkpoint(checkpoint)
    if args.smoothing_sigma is not None:
        model.config = model.config.replace(smoothing_sigma=args.smoothing_sigma)
    manifest = load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    model.config.save(os.path.join(args.out, "config.json"))
    run_score(model, manifest, args.out)
    print(f"scores written to {os.path.join(args.out, 'scores.csv')}")
    return 0


def cmd_synth(args):
    if args.spec:
        try:
            with open(args.spec, "r", encoding="utf-8") as fh:
                spec = synthbench.SynthSpec.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synth spec {args.spec}: {exc}") from exc
    else:
        spec = synthbench.SynthSpec()
    overrides = {
        name: getattr(args, name)
        for name in (
            "height", "width", "channels", "modes", "mode_separation",
            "noise_std", "patch_size", "offset", "train_count",
            "test_normal_count", "test_anomalous_count", "image_scale", "seed",
        )
        if getattr(args, name) is not None
    }
    if overrides:
        spec = synthbench.SynthSpec.from_dict({**spec.to_dict(), **overrides})
    train_path, test_path = synthbench.generate(spec, args.out)
    print(f"train manifest: {train_path}")
    print(f"test manifest:  {test_path}")
    return 0


def cmd_diagnose(args):
    from .diagnostics import run_diagnose
    from .report import render_projection_scatter

    checkpoint = _find_checkpoint(args.checkpoint)
    model = load_checkpoint(checkpoint)
    manifest = load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    model.config.save(os.path.join(args.out, "config.json"))
    csv_path = os.path.join(args.out, "diagnose.csv")
    coords_u, coords_z, variances = run_diagnose(
        model, manifest, csv_path, max_per_role=args.max_vectors
    )
    render_projection_scatter(
        coords_u, coords_z,
        os.path.join(args.out, "figures", "projection_scatter.png"),
    )
    print(f"projection written to {csv_path} "
          f"(component variances: {variances[0]:.4g}, {variances[1]:.4g})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="featad",
        description="Feature-space anomaly detection: train, score, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a train manifest")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--out", required=True, help="run output directory")
    p_train.add_argument("--force", action="store_true",
                         help="replace an existing checkpoint")
    p_train.add_argument("--quiet", action="store_true")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test manifest")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--category", default=None)
    p_eval.add_argument("--smoothing-sigma", type=float, default=None)
    p_eval.add_argument("--no-pixel-metrics", dest="pixel_metrics",
                        action="store_false")
    p_eval.add_argument("--no-heatmaps", action="store_true")
    p_eval.add_argument("--no-figures", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_score = sub.add_parser("score", help="score a manifest without metrics")
    p_score.add_argument("--checkpoint", required=True)
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--smoothing-sigma", type=float, default=None)
    p_score.set_defaults(func=cmd_score)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--spec", default=None, help="JSON synth spec")
    for name, typ in [
        ("height", int), ("width", int), ("channels", int), ("modes", int),
        ("mode_separation", float), ("noise_std", float), ("patch_size", int),
        ("offset", float), ("train_count", int), ("test_normal_count", int),
        ("test_anomalous_count", int), ("image_scale", int), ("seed", int),
    ]:
        p_synth.add_argument(f"--{name.replace('_', '-')}", type=typ,
                             default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_diag = sub.add_parser(
        "diagnose", help="export a 2-component projection of u and z vectors"
    )
    p_diag.add_argument("--checkpoint", required=True)
    p_diag.add_argument("--manifest", required=True)
    p_diag.add_argument("--out", required=True)
    p_diag.add_argument("--max-vectors", type=int, default=2000)
    p_diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
