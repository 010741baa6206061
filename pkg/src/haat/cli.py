"""Command-line front end.

Subcommands: ``init-weights``, ``upscale``, ``benchmark``, ``gradcheck``,
``train-toy``. Exit codes: 0 success, 1 operational failure, 2 usage or
bad configuration. Diagnostics go to stderr; data goes to stdout or to
the files named by flags. Every command is reproducible from its flags
and seed alone.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .errors import ConfigError, HaatError
from .imaging import from_unit_tensor, load_image, modcrop, save_image, to_unit_tensor
from .metrics import evaluate_folder
from .model import ModelConfig, build_model, full_config, parse_config_file, toy_config
from .verification import (
    GRADCHECK_LEVELS,
    default_training_patch,
    run_gradcheck_suite,
    toy_overfit,
)
from .weights import load_model, save_weights


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="haat",
        description="CPU transformer for single-image super-resolution: "
                    "weight management, upscaling, evaluation, and self-checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-weights", help="build a fresh model and write its weight file")
    p.add_argument("--config", default="toy",
                   help="'toy', 'full', or a key=value config file path")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=True, metavar="PATH")

    p = sub.add_parser("upscale", help="upscale one PNG with a trained weight file")
    p.add_argument("--weights", required=True, metavar="PATH")
    p.add_argument("--in", dest="input", required=True, metavar="IMG")
    p.add_argument("--out", required=True, metavar="IMG")

    p = sub.add_parser("benchmark", help="evaluate PSNR/SSIM over a folder of HR images")
    p.add_argument("--weights", required=True, metavar="PATH")
    p.add_argument("--hr-dir", required=True, metavar="DIR")
    p.add_argument("--scale", type=_positive_int, default=None,
                   help="expected scale; must match the weight file (default: from file)")
    p.add_argument("--csv", default=None, metavar="PATH")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--y-channel", action="store_true",
                   help="score on the luma channel instead of RGB")

    p = sub.add_parser("gradcheck", help="compare tape gradients with finite differences")
    p.add_argument("--level", choices=["primitives", "blocks", "model", "all"],
                   default="all")
    p.add_argument("--seed", type=_nonneg_int, default=0)

    p = sub.add_parser("train-toy", help="overfit the toy model on one HR patch")
    p.add_argument("--steps", type=_nonneg_int, default=200)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--hr", default=None, metavar="IMG",
                   help="HR patch image (default: a deterministic synthetic patch)")
    p.add_argument("--out-weights", default=None, metavar="PATH")
    p.add_argument("--curve-csv", default=None, metavar="PATH")
    return parser


def _resolve_config(text: str) -> ModelConfig:
    if text == "toy":
        return toy_config()
    if text == "full":
        return full_config()
    try:
        return parse_config_file(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config file '{text}': {exc}") from exc


def _cmd_init_weights(args) -> int:
    cfg = _resolve_config(args.config)
    model, store = build_model(cfg, args.seed)
    save_weights(store, cfg, args.out)
    print(f"wrote {len(store)} tensors ({store.total_parameters()} parameters) "
          f"to {args.out}", file=sys.stderr)
    return 0


def _cmd_upscale(args) -> int:
    model, _ = load_model(args.weights)
    image = load_image(args.input)
    out = model(to_unit_tensor(image))
    result = from_unit_tensor(out)
    save_image(result, args.out)
    print(f"wrote {result.width}x{result.height} image to {args.out}", file=sys.stderr)
    return 0


def _cmd_benchmark(args) -> int:
    model, _ = load_model(args.weights)
    scale = model.cfg.scale
    if args.scale is not None and args.scale != scale:
        print(f"error: weight file is for scale {scale}, benchmark asked for "
              f"{args.scale}", file=sys.stderr)
        return 1
    report = evaluate_folder(model, args.hr_dir, scale, y_channel=args.y_channel,
                             jobs=args.jobs)
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
        print(f"wrote per-image results to {args.csv}", file=sys.stderr)
    print(report.format_table())
    return 0


def _cmd_gradcheck(args) -> int:
    if args.level == "all":
        components = [name for level in ("primitives", "blocks", "model")
                      for name in GRADCHECK_LEVELS[level]]
    else:
        components = GRADCHECK_LEVELS[args.level]
    results = run_gradcheck_suite(components, seed=args.seed, emit=print)
    return 0 if all(r.passed for r in results) else 1


def _cmd_train_toy(args) -> int:
    cfg = toy_config()
    if args.hr is None:
        patch = default_training_patch(args.seed)
    else:
        image = modcrop(load_image(args.hr), cfg.scale)
        patch = to_unit_tensor(image)
    curve = toy_overfit(cfg, patch, args.steps, args.seed)
    if args.out_weights:
        save_weights(curve.store, cfg, args.out_weights)
        print(f"wrote trained weights to {args.out_weights}", file=sys.stderr)
    if args.curve_csv:
        with open(args.curve_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss"])
            for step, value in enumerate(curve.losses):
                writer.writerow([step, f"{value:.8f}"])
        print(f"wrote loss curve to {args.curve_csv}", file=sys.stderr)
    if curve.losses:
        ratio = curve.losses[-1] / curve.losses[0]
        print(f"steps={args.steps} initial={curve.losses[0]:.6f} "
              f"final={curve.losses[-1]:.6f} ratio={ratio:.4f}")
    else:
        print("steps=0 (weights left at their seed initialization)")
    return 0


_COMMANDS = {
    "init-weights": _cmd_init_weights,
    "upscale": _cmd_upscale,
    "benchmark": _cmd_benchmark,
    "gradcheck": _cmd_gradcheck,
    "train-toy": _cmd_train_toy,
}


def run(argv=None) -> int:
    """Entry point; returns the process exit code."""
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        # a broken --config choice is a usage problem; a broken file at
        # runtime (weights, images) is operational
        return 2 if args.command == "init-weights" else 1
    except (HaatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(run())
