"""
hunet command line.

Usage:
    python -m cli train   --data synth://200x64 --epochs 20 --out runs/synth
    python -m cli eval    --checkpoint runs/synth/ckpt_best.bin --data synth://200x64
    python -m cli predict --checkpoint runs/synth/ckpt_best.bin --images slices/ --out preds
    python -m cli check   all
    python -m cli synth   --count 50 --size 64 --out data/synth
    python -m cli ablate  --data synth://200x64 --epochs 20 --out runs/ablation
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from cli import commands
from evals.schema import CheckScope
from src.config import LossPreset, RunConfig, get_settings, load_run_config
from src.data.types import DataError
from src.models.attention_unet import ShapeError
from src.training.checkpoint import CheckpointError
from src.utils import configure_logging, logger


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    """Flags that override the run config (file < env < flags)."""
    parser.add_argument("--config", type=Path, help="TOML run config file")
    parser.add_argument("--data", type=str, help="Dataset root or synth://<count>x<size>")
    parser.add_argument("--layout", choices=["png-pairs", "nifti"], help="On-disk dataset layout")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--epochs", type=int, help="Training epochs")
    parser.add_argument("--batch-size", type=int, help="Mini-batch size")
    parser.add_argument("--lr", type=float, help="Initial learning rate")
    parser.add_argument("--alpha", type=float, help="Weight of (weighted BCE + Dice); beta defaults to 1 - alpha")
    parser.add_argument("--beta", type=float, help="Weight of (squared hinge + boundary); alpha defaults to 1 - beta")
    parser.add_argument("--threshold", type=float, help="Binarization threshold in (0, 1)")
    parser.add_argument("--seed", type=int, help="Seed for init, shuffling and the split")
    parser.add_argument("--base-channels", type=int, help="Width of the first encoder level")
    parser.add_argument("--no-attention", action="store_true", help="Plain U-Net skip connections")
    parser.add_argument(
        "--loss-preset",
        choices=[p.value for p in LossPreset],
        help="Training objective (default bi_h)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hunet",
        description="Attention-gated U-Net lung-infection segmentation with the Bi-category Hybrid loss",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    subparsers = parser.add_subparsers(dest="command", required=True, help="Commands")

    train_parser = subparsers.add_parser("train", help="Train a model and evaluate it on the test subset")
    _add_run_args(train_parser)

    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint")
    _add_run_args(eval_parser)
    eval_parser.add_argument("--checkpoint", type=Path, required=True, help="Checkpoint file")
    eval_parser.add_argument(
        "--subset", choices=["test", "all"], default="test", help="Evaluate the test subset or every sample"
    )

    predict_parser = subparsers.add_parser("predict", help="Write mask and probability PNGs per slice")
    _add_run_args(predict_parser)
    predict_parser.add_argument("--checkpoint", type=Path, required=True, help="Checkpoint file")
    predict_parser.add_argument("--images", type=Path, nargs="+", required=True, help="PNG files or directories")

    check_parser = subparsers.add_parser("check", help="Run the oracle check suites")
    check_parser.add_argument(
        "scope", nargs="?", default=CheckScope.ALL.value, choices=[s.value for s in CheckScope]
    )
    check_parser.add_argument("--seed", type=int, default=0, help="Seed for the random instances")
    check_parser.add_argument("--report", type=Path, help="Also write the summary as JSON here")

    synth_parser = subparsers.add_parser("synth", help="Write a synthetic png-pairs dataset")
    synth_parser.add_argument("--count", type=int, default=50)
    synth_parser.add_argument("--size", type=int, default=64)
    synth_parser.add_argument("--seed", type=int, default=7)
    synth_parser.add_argument("--out", type=Path, required=True)

    ablate_parser = subparsers.add_parser("ablate", help="Compare loss presets on the same split")
    _add_run_args(ablate_parser)
    ablate_parser.add_argument(
        "--presets",
        nargs="+",
        choices=[p.value for p in LossPreset],
        default=[p.value for p in LossPreset],
        help="Presets to train, in table order",
    )
    return parser


def build_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate flags into nested RunConfig overrides; unset flags are left out."""
    model: Dict[str, Any] = {}
    data: Dict[str, Any] = {}
    train: Dict[str, Any] = {}
    loss: Dict[str, Any] = {}
    overrides: Dict[str, Any] = {}

    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.data is not None:
        data["source"] = args.data
    if args.layout is not None:
        data["layout"] = args.layout
    if args.base_channels is not None:
        model["base_channels"] = args.base_channels
    if args.no_attention:
        model["attention"] = False
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr"),
                      ("threshold", "eval_threshold"), ("seed", "seed"), ("loss_preset", "loss_preset")):
        value = getattr(args, flag)
        if value is not None:
            train[key] = value

    if args.alpha is not None:
        loss["alpha"] = args.alpha
        loss["beta"] = args.beta if args.beta is not None else 1.0 - args.alpha
    elif args.beta is not None:
        loss["beta"] = args.beta
        loss["alpha"] = 1.0 - args.beta
    if loss:
        train["loss"] = loss

    for key, section in (("model", model), ("data", data), ("train", train)):
        if section:
            overrides[key] = section
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, build_overrides(args))


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "check":
        return commands.cmd_check(CheckScope(args.scope), seed=args.seed, report=args.report)
    if args.command == "synth":
        return commands.cmd_synth(args.count, args.size, args.seed, args.out)

    config = resolve_config(args)
    if args.command == "train":
        return commands.cmd_train(config)
    if args.command == "eval":
        return commands.cmd_eval(config, args.checkpoint, args.subset)
    if args.command == "predict":
        return commands.cmd_predict(config, args.checkpoint, args.images)
    return commands.cmd_ablate(config, [LossPreset(p) for p in args.presets])


def main(argv: Optional[List[str]] = None) -> int:
    """Parse, run, and map failures onto the exit-code contract."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return commands.EXIT_OK if e.code in (0, None) else commands.EXIT_USAGE

    configure_logging(get_settings().log_level)
    try:
        return dispatch(args)
    except ValidationError as e:
        print(f"Invalid configuration:\n{e}", file=sys.stderr)
    except (DataError, ShapeError, CheckpointError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
    except OSError as e:
        print(f"Error: could not write output: {e}", file=sys.stderr)
    logger.error("command_failed", command=args.command)
    return commands.EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
