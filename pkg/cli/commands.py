"""
Command implementations.

Each command takes already-resolved inputs and returns a process exit code:
0 success, 1 usage / config / data error, 2 training divergence.
Domain errors propagate to cli.main, which maps them to exit codes.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from evals import run_ablation, run_checks, write_metrics_report
from evals.report import format_check_summary, metrics_table
from evals.schema import CheckScope
from src.config import LossPreset, RunConfig
from src.data.io import read_png, to_uint16, write_png, write_png_dataset
from src.data.pipeline import prepare_samples, prepare_split
from src.data.preprocess import minmax_normalize
from src.data.synthetic import synth_blobs
from src.data.types import CTSlice, DataError
from src.metrics import evaluate
from src.models.attention_unet import AttentionUNet, build_model, forward
from src.training.checkpoint import Checkpoint, load_checkpoint
from src.training.trainer import TrainingDivergedError, train
from src.utils import logger, resolve_device, safe_json_dumps

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2

PNG_SUFFIX = ".png"


def model_label(attention: bool) -> str:
    return "Attention U-Net" if attention else "U-Net"


def cmd_train(config: RunConfig) -> int:
    """Train on the configured data, then evaluate the final model on the test subset."""
    out = Path(config.output_dir)
    config.write_snapshot(out)
    split = prepare_split(config.data, config.train.seed)
    (out / "split.json").write_text(safe_json_dumps(split.to_dict(), indent=2), encoding="utf-8")

    model = build_model(config.model, seed=config.train.seed)
    try:
        model, history = train(model, split, config.train, out_dir=out)
    except TrainingDivergedError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DIVERGED

    report = evaluate(model, split.test, threshold=config.train.eval_threshold)
    label = model_label(config.model.attention)
    write_metrics_report(
        report,
        out,
        label,
        include_reference=True,
        extra={"loss_preset": config.train.loss_preset.value, "epochs": len(history.records)},
    )
    print(metrics_table(report, label, include_reference=True))
    print(f"\nArtifacts written to {out}")
    return EXIT_OK


def load_for_inference(config: RunConfig, checkpoint: Path) -> Tuple[Checkpoint, RunConfig]:
    """
    Load a checkpoint for eval / predict.

    A model section set by flag, env or config file must match the checkpoint;
    the returned config carries the checkpoint's model so snapshots record it.
    """
    requested = config.model if "model" in config.model_fields_set else None
    ckpt = load_checkpoint(checkpoint, model_config=requested)
    return ckpt, config.model_copy(update={"model": ckpt.model_config})


def cmd_eval(config: RunConfig, checkpoint: Path, subset: str = "test") -> int:
    """Evaluate a checkpoint on the test subset (or every sample) of the configured data."""
    ckpt, config = load_for_inference(config, checkpoint)
    out = Path(config.output_dir)
    config.write_snapshot(out)
    if subset == "test":
        samples = prepare_split(config.data, config.train.seed).test
    else:
        samples = prepare_samples(config.data)

    report = evaluate(ckpt.model, samples, threshold=config.train.eval_threshold)
    label = model_label(ckpt.model_config.attention)
    write_metrics_report(
        report, out, label, extra={"checkpoint": str(checkpoint), "epoch": ckpt.epoch, "subset": subset}
    )
    print(metrics_table(report, label))
    return EXIT_OK


def collect_images(inputs: Sequence[Path]) -> List[Path]:
    """Expand directories to their PNG files; explicit files are kept as given."""
    paths: List[Path] = []
    for item in inputs:
        item = Path(item)
        if item.is_dir():
            paths.extend(sorted(p for p in item.iterdir() if p.suffix.lower() == PNG_SUFFIX))
        else:
            paths.append(item)
    if not paths:
        raise DataError("no input images given")
    return paths


def predict_probabilities(
    model: AttentionUNet,
    pixels: np.ndarray,
    image_size: int,
    device: torch.device,
) -> np.ndarray:
    """Per-pixel probabilities at the slice's own resolution."""
    height, width = pixels.shape
    batch = torch.from_numpy(pixels.astype(np.float32))[None, :, :, None].to(device)
    resized = height % model.divisor or width % model.divisor
    if resized:
        batch = F.interpolate(batch.permute(0, 3, 1, 2), size=(image_size, image_size), mode="bilinear", align_corners=False)
        batch = batch.permute(0, 2, 3, 1)
    with torch.no_grad():
        prob = forward(model, batch)
    if resized:
        prob = F.interpolate(prob.permute(0, 3, 1, 2), size=(height, width), mode="bilinear", align_corners=False)
        prob = prob.permute(0, 2, 3, 1)
    return prob[0, :, :, 0].cpu().numpy()


def cmd_predict(config: RunConfig, checkpoint: Path, images: Sequence[Path]) -> int:
    """Write `masks/<name>.png` (0/255) and `probs/<name>.png` (16-bit) per input slice."""
    ckpt, config = load_for_inference(config, checkpoint)
    out = Path(config.output_dir)
    config.write_snapshot(out)
    device = resolve_device()
    model = ckpt.model.to(device).eval()
    threshold = config.train.eval_threshold

    paths = collect_images(images)
    for path in paths:
        slice_ = minmax_normalize(CTSlice(read_png(path), source_id=path.stem))
        prob = predict_probabilities(model, slice_.pixels, config.data.image_size, device)
        write_png(out / "masks" / path.name, ((prob > threshold) * 255).astype(np.uint8))
        write_png(out / "probs" / path.name, to_uint16(prob))
        logger.info("slice_predicted", image=str(path), foreground=float((prob > threshold).mean()))
    print(f"Wrote {2 * len(paths)} files for {len(paths)} slices to {out}")
    return EXIT_OK


def cmd_check(scope: CheckScope, seed: int = 0, report: Optional[Path] = None) -> int:
    """Run the oracle suites; exit 0 iff every check passes."""
    summary = run_checks(scope, seed=seed)
    print(format_check_summary(summary))
    if report is not None:
        report.parent.mkdir(parents=True, exist_ok=True)
        report.write_text(safe_json_dumps(summary.to_dict(), indent=2), encoding="utf-8")
    if summary.all_passed:
        print("✅ All checks passed")
        return EXIT_OK
    print("❌ Some checks failed")
    return EXIT_USAGE


def cmd_synth(count: int, size: int, seed: int, outdir: Path) -> int:
    """Write a png-pairs dataset of synthetic slices."""
    samples = synth_blobs(count, size, seed)
    written = write_png_dataset(samples, outdir)
    print(f"Wrote {len(samples)} samples ({len(written)} files) to {outdir}")
    return EXIT_OK


def cmd_ablate(config: RunConfig, presets: Sequence[LossPreset] = tuple(LossPreset)) -> int:
    """Train one model per loss preset and tabulate test metrics."""
    out = Path(config.output_dir)
    config.write_snapshot(out)
    try:
        result = run_ablation(config, presets, output_dir=out)
    except TrainingDivergedError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    result.save(out)
    print(result.table())
    return EXIT_OK
