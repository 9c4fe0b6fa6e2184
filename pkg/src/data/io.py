"""
Dataset I/O for the two on-disk layouts plus the synthetic pseudo-URI.

Layouts:
- png-pairs: root/images/*.png paired with root/masks/*.png by base name
- nifti:     root/images/*.nii[.gz] paired with root/masks/*.nii[.gz]; slices along the last axis
- synth://NxS resolves to N generated S x S slices
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import nibabel as nib
import numpy as np

from src.config import DataConfig
from src.data.synthetic import synth_blobs
from src.data.types import CTSlice, DataError, MaskImage, SamplePair
from src.utils import logger

SYNTH_SCHEME = "synth://"
_SYNTH_RE = re.compile(r"^synth://(\d+)x(\d+)$")
_SLICE_SUFFIX_RE = re.compile(r"^(.+)_(\d+)$")
NIFTI_SUFFIXES = (".nii.gz", ".nii")


# ── PNG helpers ──

def read_png(path: Path) -> np.ndarray:
    """Read an 8- or 16-bit PNG as a 2-D grayscale array."""
    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None:
        raise DataError(f"unreadable image: {path}")
    if pixels.ndim == 3:
        code = cv2.COLOR_BGRA2GRAY if pixels.shape[2] == 4 else cv2.COLOR_BGR2GRAY
        pixels = cv2.cvtColor(pixels, code)
    return pixels


def write_png(path: Path, pixels: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), pixels):
        raise DataError(f"could not write {path}")


def to_uint16(pixels: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] array to 16-bit."""
    return np.round(np.clip(pixels, 0.0, 1.0) * 65535.0).astype(np.uint16)


def scan_id_from_name(name: str) -> str:
    """`<scan>_<digits>` names group under `<scan>`; anything else is its own scan."""
    match = _SLICE_SUFFIX_RE.match(name)
    return match.group(1) if match else name


# ── Loading ──

def _nifti_stem(path: Path) -> str:
    for suffix in NIFTI_SUFFIXES:
        if path.name.endswith(suffix):
            return path.name[: -len(suffix)]
    return path.stem


def _pair_files(root: Path, pattern_suffixes: Sequence[str]) -> List[Tuple[str, Path, Path]]:
    images_dir, masks_dir = root / "images", root / "masks"
    if not images_dir.is_dir():
        raise DataError(f"missing images/ directory under {root}")

    def index(directory: Path) -> Dict[str, Path]:
        found: Dict[str, Path] = {}
        if not directory.is_dir():
            return found
        for path in sorted(directory.iterdir()):
            if any(path.name.endswith(s) for s in pattern_suffixes):
                stem = _nifti_stem(path) if pattern_suffixes == NIFTI_SUFFIXES else path.stem
                found[stem] = path
        return found

    images, masks = index(images_dir), index(masks_dir)
    if not images:
        raise DataError(f"no images found in {images_dir}")
    orphans = sorted(images[name].name for name in images if name not in masks)
    if orphans:
        raise DataError(f"missing mask for image(s): {', '.join(orphans)}")
    return [(name, images[name], masks[name]) for name in sorted(images)]


def _load_png_pairs(root: Path, label: Optional[int]) -> List[SamplePair]:
    samples = []
    for name, image_path, mask_path in _pair_files(root, (".png",)):
        image = read_png(image_path)
        labels = read_png(mask_path)
        if image.shape != labels.shape:
            raise DataError(f"shape mismatch for {image_path.name}: image {image.shape} vs mask {labels.shape}")
        samples.append(
            SamplePair(
                image=CTSlice(pixels=image, source_id=name),
                mask=MaskImage.from_labels(labels, label),
                scan_id=scan_id_from_name(name),
            )
        )
    return samples


def _load_nifti(root: Path, label: Optional[int]) -> List[SamplePair]:
    samples = []
    for name, image_path, mask_path in _pair_files(root, NIFTI_SUFFIXES):
        image_img = nib.load(str(image_path))
        volume = np.asarray(image_img.get_fdata())
        labels = np.rint(np.asarray(nib.load(str(mask_path)).get_fdata())).astype(np.int64)
        if volume.shape != labels.shape:
            raise DataError(f"shape mismatch for {image_path.name}: image {volume.shape} vs mask {labels.shape}")
        if volume.ndim == 2:
            volume, labels = volume[..., None], labels[..., None]
        zooms = image_img.header.get_zooms()
        spacing = (float(zooms[0]), float(zooms[1])) if len(zooms) >= 2 else (1.0, 1.0)
        for k in range(volume.shape[-1]):
            samples.append(
                SamplePair(
                    image=CTSlice(pixels=volume[..., k], source_id=f"{name}#{k:04d}", spacing=spacing),
                    mask=MaskImage.from_labels(labels[..., k], label),
                    scan_id=name,
                )
            )
    return samples


def load_dataset(root: Path, layout: str = "png-pairs", label: Optional[int] = None) -> List[SamplePair]:
    """
    Load one SamplePair per slice.

    Masks are binarized (any nonzero, or == label); images stay raw.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root does not exist: {root}")
    if layout == "png-pairs":
        samples = _load_png_pairs(root, label)
    elif layout == "nifti":
        samples = _load_nifti(root, label)
    else:
        raise DataError(f"unknown layout: {layout}")
    logger.info("dataset_loaded", root=str(root), layout=layout, samples=len(samples))
    return samples


def parse_synth_uri(uri: str) -> Tuple[int, int]:
    match = _SYNTH_RE.match(uri)
    if not match:
        raise DataError(f"malformed synthetic source {uri!r}, expected synth://<count>x<size>")
    return int(match.group(1)), int(match.group(2))


def resolve_source(config: DataConfig) -> List[SamplePair]:
    """Load raw samples for a DataConfig (path or synth:// URI)."""
    if config.source.startswith(SYNTH_SCHEME):
        count, size = parse_synth_uri(config.source)
        logger.info("synthetic_source", count=count, size=size, seed=config.synth_seed)
        return synth_blobs(count, size, config.synth_seed)
    return load_dataset(Path(config.source), config.layout, config.label)


# ── Writing ──

def write_png_dataset(samples: Sequence[SamplePair], root: Path) -> List[Path]:
    """Write samples in png-pairs layout (16-bit images, 0/255 masks)."""
    root = Path(root)
    written: List[Path] = []
    for sample in samples:
        name = sample.sample_id.replace("#", "_")
        pixels = sample.image.pixels
        image = to_uint16(pixels) if sample.image.normalized else pixels
        image_path = root / "images" / f"{name}.png"
        mask_path = root / "masks" / f"{name}.png"
        write_png(image_path, image)
        write_png(mask_path, (sample.mask.pixels * 255).astype(np.uint8))
        written.extend([image_path, mask_path])
    logger.info("png_dataset_written", root=str(root), samples=len(samples))
    return written
