"""
Slice preprocessing: intensity windowing, min-max scaling and square resizing.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable, List, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from src.data.distance import signed_distance_map
from src.data.types import CTSlice, DataError, MaskImage, SamplePair
from src.utils import logger

LUNG_WINDOW: Tuple[float, float] = (-1000.0, 400.0)


def normalize_slice(slice_: CTSlice, window: Tuple[float, float] = LUNG_WINDOW) -> CTSlice:
    """Clip HU values into `window` and rescale linearly to [0, 1]."""
    low, high = window
    if low >= high:
        raise DataError(f"window low ({low}) must be below high ({high})")
    scaled = (slice_.pixels.astype(np.float64) - low) / (high - low)
    return replace(slice_, pixels=np.clip(scaled, 0.0, 1.0), normalized=True)


def minmax_normalize(slice_: CTSlice) -> CTSlice:
    """Per-slice min-max scaling to [0, 1]; constant slices become all zeros."""
    pixels = slice_.pixels.astype(np.float64)
    lo, hi = float(pixels.min()), float(pixels.max())
    scaled = np.zeros_like(pixels) if hi == lo else (pixels - lo) / (hi - lo)
    return replace(slice_, pixels=scaled, normalized=True)


def resize_pair(sample: SamplePair, size: int) -> SamplePair:
    """Resize to size x size: bilinear for the image, nearest for the mask."""
    if sample.image.shape == (size, size):
        return sample
    image = torch.from_numpy(np.ascontiguousarray(sample.image.pixels, dtype=np.float64))[None, None]
    mask = torch.from_numpy(sample.mask.pixels.astype(np.float32))[None, None]
    image = F.interpolate(image, size=(size, size), mode="bilinear", align_corners=False)
    mask = F.interpolate(mask, size=(size, size), mode="nearest")
    return SamplePair(
        image=replace(sample.image, pixels=image[0, 0].numpy()),
        mask=MaskImage(mask[0, 0].numpy().astype(np.uint8)),
        sdm=None,
        scan_id=sample.scan_id,
    )


def preprocess_samples(
    samples: Iterable[SamplePair],
    layout: str,
    size: int,
    window: Tuple[float, float] = LUNG_WINDOW,
) -> List[SamplePair]:
    """
    Normalize, resize and attach signed distance maps.

    NIfTI slices use the HU window; PNG slices are min-max scaled per slice.
    Slices already normalized are left as they are.
    """
    prepared: List[SamplePair] = []
    for sample in samples:
        image = sample.image
        if not image.normalized:
            image = normalize_slice(image, window) if layout == "nifti" else minmax_normalize(image)
        resized = resize_pair(replace(sample, image=image, sdm=None), size)
        prepared.append(resized.with_sdm(signed_distance_map(resized.mask)))
    logger.info("samples_preprocessed", count=len(prepared), layout=layout, size=size)
    return prepared
