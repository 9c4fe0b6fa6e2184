"""
Synthetic slice/mask generator for desk-scale verification.

Each slice holds 1-3 soft-intensity elliptical blobs over smoothed noise;
the mask is the union of the blob supports.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from src.data.preprocess import minmax_normalize
from src.data.types import CTSlice, DataError, MaskImage, SamplePair

MIN_FOREGROUND = 0.02
MAX_FOREGROUND = 0.40
MAX_ATTEMPTS = 1000


def _draw_mask(rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    profile = np.zeros((size, size), dtype=np.float64)
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(0.2, 0.8, size=2) * size
        ay, ax = rng.uniform(0.08, 0.22, size=2) * size
        theta = rng.uniform(0.0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        r2 = (u / ax) ** 2 + (v / ay) ** 2
        inside = r2 <= 1.0
        mask |= inside
        profile = np.maximum(profile, np.where(inside, 0.7 + 0.3 * (1.0 - r2), 0.0))
    return mask, profile


def _render(rng: np.random.Generator, profile: np.ndarray) -> np.ndarray:
    size = profile.shape[0]
    texture = gaussian_filter(rng.normal(0.0, 1.0, (size, size)), sigma=2.0)
    texture /= max(float(np.abs(texture).max()), 1e-12)
    background = 0.25 + 0.08 * texture
    amplitude = rng.uniform(0.35, 0.55)
    image = background + amplitude * profile + rng.normal(0.0, 0.03, (size, size))
    image = gaussian_filter(image, sigma=0.6)
    return np.clip(image, 0.0, 1.0)


def synth_blobs(count: int, size: int, seed: int) -> List[SamplePair]:
    """
    Generate `count` size x size sample pairs, bit-identical for a given seed.

    Every mask has a foreground fraction within [0.02, 0.40]; each sample is
    its own scan. Slices are min-max stretched to [0, 1], the same scaling
    PNG inputs receive, so a written and reloaded set matches up to 16-bit
    rounding.
    """
    if size < 16:
        raise DataError(f"synthetic size must be >= 16, got {size}")
    if count < 1:
        raise DataError(f"synthetic count must be >= 1, got {count}")

    rng = np.random.default_rng(seed)
    samples: List[SamplePair] = []
    for index in range(count):
        for _ in range(MAX_ATTEMPTS):
            mask, profile = _draw_mask(rng, size)
            if MIN_FOREGROUND <= mask.mean() <= MAX_FOREGROUND:
                break
        else:
            raise DataError(f"could not draw a mask within foreground bounds for sample {index}")
        source_id = f"blob{index:04d}"
        samples.append(
            SamplePair(
                image=minmax_normalize(CTSlice(pixels=_render(rng, profile), source_id=source_id)),
                mask=MaskImage(mask.astype(np.uint8)),
                scan_id=source_id,
            )
        )
    return samples
