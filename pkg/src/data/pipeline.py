"""
From a DataConfig to model-ready samples and a scan-disjoint split.
"""

from __future__ import annotations

from typing import List

from src.config import DataConfig
from src.data.io import SYNTH_SCHEME, parse_synth_uri, resolve_source
from src.data.preprocess import preprocess_samples
from src.data.split import make_split
from src.data.types import DataError, DatasetSplit, SamplePair

SIZE_DIVISOR = 16


def target_size(config: DataConfig) -> int:
    """Synthetic sources keep their generated size; files are resized to `image_size`."""
    if config.source.startswith(SYNTH_SCHEME):
        return parse_synth_uri(config.source)[1]
    return config.image_size


def prepare_samples(config: DataConfig) -> List[SamplePair]:
    size = target_size(config)
    if size % SIZE_DIVISOR:
        raise DataError(f"slice size {size} is not a multiple of {SIZE_DIVISOR}")
    return preprocess_samples(
        resolve_source(config), config.layout, size, (config.window_low, config.window_high)
    )


def prepare_split(config: DataConfig, seed: int) -> DatasetSplit:
    """Load, preprocess and split; the same (config, seed) always yields the same split."""
    return make_split(prepare_samples(config), config.test_fraction, seed, config.val_fraction)
