"""
Scan-grouped, seeded dataset splitting.

The split unit is the scan: slices of one scan never straddle subsets.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Dict, List, Sequence

import numpy as np

from src.data.types import DataError, DatasetSplit, SamplePair
from src.utils import logger


def group_by_scan(samples: Sequence[SamplePair]) -> Dict[str, List[SamplePair]]:
    """Group samples by scan id, keeping slice order within each scan."""
    groups: Dict[str, List[SamplePair]] = OrderedDict()
    for sample in samples:
        groups.setdefault(sample.scan_id, []).append(sample)
    return groups


def _group_count(n_groups: int, fraction: float) -> int:
    # tolerance keeps e.g. 20 * 0.2 at 4 rather than 5 under float error
    return math.ceil(n_groups * fraction - 1e-9)


def make_split(
    samples: Sequence[SamplePair],
    test_fraction: float = 0.2,
    seed: int = 0,
    val_fraction: float = 0.0,
) -> DatasetSplit:
    """
    Split samples by scan into train/test (and optionally validation).

    ceil(groups * test_fraction) scans go to test. When val_fraction > 0,
    ceil(remaining * val_fraction) of the remaining scans go to validation.
    Deterministic for a given seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if not 0.0 <= val_fraction < 1.0:
        raise DataError(f"val_fraction must be in [0, 1), got {val_fraction}")

    groups = group_by_scan(samples)
    keys = sorted(groups)
    if len(keys) < 2:
        raise DataError(f"need at least 2 scans to split, got {len(keys)}")

    order = [keys[i] for i in np.random.default_rng(seed).permutation(len(keys))]
    n_test = min(_group_count(len(keys), test_fraction), len(keys) - 1)
    test_keys, rest = order[:n_test], order[n_test:]

    n_val = _group_count(len(rest), val_fraction) if val_fraction > 0 else 0
    if n_val >= len(rest):
        raise DataError("val_fraction leaves no training scans")
    val_keys, train_keys = rest[:n_val], rest[n_val:]

    def collect(selected: List[str]) -> List[SamplePair]:
        return [s for key in sorted(selected) for s in groups[key]]

    split = DatasetSplit(
        train=collect(train_keys),
        test=collect(test_keys),
        val=collect(val_keys),
        seed=seed,
    )
    logger.info(
        "dataset_split",
        seed=seed,
        scans=len(keys),
        train_scans=len(train_keys),
        val_scans=len(val_keys),
        test_scans=len(test_keys),
    )
    return split
