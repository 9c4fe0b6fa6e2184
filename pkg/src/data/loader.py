"""
Torch-side data pipeline: a Dataset over preprocessed SamplePairs and a
seeded DataLoader. Workers prefetch batches while the trainer consumes them.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset

from src.data.distance import signed_distance_map
from src.data.types import DataError, SamplePair

Batch = Tuple[torch.Tensor, torch.Tensor, torch.Tensor]


class SliceDataset(Dataset):
    """Serves (image, mask, sdm) as (H, W, 1) float32 tensors."""

    def __init__(self, samples: Sequence[SamplePair]):
        if not samples:
            raise DataError("SliceDataset needs at least one sample")
        self.samples = [s if s.sdm is not None else s.with_sdm(signed_distance_map(s.mask)) for s in samples]

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> Batch:
        sample = self.samples[index]
        image = torch.from_numpy(np.asarray(sample.image.pixels, dtype=np.float32))[..., None]
        mask = torch.from_numpy(sample.mask.pixels.astype(np.float32))[..., None]
        sdm = torch.from_numpy(sample.sdm.phi.astype(np.float32))[..., None]
        return image, mask, sdm


def make_loader(
    samples: Sequence[SamplePair],
    batch_size: int,
    seed: int,
    shuffle: bool = True,
    num_workers: int = 0,
) -> DataLoader:
    """Seeded DataLoader; the shuffle order depends only on `seed`."""
    generator = torch.Generator().manual_seed(seed)
    return DataLoader(
        SliceDataset(samples),
        batch_size=batch_size,
        shuffle=shuffle,
        num_workers=num_workers,
        generator=generator,
        persistent_workers=num_workers > 0,
        prefetch_factor=2 if num_workers > 0 else None,
    )


def random_hflip(batch: Batch, generator: torch.Generator) -> Batch:
    """Flip each sample along the width axis with probability 1/2."""
    image, mask, sdm = batch
    flip = torch.rand(image.shape[0], generator=generator) < 0.5
    if not flip.any():
        return batch
    idx = flip.nonzero(as_tuple=True)[0]
    image, mask, sdm = image.clone(), mask.clone(), sdm.clone()
    for t in (image, mask, sdm):
        t[idx] = t[idx].flip(dims=(2,))
    return image, mask, sdm
