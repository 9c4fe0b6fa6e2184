"""
Imaging data types: slices, masks, signed distance maps and their pairings.

Arrays are numpy; shapes are (height, width).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np


class DataError(ValueError):
    """Raised for unreadable, missing or inconsistent imaging data."""


@dataclass(frozen=True)
class CTSlice:
    """One 2-D slice; pixels are raw HU (or 8/16-bit PNG values) or normalized to [0, 1]."""
    pixels: np.ndarray
    source_id: str
    spacing: Tuple[float, float] = (1.0, 1.0)
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or min(self.pixels.shape) < 1:
            raise DataError(f"{self.source_id}: slice must be a non-empty 2-D array, got {self.pixels.shape}")

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.pixels.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class MaskImage:
    """Binary infection mask: 1 = infected, 0 = background."""
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise DataError(f"mask must be 2-D, got shape {self.pixels.shape}")
        if not np.isin(self.pixels, (0, 1)).all():
            raise DataError("mask values must be exactly 0 or 1")

    @classmethod
    def from_labels(cls, labels: np.ndarray, label: Optional[int] = None) -> "MaskImage":
        """Binarize a (possibly multi-label) mask: any nonzero, or exactly `label`."""
        keep = labels > 0 if label is None else labels == label
        return cls(keep.astype(np.uint8))

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.pixels.shape)  # type: ignore[return-value]

    @property
    def foreground_fraction(self) -> float:
        return float(self.pixels.mean())


@dataclass(frozen=True)
class SignedDistanceMap:
    """phi < 0 inside the mask, > 0 outside; all zeros for single-class masks."""
    phi: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return tuple(self.phi.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class SamplePair:
    """A slice with its mask and (optionally) the precomputed distance map."""
    image: CTSlice
    mask: MaskImage
    sdm: Optional[SignedDistanceMap] = None
    scan_id: str = ""

    def __post_init__(self) -> None:
        if self.image.shape != self.mask.shape:
            raise DataError(
                f"{self.image.source_id}: image shape {self.image.shape} != mask shape {self.mask.shape}"
            )
        if self.sdm is not None and self.sdm.shape != self.mask.shape:
            raise DataError(f"{self.image.source_id}: distance map shape {self.sdm.shape} != mask shape")
        if not self.scan_id:
            object.__setattr__(self, "scan_id", self.image.source_id)

    @property
    def sample_id(self) -> str:
        return self.image.source_id

    def with_sdm(self, sdm: SignedDistanceMap) -> "SamplePair":
        return replace(self, sdm=sdm)


@dataclass
class DatasetSplit:
    """Scan-disjoint train / (optional) validation / test subsets."""
    train: List[SamplePair]
    test: List[SamplePair]
    seed: int
    val: List[SamplePair] = field(default_factory=list)

    @property
    def validation(self) -> List[SamplePair]:
        """Validation subset, falling back to the test subset when none was carved."""
        return self.val or self.test

    def scan_ids(self) -> Dict[str, List[str]]:
        return {
            "train": sorted({s.scan_id for s in self.train}),
            "val": sorted({s.scan_id for s in self.val}),
            "test": sorted({s.scan_id for s in self.test}),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "train_samples": len(self.train),
            "val_samples": len(self.val),
            "test_samples": len(self.test),
            "scans": self.scan_ids(),
        }
