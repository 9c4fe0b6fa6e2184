"""Imaging data: loading, preprocessing, splitting, distance maps and synthetic slices."""

from src.data.distance import signed_distance_map
from src.data.io import load_dataset, resolve_source, write_png_dataset
from src.data.pipeline import prepare_samples, prepare_split, target_size
from src.data.preprocess import minmax_normalize, normalize_slice, preprocess_samples
from src.data.split import make_split
from src.data.synthetic import synth_blobs
from src.data.types import (
    CTSlice,
    DataError,
    DatasetSplit,
    MaskImage,
    SamplePair,
    SignedDistanceMap,
)

__all__ = [
    "CTSlice",
    "DataError",
    "DatasetSplit",
    "MaskImage",
    "SamplePair",
    "SignedDistanceMap",
    "load_dataset",
    "make_split",
    "minmax_normalize",
    "normalize_slice",
    "prepare_samples",
    "prepare_split",
    "preprocess_samples",
    "resolve_source",
    "signed_distance_map",
    "synth_blobs",
    "target_size",
    "write_png_dataset",
]
