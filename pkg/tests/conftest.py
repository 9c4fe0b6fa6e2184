"""
Shared test fixtures and configuration.
"""

from __future__ import annotations

import os
import sys

import numpy as np
import pytest

# Ensure the project root is on the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Set test env vars before any imports that might read config
os.environ.update({
    "HUNET_DEVICE": "cpu",
    "HUNET_LOG_LEVEL": "WARNING",
    "HUNET_DETERMINISTIC": "false",
})


@pytest.fixture(autouse=True)
def reset_config_cache():
    """Reset the cached settings singleton before each test."""
    from src.config import get_settings
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def settings():
    """Get test settings."""
    from src.config import get_settings
    return get_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def synth_samples():
    """Twelve 32x32 synthetic pairs with distance maps attached."""
    from src.data.synthetic import synth_blobs
    from src.training.trainer import with_distance_maps
    return with_distance_maps(synth_blobs(12, 32, seed=3))


@pytest.fixture
def tiny_model_config():
    from src.config import ModelConfig
    return ModelConfig(base_channels=8)


@pytest.fixture
def png_dataset(tmp_path):
    """A six-sample png-pairs dataset written by the synthetic generator."""
    from src.data.io import write_png_dataset
    from src.data.synthetic import synth_blobs
    root = tmp_path / "pngs"
    write_png_dataset(synth_blobs(6, 32, seed=11), root)
    return root
