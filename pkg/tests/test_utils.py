"""
Tests for utility functions.
"""

from __future__ import annotations

import json

import numpy as np
import pytest
import torch

from src.utils import now_iso, resolve_device, safe_json_dumps, seed_everything


class TestSeeding:

    def test_seed_everything_repeats_draws(self):
        seed_everything(42)
        first = (np.random.rand(3), torch.rand(3))
        seed_everything(42)
        second = (np.random.rand(3), torch.rand(3))
        assert np.array_equal(first[0], second[0])
        assert torch.equal(first[1], second[1])


class TestResolveDevice:

    def test_defaults_to_settings(self, settings):
        assert resolve_device().type == "cpu"

    def test_explicit_cpu(self):
        assert resolve_device("cpu") == torch.device("cpu")

    def test_cuda_unavailable(self, monkeypatch):
        monkeypatch.setattr(torch.cuda, "is_available", lambda: False)
        with pytest.raises(ValueError, match="CUDA requested"):
            resolve_device("cuda")
        assert resolve_device("auto").type == "cpu"


class TestHelpers:

    def test_now_iso_is_utc(self):
        assert now_iso().endswith("+00:00")

    def test_safe_json_dumps_fallback(self):
        out = json.loads(safe_json_dumps({"path": object.__new__(object)}))
        assert "object" in out["path"]

    def test_safe_json_dumps_indent(self):
        assert "\n" in safe_json_dumps({"a": 1}, indent=2)
