"""
Tests for the attention-gated U-Net.
"""

from __future__ import annotations

import pytest
import torch

from src.config import ModelConfig
from src.models import (
    AttentionGate,
    ShapeError,
    attention_coefficients,
    attention_gate,
    build_model,
    count_attention_gates,
    forward,
    trace_levels,
)


def _zero_parameters(module: torch.nn.Module) -> None:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


class TestArchitecture:

    def test_default_has_four_gates(self):
        config = ModelConfig()
        assert config.widths == (64, 128, 256, 512, 1024)
        assert count_attention_gates(build_model(config, seed=0)) == 4

    def test_small_widths(self, tiny_model_config):
        assert tiny_model_config.widths == (8, 16, 32, 64, 128)

    def test_plain_unet_has_no_gates(self):
        model = build_model(ModelConfig(base_channels=8, attention=False), seed=0)
        assert count_attention_gates(model) == 0

    def test_seeded_init_is_reproducible(self, tiny_model_config):
        a = build_model(tiny_model_config, seed=5).state_dict()
        b = build_model(tiny_model_config, seed=5).state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a)

    @pytest.mark.parametrize("base", [6, 12, 4])
    def test_base_channels_power_of_two(self, base):
        with pytest.raises(ValueError):
            ModelConfig(base_channels=base)


class TestForward:

    @pytest.mark.parametrize("batch,size", [(2, 32), (1, 64)])
    def test_output_contract(self, tiny_model_config, batch, size):
        model = build_model(tiny_model_config, seed=0).eval()
        out = forward(model, torch.rand(batch, size, size, 1))
        assert out.shape == (batch, size, size, 1)
        assert torch.all((out > 0) & (out < 1))

    @pytest.mark.parametrize("size", [40, 56, 50])
    def test_indivisible_size_rejected(self, tiny_model_config, size):
        model = build_model(tiny_model_config, seed=0)
        with pytest.raises(ShapeError, match="divisible by 16"):
            forward(model, torch.rand(1, size, size, 1))

    def test_non_power_of_two_multiple_accepted(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0).eval()
        assert forward(model, torch.rand(1, 48, 48, 1)).shape == (1, 48, 48, 1)

    def test_wrong_channels_and_rank(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0)
        with pytest.raises(ShapeError, match="input channels"):
            forward(model, torch.rand(1, 32, 32, 3))
        with pytest.raises(ShapeError):
            forward(model, torch.rand(32, 32, 1))

    def test_eval_mode_is_deterministic(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0).eval()
        x = torch.rand(2, 32, 32, 1)
        with torch.no_grad():
            assert torch.equal(model(x), model(x))

    def test_gradients_reach_every_gate(self, tiny_model_config):
        model = build_model(tiny_model_config, seed=0).train()
        model(torch.rand(2, 32, 32, 1)).mean().backward()
        for gate in model.gates:
            for p in gate.parameters():
                assert p.grad is not None and torch.isfinite(p.grad).all()
            assert gate.attention_projection[0].weight.grad.abs().sum() > 0

    @pytest.mark.parametrize("upsample", ["transposed", "bilinear"])
    def test_upsample_modes(self, upsample):
        model = build_model(ModelConfig(base_channels=8, upsample=upsample, norm="none"), seed=0)
        assert model(torch.rand(1, 32, 32, 1)).shape == (1, 32, 32, 1)


class TestAttentionGate:

    def _gate(self, channels=4, norm="none"):
        torch.manual_seed(0)
        return AttentionGate(channels, channels, norm=norm).eval()

    def test_coefficients_in_open_unit_interval(self):
        gate = self._gate()
        skip, g = torch.randn(3, 8, 8, 4), torch.randn(3, 8, 8, 4)
        a = attention_coefficients(skip, g, gate)
        assert a.shape == (3, 8, 8, 1)
        assert torch.all((a > 0) & (a < 1))

    @pytest.mark.parametrize("bias", [100.0, -100.0])
    def test_saturated_logits_stay_inside_open_interval(self, bias):
        gate = self._gate()
        with torch.no_grad():
            gate.attention_projection[0].bias.fill_(bias)
        a = attention_coefficients(torch.randn(2, 8, 8, 4), torch.randn(2, 8, 8, 4), gate)
        assert torch.all((a > 0) & (a < 1))

    def test_output_keeps_skip_shape(self):
        gate = self._gate()
        skip = torch.randn(2, 16, 16, 4)
        assert attention_gate(skip, torch.randn(2, 16, 16, 4), gate).shape == skip.shape

    @pytest.mark.parametrize("norm", ["none", "batch"])
    def test_zero_parameters_halve_the_skip(self, norm):
        gate = self._gate(norm=norm)
        _zero_parameters(gate)
        skip = torch.randn(2, 8, 8, 4)
        out = attention_gate(skip, torch.randn(2, 8, 8, 4), gate)
        torch.testing.assert_close(out, 0.5 * skip)

    def test_output_is_skip_scaled_by_coefficients(self):
        gate = self._gate()
        skip, g = torch.randn(2, 8, 8, 4), torch.randn(2, 8, 8, 4)
        a = attention_coefficients(skip, g, gate)
        out = attention_gate(skip, g, gate)
        torch.testing.assert_close(out, skip * a)

    def test_mismatched_spatial_dims(self):
        gate = self._gate()
        with pytest.raises(ShapeError):
            attention_gate(torch.randn(1, 8, 8, 4), torch.randn(1, 4, 4, 4), gate)


class TestLevelTrace:

    @pytest.mark.parametrize("size", [64, 128, 256])
    def test_skip_and_gate_shapes_match_per_level(self, size):
        model = build_model(ModelConfig(base_channels=8), seed=0).eval()
        traces = trace_levels(model, torch.rand(1, size, size, 1))
        assert [t.level for t in traces] == [0, 1, 2, 3]
        assert [t.skip_shape[-1] for t in traces] == [size // 8, size // 4, size // 2, size]
        assert [t.skip_shape[1] for t in traces] == [64, 32, 16, 8]
        for t in traces:
            assert t.skip_shape == t.gate_shape

    def test_requires_attention(self):
        model = build_model(ModelConfig(base_channels=8, attention=False), seed=0)
        with pytest.raises(ShapeError):
            trace_levels(model, torch.rand(1, 32, 32, 1))
