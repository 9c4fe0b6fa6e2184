"""
Attention-gated U-Net.

Four encoder levels (two 3x3 conv + norm + ReLU, then 2x2 max-pool), a
bottleneck, four decoder levels (upsample, attention-gated skip concatenation,
two 3x3 conv) and a 1x1 conv + sigmoid head.

FeatureMaps at the public boundary are channels-last (batch, H, W, C); the
modules run channels-first internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.config import ModelConfig
from src.utils import logger

FeatureMap = torch.Tensor


class ShapeError(ValueError):
    """Raised when a FeatureMap violates the network's shape contract."""


def _norm(channels: int, norm: str) -> nn.Module:
    return nn.BatchNorm2d(channels) if norm == "batch" else nn.Identity()


def _to_channels_first(x: FeatureMap) -> torch.Tensor:
    return x.permute(0, 3, 1, 2)


def _to_channels_last(x: torch.Tensor) -> FeatureMap:
    return x.permute(0, 2, 3, 1)


class ConvBlock(nn.Module):
    """(3x3 conv -> norm -> ReLU) x 2."""

    def __init__(self, in_channels: int, out_channels: int, norm: str = "batch"):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            _norm(out_channels, norm),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1),
            _norm(out_channels, norm),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.block(x)


class AttentionGate(nn.Module):
    """
    Additive attention gate on a skip connection.

    a = sigmoid(norm(conv1x1(relu(norm(conv1x1(skip)) + norm(conv1x1(gate))))))
    output = skip * a, broadcast over channels.
    """

    def __init__(
        self,
        skip_channels: int,
        gate_channels: int,
        inter_channels: Optional[int] = None,
        norm: str = "batch",
    ):
        super().__init__()
        inter = inter_channels or max(skip_channels // 2, 1)
        if inter < 1:
            raise ValueError("inter_channels must be >= 1")
        self.inter_channels = inter
        self.skip_projection = nn.Sequential(nn.Conv2d(skip_channels, inter, kernel_size=1), _norm(inter, norm))
        self.gate_projection = nn.Sequential(nn.Conv2d(gate_channels, inter, kernel_size=1), _norm(inter, norm))
        self.attention_projection = nn.Sequential(nn.Conv2d(inter, 1, kernel_size=1), _norm(1, norm))

    def coefficients(self, skip: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        """Per-pixel coefficients in (0, 1), shape (batch, 1, H, W), channels-first."""
        if skip.shape[0] != gate.shape[0] or skip.shape[-2:] != gate.shape[-2:]:
            raise ShapeError(
                f"skip {tuple(skip.shape)} and gate {tuple(gate.shape)} disagree in batch or spatial dims"
            )
        joined = F.relu(self.skip_projection(skip) + self.gate_projection(gate))
        logits = self.attention_projection(joined)
        # sigmoid rounds to exactly 0 or 1 once |logit| exceeds ~17 in float32
        eps = torch.finfo(logits.dtype).eps
        return torch.sigmoid(logits).clamp(eps, 1.0 - eps)

    def forward(self, skip: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        return skip * self.coefficients(skip, gate)


def attention_gate(skip: FeatureMap, gate: FeatureMap, params: AttentionGate) -> FeatureMap:
    """Apply an attention gate to channels-last FeatureMaps."""
    if skip.ndim != 4 or gate.ndim != 4:
        raise ShapeError("attention_gate expects 4-D (batch, H, W, C) feature maps")
    return _to_channels_last(params(_to_channels_first(skip), _to_channels_first(gate)))


def attention_coefficients(skip: FeatureMap, gate: FeatureMap, params: AttentionGate) -> FeatureMap:
    """Coefficients of a gate as a (batch, H, W, 1) FeatureMap."""
    return _to_channels_last(params.coefficients(_to_channels_first(skip), _to_channels_first(gate)))


def _upsampler(in_channels: int, out_channels: int, mode: str) -> nn.Module:
    if mode == "transposed":
        return nn.ConvTranspose2d(in_channels, out_channels, kernel_size=2, stride=2)
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
    )


class AttentionUNet(nn.Module):
    """U-shaped encoder-decoder with an attention gate on each skip connection."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        widths = config.widths
        self.encoders = nn.ModuleList()
        in_channels = config.in_channels
        for width in widths[:-1]:
            self.encoders.append(ConvBlock(in_channels, width, config.norm))
            in_channels = width
        self.pool = nn.MaxPool2d(kernel_size=2)
        self.bottleneck = ConvBlock(widths[-2], widths[-1], config.norm)

        self.upsamplers = nn.ModuleList()
        self.gates = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for level in reversed(range(config.depth)):
            width = widths[level]
            self.upsamplers.append(_upsampler(widths[level + 1], width, config.upsample))
            if config.attention:
                self.gates.append(AttentionGate(width, width, norm=config.norm))
            self.decoders.append(ConvBlock(2 * width, width, config.norm))
        self.head = nn.Conv2d(widths[0], 1, kernel_size=1)

    @property
    def divisor(self) -> int:
        return 2 ** self.config.depth

    def check_input(self, x: FeatureMap) -> None:
        if x.ndim != 4:
            raise ShapeError(f"expected (batch, H, W, C), got shape {tuple(x.shape)}")
        _, height, width, channels = x.shape
        if channels != self.config.in_channels:
            raise ShapeError(f"expected {self.config.in_channels} input channels, got {channels}")
        if height % self.divisor or width % self.divisor:
            raise ShapeError(f"spatial dims ({height}, {width}) must be divisible by {self.divisor}")

    def forward(self, x: FeatureMap) -> FeatureMap:
        self.check_input(x)
        h = _to_channels_first(x)
        skips: List[torch.Tensor] = []
        for encoder in self.encoders:
            h = encoder(h)
            skips.append(h)
            h = self.pool(h)
        h = self.bottleneck(h)
        for level, (upsample, decoder) in enumerate(zip(self.upsamplers, self.decoders)):
            skip = skips[-(level + 1)]
            h = upsample(h)
            gated = self.gates[level](skip, h) if self.config.attention else skip
            h = decoder(torch.cat([gated, h], dim=1))
        return _to_channels_last(torch.sigmoid(self.head(h)))


def init_weights(model: nn.Module) -> None:
    """Kaiming init for convolutions, unit scale / zero shift for norms."""
    for module in model.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.BatchNorm2d):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)


def count_attention_gates(model: nn.Module) -> int:
    return sum(isinstance(m, AttentionGate) for m in model.modules())


def build_model(config: ModelConfig, seed: Optional[int] = None) -> AttentionUNet:
    """Construct and initialize the network; `seed` makes the init reproducible."""
    if seed is not None:
        torch.manual_seed(seed)
    model = AttentionUNet(config)
    init_weights(model)
    logger.info(
        "model_built",
        base_channels=config.base_channels,
        attention_gates=count_attention_gates(model),
        parameters=sum(p.numel() for p in model.parameters()),
    )
    return model


def forward(model: AttentionUNet, batch: FeatureMap) -> FeatureMap:
    """Per-pixel infection probabilities for a (batch, H, W, in_channels) batch."""
    model.check_input(batch)
    return model(batch)


@dataclass
class LevelTrace:
    """Shapes seen by one attention gate during a forward pass."""
    level: int
    skip_shape: Tuple[int, ...]
    gate_shape: Tuple[int, ...]


def trace_levels(model: AttentionUNet, batch: FeatureMap) -> List[LevelTrace]:
    """Run a forward pass and report the skip / upsampled-gate shapes per decoder level."""
    if not model.config.attention:
        raise ShapeError("trace_levels requires a model with attention gates")
    traces: List[LevelTrace] = []

    def make_hook(level: int):
        def hook(module: nn.Module, inputs: Tuple[torch.Tensor, ...], output: torch.Tensor) -> None:
            skip, gate = inputs
            traces.append(LevelTrace(level, tuple(skip.shape), tuple(gate.shape)))
        return hook

    handles = [gate.register_forward_hook(make_hook(i)) for i, gate in enumerate(model.gates)]
    try:
        with torch.no_grad():
            model(batch)
    finally:
        for handle in handles:
            handle.remove()
    return traces
