"""Network definitions."""

from src.models.attention_unet import (
    AttentionGate,
    AttentionUNet,
    ShapeError,
    attention_coefficients,
    attention_gate,
    build_model,
    count_attention_gates,
    forward,
    trace_levels,
)

__all__ = [
    "AttentionGate",
    "AttentionUNet",
    "ShapeError",
    "attention_coefficients",
    "attention_gate",
    "build_model",
    "count_attention_gates",
    "forward",
    "trace_levels",
]
