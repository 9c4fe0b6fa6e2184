"""
Configuration module for hunet.

Two layers:
- Settings: environment-level knobs (device, threads, log level) from env / .env.
- RunConfig: the experiment (model, data, training, loss) resolved from a TOML
  file, environment overrides and CLI flags. Uses pydantic-settings for validation.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Type

import tomli_w
from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

ALPHA_BETA_TOLERANCE = 1e-9
NETWORK_DEPTH = 4


class Settings(BaseSettings):
    """Process settings loaded from environment / .env file."""

    device: Literal["auto", "cpu", "cuda"] = "auto"
    num_threads: int = 0  # 0 keeps torch's default
    log_level: str = "INFO"
    deterministic: bool = False
    runs_dir: str = "runs"

    model_config = SettingsConfigDict(
        env_prefix="HUNET_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )


@lru_cache()
def get_settings() -> Settings:
    """Cached settings singleton."""
    return Settings()


# ── Experiment configuration ──

class LossPreset(str, Enum):
    """Training objectives compared in the loss ablation."""
    BCE = "bce"
    DICE_BOUNDARY = "dice_boundary"
    BCE_DICE = "bce_dice"
    BI_H = "bi_h"


class ModelConfig(BaseModel):
    """Architecture of the attention-gated U-Net."""

    in_channels: int = Field(default=1, ge=1)
    base_channels: int = 64
    depth: Literal[4] = NETWORK_DEPTH
    norm: Literal["batch", "none"] = "batch"
    upsample: Literal["transposed", "bilinear"] = "transposed"
    attention: bool = True

    @field_validator("base_channels")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 8 or v & (v - 1):
            raise ValueError(f"base_channels must be a power of two >= 8, got {v}")
        return v

    @property
    def widths(self) -> Tuple[int, ...]:
        """Encoder widths per level followed by the bottleneck width."""
        return tuple(self.base_channels * 2 ** i for i in range(self.depth + 1))


class LossConfig(BaseModel):
    """Weights and constants of the Bi-category Hybrid loss."""

    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    beta: float = Field(default=0.5, ge=0.0, le=1.0)
    dice_smooth: float = Field(default=1.0, gt=0.0)
    bce_weighting: Literal["hed", "uniform"] = "hed"
    eps: float = Field(default=1e-7, gt=0.0, lt=0.5)

    @model_validator(mode="after")
    def _weights_sum_to_one(self) -> "LossConfig":
        if abs(self.alpha + self.beta - 1.0) > ALPHA_BETA_TOLERANCE:
            raise ValueError(
                f"alpha + beta must equal 1 (got alpha={self.alpha}, beta={self.beta})"
            )
        return self


class TrainConfig(BaseModel):
    """Optimisation schedule."""

    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=32, ge=1)
    optimizer: Literal["adam", "sgd"] = "adam"
    lr: float = Field(default=1e-3, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0)  # sgd only
    scheduler: Literal["reduce-on-plateau", "none"] = "reduce-on-plateau"
    scheduler_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    scheduler_patience: int = Field(default=5, ge=1)
    min_lr: float = Field(default=1e-6, ge=0.0)
    seed: int = 0
    checkpoint_every: int = Field(default=10, ge=1)
    augment_hflip: bool = True
    num_workers: int = Field(default=0, ge=0)
    eval_threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    loss_preset: LossPreset = LossPreset.BI_H
    loss: LossConfig = Field(default_factory=LossConfig)


class DataConfig(BaseModel):
    """Where slices come from and how they are prepared."""

    source: str = "synth://200x64"
    layout: Literal["png-pairs", "nifti"] = "png-pairs"
    image_size: int = 256
    window_low: float = -1000.0
    window_high: float = 400.0
    label: Optional[int] = None  # None keeps any nonzero mask label
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    val_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    synth_seed: int = 7

    @field_validator("image_size")
    @classmethod
    def _divisible(cls, v: int) -> int:
        if v <= 0 or v % 2 ** NETWORK_DEPTH:
            raise ValueError(f"image_size must be a positive multiple of {2 ** NETWORK_DEPTH}, got {v}")
        return v

    @model_validator(mode="after")
    def _window_order(self) -> "DataConfig":
        if self.window_low >= self.window_high:
            raise ValueError("window_low must be below window_high")
        return self


class RunConfig(BaseSettings):
    """Fully resolved run: everything needed to re-run a command."""

    output_dir: str = Field(default_factory=lambda: str(Path(get_settings().runs_dir) / "default"))
    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)

    model_config = SettingsConfigDict(
        env_prefix="HUNET_RUN_", env_nested_delimiter="__", extra="forbid"
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, env_settings, TomlConfigSettingsSource(settings_cls))

    def to_toml(self) -> str:
        return tomli_w.dumps(self.model_dump(mode="json", exclude_none=True))

    def write_snapshot(self, directory: Path) -> Path:
        """Write the resolved config as `config.resolved.toml` under directory."""
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "config.resolved.toml"
        path.write_text(self.to_toml(), encoding="utf-8")
        return path


def load_run_config(
    path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a RunConfig from an optional TOML file plus nested overrides.

    Overrides win over environment values, which win over the file.
    """
    if path is not None and not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")

    class FileRunConfig(RunConfig):
        model_config = SettingsConfigDict(
            env_prefix="HUNET_RUN_",
            env_nested_delimiter="__",
            extra="forbid",
            toml_file=path,
        )

    return FileRunConfig(**(overrides or {}))
