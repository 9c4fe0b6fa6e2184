"""
Shared utilities for hunet.
"""

from __future__ import annotations

import json
import logging
import os
import random
import sys
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np
import structlog
import torch

# ── Structured Logging ───────────────────────────────────────────


def configure_logging(level: str = "INFO") -> None:
    """Configure structlog JSON logging on stderr at the given level."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


configure_logging(os.environ.get("HUNET_LOG_LEVEL", "INFO"))

logger = structlog.get_logger("hunet")


# ── Reproducibility ──────────────────────────────────────────────

def seed_everything(seed: int, deterministic: bool = False) -> None:
    """Seed python, numpy and torch RNGs; optionally force deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if torch.cuda.is_available():
        torch.cuda.manual_seed_all(seed)
    if deterministic:
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False
        torch.use_deterministic_algorithms(True, warn_only=True)
    logger.debug("rng_seeded", seed=seed, deterministic=deterministic)


def resolve_device(name: Optional[str] = None) -> torch.device:
    """Map a device name ("auto", "cpu", "cuda") to a torch device."""
    if name is None:
        from src.config import get_settings

        name = get_settings().device
    if name == "auto":
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")
    if name == "cuda" and not torch.cuda.is_available():
        raise ValueError("CUDA requested but not available")
    return torch.device(name)


# ── Helpers ──────────────────────────────────────────────────────

def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def safe_json_dumps(obj: Any, indent: Optional[int] = None) -> str:
    """JSON serialize with fallback for non-serializable objects."""
    try:
        return json.dumps(obj, default=str, ensure_ascii=False, indent=indent)
    except Exception:
        return str(obj)
