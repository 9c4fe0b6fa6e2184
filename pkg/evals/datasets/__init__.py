"""
Reference Datasets.

Published figures that local reports are shown against.
"""

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List


DATASETS_DIR = Path(__file__).parent
REFERENCE_FILE = DATASETS_DIR / "reference_results.json"
TABLES = ("comparison", "loss_ablation")


@lru_cache()
def load_reference_results() -> Dict[str, Any]:
    """Load the reference figures file.

    Returns:
        Parsed JSON with "comparison" and "loss_ablation" row lists.
    """
    with open(REFERENCE_FILE, "r", encoding="utf-8") as f:
        return json.load(f)


def load_reference_table(table: str) -> List[Dict[str, Any]]:
    """Rows of one reference table.

    Args:
        table: "comparison" (architectures) or "loss_ablation" (loss presets).

    Returns:
        List of row dicts with model, dice, sensitivity and specificity.
    """
    if table not in TABLES:
        raise KeyError(f"unknown reference table {table!r}; expected one of {TABLES}")
    return list(load_reference_results()[table])


def reference_for_preset(preset: str) -> Dict[str, Any]:
    """The loss-ablation reference row for a loss preset value."""
    for row in load_reference_table("loss_ablation"):
        if row["preset"] == preset:
            return row
    raise KeyError(f"no reference row for preset {preset!r}")
