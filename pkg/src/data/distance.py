"""
Signed distance maps for the boundary loss.

Negative inside the mask, positive outside, Euclidean pixel distance to the
nearest pixel of the opposite class.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import distance_transform_edt

from src.data.types import DataError, MaskImage, SignedDistanceMap


def signed_distance_map(mask: MaskImage | np.ndarray) -> SignedDistanceMap:
    """
    Compute phi for a binary mask.

    Background pixels get the distance to the nearest foreground pixel,
    foreground pixels the negated distance to the nearest background pixel.
    All-foreground and all-background masks map to phi == 0.
    """
    pixels = mask.pixels if isinstance(mask, MaskImage) else np.asarray(mask)
    if not np.isin(pixels, (0, 1)).all():
        raise DataError("signed_distance_map requires a binary mask")

    fg = pixels.astype(bool)
    if fg.all() or not fg.any():
        return SignedDistanceMap(np.zeros(pixels.shape, dtype=np.float64))

    outside = distance_transform_edt(~fg)
    inside = distance_transform_edt(fg)
    return SignedDistanceMap((outside - inside).astype(np.float64))
