"""PNG rendering of dispersion heat maps and per-segment score overlays."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import IoFailure

__all__ = ["render_heatmap", "render_overlay"]


def _round_half_up(x):
    return np.floor(x + 0.5).astype(np.uint8)


def render_heatmap(values, path):
    """8-bit grayscale PNG; high dispersion renders dark
    (pixel = round(255 * (1 - v)))."""
    values = np.asarray(values, dtype=np.float64)
    gray = _round_half_up(255.0 * (1.0 - np.clip(values, 0.0, 1.0)))
    try:
        Image.fromarray(gray, mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def render_overlay(segment_map, values, path, no_gt_mask=None):
    """Fill each segment with a linear red-to-green color by its score in
    [0, 1]. `values` maps segment id -> score; segments without a score and
    pixels without ground truth render white."""
    seg = np.asarray(segment_map)
    h, w = seg.shape
    rgb = np.full((h, w, 3), 255, dtype=np.uint8)
    for seg_id, v in values.items():
        mask = seg == seg_id
        v = float(np.clip(v, 0.0, 1.0))
        rgb[mask, 0] = _round_half_up(np.float64(255.0 * (1.0 - v)))
        rgb[mask, 1] = _round_half_up(np.float64(255.0 * v))
        rgb[mask, 2] = 0
    if no_gt_mask is not None:
        rgb[np.asarray(no_gt_mask, dtype=bool)] = 255
    try:
        Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
