"""Pixel-wise class prediction and dispersion heat maps.

Both measures are normalized to [0, 1]: they reach 1 on the equiprobable
distribution and 0 on a one-hot distribution.
"""

from __future__ import annotations

import numpy as np

from ._kernels import dispersion_maps

__all__ = ["predict_classes", "entropy_map", "diff_map", "all_maps"]


def all_maps(probs):
    """Return (entropy, diff, classes) for an (H, W, q) probability tensor
    in one pass. Argmax ties break to the lowest class index."""
    ent, diff, cls = dispersion_maps(probs)
    return ent, diff, cls


def predict_classes(probs):
    """Per-pixel argmax class map, ties to the lowest index."""
    return all_maps(probs)[2]


def entropy_map(probs):
    """Shannon entropy per pixel, normalized by log(q); 0*log(0) := 0
    (probabilities below 1e-12 are clamped before the log)."""
    return all_maps(probs)[0]


def diff_map(probs):
    """One minus the largest softmax value plus the second largest."""
    return all_maps(probs)[1]
