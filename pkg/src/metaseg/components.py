"""Connected-component decomposition and interior/boundary splitting.

Components are maximal 8-connected sets of same-class pixels. A segment
pixel is interior iff all eight neighbors exist in-image and belong to the
same segment; everything else (including image-border pixels) is boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import interior_mask, label_components

__all__ = ["Decomposition", "decompose"]


@dataclass
class Decomposition:
    """Segments of one class map. `segment_map` holds the segment id per
    pixel (-1 on ignore pixels); ids run 0..n-1 in row-major first-encounter
    order."""

    segment_map: np.ndarray
    classes: np.ndarray  # class per segment id
    sizes: np.ndarray  # S per segment id
    interior_sizes: np.ndarray  # S_in per segment id
    interior: np.ndarray  # bool mask, same shape as segment_map

    @property
    def n_segments(self):
        return len(self.classes)

    @property
    def boundary_sizes(self):
        return self.sizes - self.interior_sizes

    def pixels(self, seg_id):
        return np.argwhere(self.segment_map == seg_id)

    def reconstruct_class_map(self, fill=-1):
        out = np.full(self.segment_map.shape, fill, dtype=np.int32)
        mask = self.segment_map >= 0
        out[mask] = self.classes[self.segment_map[mask]]
        return out


def decompose(class_map, ignore=None):
    """Decompose a class/label map into 8-connected segments.

    `ignore` (an int sentinel, e.g. 255 for ground truth) marks pixels that
    belong to no segment. Every finite segment has at least one boundary
    pixel, so boundary sizes are always >= 1.
    """
    class_map = np.asarray(class_map)
    ignore_mask = None if ignore is None else class_map == ignore
    segment_map, n = label_components(class_map, ignore_mask)
    inner = interior_mask(segment_map)
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Decomposition(segment_map, empty.astype(np.int32), empty, empty, inner)
    flat = segment_map.ravel()
    valid = flat >= 0
    sizes = np.bincount(flat[valid], minlength=n)
    interior_sizes = np.bincount(flat[inner.ravel() & valid], minlength=n)
    classes = np.zeros(n, dtype=np.int32)
    classes[flat[valid]] = np.asarray(class_map).ravel()[valid]
    return Decomposition(segment_map, classes, sizes, interior_sizes, inner)
