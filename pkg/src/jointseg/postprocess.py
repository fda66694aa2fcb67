"""Largest-connected-component filtering of label maps."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .volume_io import LabelMap

_STRUCTURES = {
    6: ndimage.generate_binary_structure(3, 1),
    18: ndimage.generate_binary_structure(3, 2),
    26: ndimage.generate_binary_structure(3, 3),
}


def connected_components(mask: np.ndarray, connectivity: int = 26):
    """Label connected components of a boolean grid.

    Returns ``(ids, sizes)`` where ``ids`` is 0 on background and ``1..n``
    on components, numbered in order of first appearance in a C-order scan,
    and ``sizes[i]`` is the voxel count of component ``i + 1``.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}")
    ids, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_STRUCTURES[connectivity])
    sizes = np.bincount(ids.ravel(), minlength=n + 1)[1:]
    return ids, sizes


def _keep_largest(mask: np.ndarray, connectivity: int) -> np.ndarray:
    ids, sizes = connected_components(mask, connectivity)
    if sizes.size == 0:
        return mask
    # argmax picks the lowest id on ties
    return ids == (int(np.argmax(sizes)) + 1)


def largest_cc_filter(labels: LabelMap, connectivity: int = 26) -> LabelMap:
    """Keep the largest component of every label, then the largest component
    of the remaining foreground as a whole; everything else becomes 0."""
    out = labels.data.copy()
    for lab in np.unique(out):
        if lab == 0:
            continue
        mask = out == lab
        out[mask & ~_keep_largest(mask, connectivity)] = 0
    fg = out > 0
    out[fg & ~_keep_largest(fg, connectivity)] = 0
    return labels.with_data(out)
