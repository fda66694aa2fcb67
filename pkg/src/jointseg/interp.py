"""Point sampling of 3D grids in voxel-index coordinates."""
from __future__ import annotations

import enum

import numpy as np


class Interp(enum.Enum):
    TRILINEAR = "trilinear"
    NEAREST = "nearest"

    @property
    def order(self) -> int:
        return 1 if self is Interp.TRILINEAR else 0


def sample(data: np.ndarray, coords, order: int = 1, fill=None) -> np.ndarray:
    """Sample ``data`` at fractional index positions.

    ``coords`` is a sequence of three arrays (same shape) holding the x, y and
    z index of each query point. ``order`` 1 is trilinear, 0 nearest
    neighbour (ties round up). With ``fill=None`` coordinates are clamped to
    the grid (edge replication); otherwise any point outside
    ``[0, n - 1]`` on some axis returns ``fill``.
    """
    coords = [np.asarray(c, dtype=np.float64) for c in coords]
    shape = data.shape
    inside = None
    if fill is not None:
        inside = np.ones(coords[0].shape, dtype=bool)
        for c, n in zip(coords, shape):
            if order == 0:
                r = np.floor(c + 0.5)
                inside &= (r >= 0) & (r <= n - 1)
            else:
                inside &= (c >= 0) & (c <= n - 1)
    coords = [np.clip(c, 0, n - 1) for c, n in zip(coords, shape)]

    if order == 0:
        idx = tuple(np.floor(c + 0.5).astype(np.intp) for c in coords)
        out = data[idx]
    else:
        lo, frac = [], []
        for c, n in zip(coords, shape):
            i0 = np.clip(np.floor(c).astype(np.intp), 0, max(n - 2, 0))
            lo.append(i0)
            frac.append(c - i0 if n > 1 else np.zeros_like(c))
        hi = [np.minimum(i0 + 1, n - 1) for i0, n in zip(lo, shape)]
        fx, fy, fz = frac
        out = np.zeros(coords[0].shape, dtype=np.float64)
        for ix, wx in ((lo[0], 1 - fx), (hi[0], fx)):
            for iy, wy in ((lo[1], 1 - fy), (hi[1], fy)):
                for iz, wz in ((lo[2], 1 - fz), (hi[2], fz)):
                    out += wx * wy * wz * data[ix, iy, iz]
        out = out.astype(data.dtype if data.dtype.kind == "f" else np.float64)

    if inside is not None:
        out = np.where(inside, out, np.asarray(fill, dtype=out.dtype))
    return out


def grid_coords(dims) -> list[np.ndarray]:
    """Index coordinates of every voxel of a grid, as three float arrays."""
    return [g.astype(np.float64) for g in np.meshgrid(*(np.arange(n) for n in dims), indexing="ij")]
