"""Resampling, cube cropping, per-modality normalization and modality detection."""
from __future__ import annotations

import enum

import numpy as np

from .errors import DegenerateIntensityError, EmptyForegroundError, InvalidModeError
from .interp import Interp, grid_coords, sample
from .volume_io import LabelMap, Volume3

CT_SCALE = 2048.0
# min(vol) <= CT_AIR_MAX and (max - min) >= CT_MIN_RANGE  =>  CT
CT_AIR_MAX = -200.0
CT_MIN_RANGE = 1000.0


class Modality(enum.Enum):
    CT = "CT"
    MR = "MR"

    @classmethod
    def parse(cls, text: str) -> "Modality":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown modality {text!r}") from None


def resample(vol, target_spacing, mode: Interp = Interp.TRILINEAR, dims=None):
    """Resample ``vol`` onto a grid with ``target_spacing`` (mm).

    Output voxel centres are placed in physical space and mapped back to
    fractional input indices; reads beyond the grid replicate the edge.
    ``dims`` forces the output size (used to go back to an original grid),
    otherwise it is ``round(dims * spacing / target_spacing)``.
    """
    mode = Interp(mode)
    if isinstance(vol, LabelMap) and mode is not Interp.NEAREST:
        raise InvalidModeError("label maps can only be resampled with nearest-neighbour")
    target = np.broadcast_to(np.asarray(target_spacing, dtype=np.float64), (3,))
    if np.any(target <= 0):
        raise ValueError(f"target spacing must be positive, got {target_spacing}")
    in_spacing = np.asarray(vol.spacing, dtype=np.float64)
    in_dims = np.asarray(vol.dims)
    if dims is None:
        dims = np.maximum(1, np.round(in_dims * in_spacing / target).astype(int))
    dims = tuple(int(d) for d in dims)
    out_spacing = tuple(float(t) for t in target)

    if dims == vol.dims and np.array_equal(target, in_spacing):
        return vol.with_data(vol.data.copy(), out_spacing)

    coords = [
        (g + 0.5) * t / s - 0.5 for g, t, s in zip(grid_coords(dims), target, in_spacing)
    ]
    out = sample(vol.data, coords, order=mode.order)
    return vol.with_data(out.astype(vol.data.dtype), out_spacing)


def foreground_center(labels: LabelMap) -> tuple[float, float, float]:
    """Mean voxel coordinate (x, y, z) of all voxels with a label > 0."""
    idx = np.nonzero(labels.data)
    if idx[0].size == 0:
        raise EmptyForegroundError("label map has no foreground voxels")
    return tuple(float(np.mean(i)) for i in idx)


def image_center(vol) -> tuple[float, float, float]:
    return tuple((n - 1) / 2.0 for n in vol.dims)


def _crop_offset(center, size: int) -> np.ndarray:
    # input index of output voxel 0, so that round(center) lands on size // 2
    return np.floor(np.asarray(center, dtype=np.float64) + 0.5).astype(int) - size // 2


def _overlap(offset, in_dims, out_dims):
    src, dst = [], []
    for off, n_in, n_out in zip(offset, in_dims, out_dims):
        lo = max(0, -off)
        hi = min(n_out, n_in - off)
        if hi <= lo:
            return None
        dst.append(slice(lo, hi))
        src.append(slice(lo + off, hi + off))
    return tuple(src), tuple(dst)


def crop_to_cube(vol, center, size: int, fill=0.0):
    """Cut a ``size``-cube out of ``vol`` centred on ``center``; outside reads give ``fill``."""
    if size < 1:
        raise ValueError("crop size must be >= 1")
    out = np.full((size,) * 3, fill, dtype=vol.data.dtype)
    ov = _overlap(_crop_offset(center, size), vol.dims, out.shape)
    if ov is not None:
        src, dst = ov
        out[dst] = vol.data[src]
    return vol.with_data(out)


def uncrop_from_cube(cube, center, dims, fill=0.0):
    """Inverse of :func:`crop_to_cube`: paste ``cube`` back into a ``dims`` grid."""
    size = cube.dims[0]
    out = np.full(tuple(dims), fill, dtype=cube.data.dtype)
    ov = _overlap(_crop_offset(center, size), dims, cube.dims)
    if ov is not None:
        src, dst = ov
        out[src] = cube.data[dst]
    return cube.with_data(out)


def normalize(vol: Volume3, modality: Modality) -> Volume3:
    """CT: divide by 2048 and clip to [-1, 1]. MR: map the 10th/90th
    percentiles to -1/+1 linearly, without clipping."""
    x = vol.data.astype(np.float64)
    if Modality(modality) is Modality.CT:
        out = np.clip(x / CT_SCALE, -1.0, 1.0)
    else:
        p10, p90 = np.percentile(x, [10, 90])
        if not p90 > p10:
            raise DegenerateIntensityError(
                f"MR volume has equal 10th and 90th percentiles ({p10})"
            )
        out = 2.0 * (x - p10) / (p90 - p10) - 1.0
    return vol.with_data(out.astype(np.float32))


def detect_modality(vol: Volume3) -> Modality:
    lo = float(vol.data.min())
    hi = float(vol.data.max())
    if lo <= CT_AIR_MAX and hi - lo >= CT_MIN_RANGE:
        return Modality.CT
    return Modality.MR
