"""Spatial (affine + elastic) and intensity augmentation.

A displacement field is an array of shape ``(3, nx, ny, nz)`` holding, for
each output voxel, the offset in voxels to the input position it reads from
(backward warping).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidModeError, ShapeError
from .interp import Interp, grid_coords, sample
from .preprocess import Modality
from .volume_io import NUM_CLASSES, LabelMap, Volume3


@dataclass(frozen=True)
class SpatialAugConfig:
    max_translation: float = 20.0
    max_rotation: float = 0.35
    scale_range: tuple[float, float] = (0.8, 1.2)
    elastic_grid_nodes: int = 8
    max_elastic: float = 15.0

    def __post_init__(self):
        lo, hi = self.scale_range
        if min(self.max_translation, self.max_rotation, self.max_elastic) < 0:
            raise ConfigError("augmentation maxima must be >= 0")
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid scale range {self.scale_range}")
        if self.elastic_grid_nodes < 2:
            raise ConfigError("elastic grid needs at least 2 nodes per dimension")


@dataclass(frozen=True)
class IntensityRanges:
    shift: float = 0.2
    ct_scale: tuple[float, float] = (0.8, 1.2)
    mr_scale: tuple[float, float] = (0.6, 1.4)
    label_shift: float = 0.1
    label_scale: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self):
        for lo, hi in (self.ct_scale, self.mr_scale, self.label_scale):
            if not 0 < lo <= hi:
                raise ConfigError("intensity scale ranges must satisfy 0 < lo <= hi")
        if self.shift < 0 or self.label_shift < 0:
            raise ConfigError("intensity shifts must be >= 0")


@dataclass
class IntensityAugParams:
    global_shift: float = 0.0
    global_scale: float = 1.0
    per_label: dict[int, tuple[float, float]] = field(default_factory=dict)  # label -> (shift, scale)


def rotation_matrix(angles) -> np.ndarray:
    """Rotation about x, then y, then z axes composed as ``Rx @ Ry @ Rz``."""
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def affine_field(dims, translation, angles, scale) -> np.ndarray:
    """Displacement of ``v -> R (scale * (v - c)) + c + t`` about the grid centre ``c``."""
    grid = np.stack(grid_coords(dims))
    center = (np.asarray(dims, dtype=np.float64) - 1) / 2.0
    rel = grid - center[:, None, None, None]
    rot = rotation_matrix(angles)
    moved = np.einsum("ij,j...->i...", rot, scale * rel)
    moved += (center + np.asarray(translation, dtype=np.float64))[:, None, None, None]
    return moved - grid


def upsample_control_grid(nodes: np.ndarray, dims) -> np.ndarray:
    """Trilinearly interpolate ``(3, g, g, g)`` control vectors onto ``dims``; the
    outermost nodes sit on the outermost voxels."""
    g = nodes.shape[1:]
    coords = [
        c * ((gn - 1) / (n - 1)) if n > 1 else np.zeros_like(c)
        for c, gn, n in zip(grid_coords(dims), g, dims)
    ]
    return np.stack([sample(comp, coords, order=1) for comp in nodes])


def sample_spatial(cfg: SpatialAugConfig, dims, rng: np.random.Generator) -> np.ndarray:
    dims = tuple(int(d) for d in dims)
    translation = rng.uniform(-cfg.max_translation, cfg.max_translation, size=3)
    angles = rng.uniform(-cfg.max_rotation, cfg.max_rotation, size=3)
    scale = rng.uniform(*cfg.scale_range)
    g = cfg.elastic_grid_nodes
    nodes = rng.uniform(-cfg.max_elastic, cfg.max_elastic, size=(3, g, g, g))
    disp = affine_field(dims, translation, angles, scale)
    if cfg.max_elastic > 0:
        disp += upsample_control_grid(nodes, dims)
    return disp


def apply_field(vol, disp: np.ndarray, mode: Interp = Interp.TRILINEAR, fill=0.0):
    """Backward-warp ``vol``: ``out(v) = vol(v + disp(v))``; outside reads give ``fill``."""
    mode = Interp(mode)
    if disp.shape != (3,) + vol.dims:
        raise ShapeError(f"field shape {disp.shape} does not match volume dims {vol.dims}")
    if isinstance(vol, LabelMap) and mode is not Interp.NEAREST:
        raise InvalidModeError("label maps can only be warped with nearest-neighbour")
    coords = [g + d for g, d in zip(grid_coords(vol.dims), disp)]
    out = sample(vol.data, coords, order=mode.order, fill=fill)
    return vol.with_data(out.astype(vol.data.dtype))


def sample_intensity(modality: Modality, labels_present, rng: np.random.Generator,
                     ranges: IntensityRanges = IntensityRanges()) -> IntensityAugParams:
    scale_range = ranges.ct_scale if Modality(modality) is Modality.CT else ranges.mr_scale
    shift = rng.uniform(-ranges.shift, ranges.shift)
    scale = rng.uniform(*scale_range)
    per_label = {}
    for lab in sorted(int(v) for v in labels_present):
        if lab == 0:
            continue
        per_label[lab] = (
            float(rng.uniform(-ranges.label_shift, ranges.label_shift)),
            float(rng.uniform(*ranges.label_scale)),
        )
    return IntensityAugParams(float(shift), float(scale), per_label)


def apply_intensity(vol: Volume3, labels: LabelMap, p: IntensityAugParams) -> Volume3:
    if vol.dims != labels.dims:
        raise ShapeError(f"image dims {vol.dims} differ from label dims {labels.dims}")
    shift_lut = np.zeros(NUM_CLASSES, dtype=np.float64)
    scale_lut = np.ones(NUM_CLASSES, dtype=np.float64)
    for lab, (t, s) in p.per_label.items():
        shift_lut[lab] = t
        scale_lut[lab] = s
    x = vol.data.astype(np.float64)
    out = scale_lut[labels.data] * (p.global_scale * x + p.global_shift) + shift_lut[labels.data]
    return vol.with_data(out.astype(np.float32))
