"""Synthetic paired CT-like / MR-like heart phantoms with 7 labelled structures.

Label IDs: 1 LV blood pool, 2 RV, 3 LA, 4 RA, 5 LV myocardium, 6 aorta,
7 pulmonary artery. Geometry is defined in normalized coordinates
``[-1, 1]^3`` so the phantom scales with the grid size.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .volume_io import ElementType, LabelMap, Volume3

LV, RV, LA, RA, MYO, AO, PA = range(1, 8)
STRUCTURE_NAMES = {LV: "LV", RV: "RV", LA: "LA", RA: "RA", MYO: "MYO", AO: "AO", PA: "PA"}

# mean intensity per label (0 = soft tissue inside the body)
CT_HU = {0: 0.0, LV: 450.0, RV: 650.0, LA: 850.0, RA: 1050.0, MYO: 200.0, AO: 1250.0, PA: 1450.0}
CT_AIR = -1000.0
CT_NOISE = 15.0
MR_LEVEL = {0: 250.0, LV: 900.0, RV: 400.0, LA: 1150.0, RA: 550.0, MYO: 100.0, AO: 700.0, PA: 1400.0}
MR_AIR = 5.0
MR_NOISE = 0.05
MIN_SIZE = 16
# heart extent relative to the grid
HEART_SCALE = 1.3


def _ellipsoid(u, center, radii):
    return sum(((c - m) / r) ** 2 for c, m, r in zip(u, center, radii)) <= 1.0


def _tube(u, axis, center, radius, extent):
    other = [i for i in range(3) if i != axis]
    d2 = sum((u[i] - c) ** 2 for i, c in zip(other, center))
    return (d2 <= radius**2) & (u[axis] >= extent[0]) & (u[axis] <= extent[1])


def phantom_labels(rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Label grid and body mask for one randomized phantom."""
    ax = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    u = np.meshgrid(ax, ax, ax, indexing="ij")
    shift = rng.uniform(-0.05, 0.05, size=3)
    u = [(c - s) / HEART_SCALE for c, s in zip(u, shift)]

    def jitter(radii):
        return tuple(r * rng.uniform(0.9, 1.1) for r in radii)

    labels = np.zeros((size,) * 3, dtype=np.uint8)

    def paint(mask, lab):
        labels[mask & (labels == 0)] = lab

    lv_r = jitter((0.36, 0.36, 0.45))
    lv_c = (0.2, 0.0, -0.2)
    thick = 0.17 * rng.uniform(0.9, 1.1)
    paint(_ellipsoid(u, lv_c, lv_r), LV)
    paint(_ellipsoid(u, lv_c, tuple(r + thick for r in lv_r)), MYO)
    paint(_ellipsoid(u, (-0.5, 0.0, -0.2), jitter((0.30, 0.50, 0.50))), RV)
    paint(_ellipsoid(u, (0.3, 0.1, 0.5), jitter((0.36, 0.36, 0.30))), LA)
    paint(_ellipsoid(u, (-0.4, 0.1, 0.45), jitter((0.32, 0.38, 0.32))), RA)
    paint(_tube(u, 2, (-0.02, 0.55), 0.2 * rng.uniform(0.9, 1.1), (-0.3, 0.9)), AO)
    paint(_tube(u, 1, (-0.1, 0.1), 0.19 * rng.uniform(0.9, 1.1), (-0.9, -0.3)), PA)
    body = _ellipsoid(u, (0.0, 0.0, 0.0), (0.92 / HEART_SCALE,) * 3) | (labels > 0)
    return labels, body


def generate_phantom(rng: np.random.Generator, size: int = 32, spacing=1.5):
    """Return ``(ct, mr, labels)`` on a ``size``-cube grid with isotropic ``spacing`` mm."""
    if size < MIN_SIZE:
        raise ConfigError(f"phantom size must be >= {MIN_SIZE}, got {size}")
    labels, body = phantom_labels(rng, size)

    ct_lut = np.array([CT_HU[k] for k in range(8)])
    ct = np.where(body, ct_lut[labels], CT_AIR) + rng.normal(0.0, CT_NOISE, labels.shape)
    ct = np.rint(ct)

    mr_lut = np.array([MR_LEVEL[k] for k in range(8)])
    mr = np.where(body, mr_lut[labels], MR_AIR) * (1.0 + rng.normal(0.0, MR_NOISE, labels.shape))
    mr = np.abs(mr)

    return (
        Volume3(ct, spacing, ElementType.INT16),
        Volume3(mr, spacing),
        LabelMap(labels, spacing),
    )
