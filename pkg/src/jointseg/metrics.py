"""Overlap and surface-distance metrics in physical units.

Surface voxels are foreground voxels with at least one 6-neighbour that is
background or outside the grid. Distances are between voxel centres
(index * spacing) and are exact nearest-neighbour distances.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import ShapeError

FOREGROUND_CLASSES = tuple(range(1, 8))
_SIX = ndimage.generate_binary_structure(3, 1)


def _check(pred, gt):
    p = getattr(pred, "data", pred)
    g = getattr(gt, "data", gt)
    if p.shape != g.shape:
        raise ShapeError(f"prediction dims {p.shape} differ from ground truth {g.shape}")
    return np.asarray(p), np.asarray(g)


def dsc(pred, gt, cls: int) -> float:
    """Dice in percent; 100 when the class is absent from both."""
    p, g = _check(pred, gt)
    pm, gm = p == cls, g == cls
    total = int(pm.sum()) + int(gm.sum())
    if total == 0:
        return 100.0
    return 100.0 * 2.0 * int((pm & gm).sum()) / total


def surface_points(mask: np.ndarray, spacing) -> np.ndarray:
    """Physical coordinates ``(n, 3)`` of the border voxels of ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    interior = ndimage.binary_erosion(mask, structure=_SIX, border_value=0)
    border = mask & ~interior
    return np.argwhere(border).astype(np.float64) * np.asarray(spacing, dtype=np.float64)


def _directed(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d, _ = cKDTree(b).query(a, k=1)
    return d


def surface_distances(pred, gt, cls: int, spacing):
    """Nearest-surface distances pred->gt and gt->pred, or ``None`` if either surface is empty."""
    p, g = _check(pred, gt)
    sp = surface_points(p == cls, spacing)
    sg = surface_points(g == cls, spacing)
    if len(sp) == 0 or len(sg) == 0:
        return None
    return _directed(sp, sg), _directed(sg, sp)


def hausdorff(pred, gt, cls: int, spacing) -> float | None:
    d = surface_distances(pred, gt, cls, spacing)
    if d is None:
        return None
    return float(max(d[0].max(), d[1].max()))


def assd(pred, gt, cls: int, spacing) -> float | None:
    d = surface_distances(pred, gt, cls, spacing)
    if d is None:
        return None
    return float((d[0].sum() + d[1].sum()) / (len(d[0]) + len(d[1])))


@dataclass
class ClassMetrics:
    cls: int
    dsc: float
    hd: float | None
    assd: float | None

    @property
    def distances_valid(self) -> bool:
        return self.hd is not None


@dataclass
class MetricsReport:
    per_class: list[ClassMetrics] = field(default_factory=list)

    @property
    def mean_dsc(self) -> float:
        return float(np.mean([c.dsc for c in self.per_class]))

    def _mean(self, attr):
        vals = [getattr(c, attr) for c in self.per_class if getattr(c, attr) is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_hd(self):
        return self._mean("hd")

    @property
    def mean_assd(self):
        return self._mean("assd")

    def to_csv(self) -> str:
        def cell(v):
            return "nan" if v is None else f"{v:.6f}"

        buf = io.StringIO()
        buf.write("class,dsc,hd,assd\n")
        for c in self.per_class:
            buf.write(f"{c.cls},{cell(c.dsc)},{cell(c.hd)},{cell(c.assd)}\n")
        buf.write(f"mean,{cell(self.mean_dsc)},{cell(self.mean_hd)},{cell(self.mean_assd)}\n")
        return buf.getvalue()


def evaluate(pred, gt, spacing=None, classes=FOREGROUND_CLASSES) -> MetricsReport:
    if spacing is None:
        spacing = getattr(gt, "spacing", (1.0, 1.0, 1.0))
    _check(pred, gt)
    report = MetricsReport()
    for cls in classes:
        report.per_class.append(ClassMetrics(
            cls, dsc(pred, gt, cls), hausdorff(pred, gt, cls, spacing), assd(pred, gt, cls, spacing)
        ))
    return report
