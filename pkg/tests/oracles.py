"""Slow, independent reference implementations used as test oracles."""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


def trilinear_point(data, x, y, z):
    """Clamp-to-edge trilinear interpolation of a single point, pure Python."""
    nx, ny, nz = data.shape
    pt = [min(max(v, 0.0), n - 1) for v, n in zip((x, y, z), (nx, ny, nz))]
    base = [min(int(math.floor(v)), max(n - 2, 0)) for v, n in zip(pt, (nx, ny, nz))]
    total = 0.0
    for corner in itertools.product((0, 1), repeat=3):
        w = 1.0
        idx = []
        for v, b, c, n in zip(pt, base, corner, (nx, ny, nz)):
            f = v - b if n > 1 else 0.0
            w *= f if c else 1.0 - f
            idx.append(min(b + c, n - 1))
        total += w * float(data[tuple(idx)])
    return total


def conv3d_naive(x, w, b=None):
    """'Same' zero-padded cross-correlation by explicit summation.

    x: (Cin, X, Y, Z); w: (Cout, Cin, k, k, k)."""
    cin, nx, ny, nz = x.shape
    cout, _, k, _, _ = w.shape
    r = k // 2
    out = np.zeros((cout, nx, ny, nz))
    for o in range(cout):
        for i, j, l in itertools.product(range(nx), range(ny), range(nz)):
            acc = 0.0 if b is None else float(b[o])
            for c in range(cin):
                for a, bb, cc in itertools.product(range(k), repeat=3):
                    xi, yj, zl = i + a - r, j + bb - r, l + cc - r
                    if 0 <= xi < nx and 0 <= yj < ny and 0 <= zl < nz:
                        acc += w[o, c, a, bb, cc] * x[c, xi, yj, zl]
            out[o, i, j, l] = acc
    return out


def neighbours(connectivity):
    offs = []
    for d in itertools.product((-1, 0, 1), repeat=3):
        n = sum(abs(v) for v in d)
        if n == 0:
            continue
        if connectivity == 6 and n > 1:
            continue
        if connectivity == 18 and n > 2:
            continue
        offs.append(d)
    return offs


def flood_fill_components(mask, connectivity=26):
    """List of components, each a set of voxel index tuples (BFS)."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    offs = neighbours(connectivity)
    comps = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        seen[start] = True
        comp = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for d in offs:
                u = tuple(a + b for a, b in zip(v, d))
                if all(0 <= c < n for c, n in zip(u, mask.shape)) and mask[u] and not seen[u]:
                    seen[u] = True
                    comp.add(u)
                    queue.append(u)
        comps.append(comp)
    return comps


def surface_voxels(mask):
    """Foreground voxels with a 6-neighbour that is background or off-grid, by enumeration."""
    mask = np.asarray(mask, dtype=bool)
    out = []
    for v in zip(*np.nonzero(mask)):
        for d in neighbours(6):
            u = tuple(a + b for a, b in zip(v, d))
            if not all(0 <= c < n for c, n in zip(u, mask.shape)) or not mask[u]:
                out.append(v)
                break
    return out


def all_pairs_distances(pred_mask, gt_mask, spacing):
    """(hd, assd) by O(n*m) enumeration, or None if a surface is empty."""
    sp = np.asarray(surface_voxels(pred_mask), dtype=np.float64)
    sg = np.asarray(surface_voxels(gt_mask), dtype=np.float64)
    if len(sp) == 0 or len(sg) == 0:
        return None
    s = np.asarray(spacing, dtype=np.float64)
    d = np.sqrt((((sp[:, None, :] - sg[None, :, :]) * s) ** 2).sum(-1))
    a, b = d.min(axis=1), d.min(axis=0)
    hd = max(a.max(), b.max())
    assd = (a.sum() + b.sum()) / (len(a) + len(b))
    return float(hd), float(assd)


def dice_sets(pred, gt, cls):
    p = set(zip(*np.nonzero(np.asarray(pred) == cls)))
    g = set(zip(*np.nonzero(np.asarray(gt) == cls)))
    if not p and not g:
        return 100.0
    return 100.0 * 2 * len(p & g) / (len(p) + len(g))


def adam_scalar(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        theta = theta - lr * mh / (math.sqrt(vh) + eps)
    return theta


def gdl_scalar(p, onehot, eps=1e-5):
    """Weighted generalized Dice loss by explicit loops over classes and voxels."""
    c = p.shape[0]
    p2 = p.reshape(c, -1)
    g2 = onehot.reshape(c, -1)
    num = den = 0.0
    for k in range(c):
        vol = float(sum(g2[k]))
        w = 0.0 if vol == 0 else 1.0 / vol**2
        num += w * sum(float(a) * float(b) for a, b in zip(p2[k], g2[k]))
        den += w * sum(float(a) + float(b) for a, b in zip(p2[k], g2[k]))
    return 1.0 - 2.0 * (num + eps) / (den + eps)
