"""Array kernels for the network: forward functions and their vector-Jacobian
products. Feature maps are laid out ``(channels, x, y, z)``.
"""
from __future__ import annotations

import itertools

import numpy as np

# per-slab temporary copy budget for convolution (bytes)
_SLAB_BYTES = 64 * 2**20


def _ranges(d: int, n: int):
    """Output and input index ranges along one axis for kernel offset ``d``."""
    lo, hi = max(0, -d), min(n, n - d)
    return lo, hi, lo + d, hi + d


def _slabs(n_x: int, bytes_per_x: int):
    step = max(1, min(n_x, _SLAB_BYTES // max(bytes_per_x, 1)))
    for start in range(0, n_x, step):
        yield start, min(n_x, start + step)


def conv3d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Cross-correlation with zero "same" padding and stride 1.

    ``x`` is ``(Cin, X, Y, Z)``, ``w`` is ``(Cout, Cin, k, k, k)`` with odd ``k``.
    Computed as one small matrix product per kernel tap, in x-slabs so that
    large volumes never need an im2col buffer.
    """
    cout, cin, k = w.shape[0], w.shape[1], w.shape[2]
    if x.shape[0] != cin:
        raise ValueError(f"conv expects {cin} input channels, got {x.shape[0]}")
    r = k // 2
    _, nx, ny, nz = x.shape
    out = np.zeros((cout, nx, ny, nz), dtype=np.result_type(x, w))
    taps = list(itertools.product(range(k), repeat=3))
    for x0, x1 in _slabs(nx, cin * ny * nz * x.itemsize):
        for a, bb, c in taps:
            ox0, ox1, ix0, ix1 = _ranges(a - r, nx)
            ox0, ox1 = max(ox0, x0), min(ox1, x1)
            if ox1 <= ox0:
                continue
            ix0 = ox0 + a - r
            ix1 = ox1 + a - r
            oy0, oy1, iy0, iy1 = _ranges(bb - r, ny)
            oz0, oz1, iz0, iz1 = _ranges(c - r, nz)
            if oy1 <= oy0 or oz1 <= oz0:
                continue
            out[:, ox0:ox1, oy0:oy1, oz0:oz1] += np.tensordot(
                w[:, :, a, bb, c], x[:, ix0:ix1, iy0:iy1, iz0:iz1], axes=1
            )
    if b is not None:
        out += b[:, None, None, None]
    return out


def conv3d_backward(g: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of :func:`conv3d` w.r.t. input, kernel and bias."""
    k = w.shape[2]
    r = k // 2
    _, nx, ny, nz = x.shape
    # transposed convolution == correlation with the flipped, channel-swapped kernel
    w_t = np.ascontiguousarray(w[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4))
    gx = conv3d(g, w_t)
    gw = np.zeros_like(w)
    for a, bb, c in itertools.product(range(k), repeat=3):
        ox0, ox1, ix0, ix1 = _ranges(a - r, nx)
        oy0, oy1, iy0, iy1 = _ranges(bb - r, ny)
        oz0, oz1, iz0, iz1 = _ranges(c - r, nz)
        if ox1 <= ox0 or oy1 <= oy0 or oz1 <= oz0:
            continue
        gw[:, :, a, bb, c] = np.tensordot(
            g[:, ox0:ox1, oy0:oy1, oz0:oz1],
            x[:, ix0:ix1, iy0:iy1, iz0:iz1],
            axes=([1, 2, 3], [1, 2, 3]),
        )
    gb = g.sum(axis=(1, 2, 3))
    return gx, gw, gb


def leaky_relu(x, slope):
    return np.where(x > 0, x, x * slope)


def leaky_relu_backward(g, x, slope):
    return np.where(x > 0, g, g * slope)


def avg_pool2(x):
    c, nx, ny, nz = x.shape
    return x.reshape(c, nx // 2, 2, ny // 2, 2, nz // 2, 2).mean(axis=(2, 4, 6))


def avg_pool2_backward(g):
    g = g / 8.0
    return g.repeat(2, axis=1).repeat(2, axis=2).repeat(2, axis=3)


def upsample_matrix(n: int, dtype=np.float64) -> np.ndarray:
    """``(2n, n)`` linear interpolation matrix, half-voxel aligned, edge clamped."""
    m = np.zeros((2 * n, n), dtype=dtype)
    for j in range(2 * n):
        src = min(max((j + 0.5) / 2.0 - 0.5, 0.0), n - 1)
        i0 = int(np.floor(src))
        i1 = min(i0 + 1, n - 1)
        f = src - i0
        m[j, i0] += 1 - f
        m[j, i1] += f
    return m


def _apply_axes(x, mats):
    for axis, m in enumerate(mats, start=1):
        x = np.moveaxis(np.tensordot(m, x, axes=([1], [axis])), 0, axis)
    return x


def upsample2(x):
    mats = [upsample_matrix(n, x.dtype) for n in x.shape[1:]]
    return np.ascontiguousarray(_apply_axes(x, mats))


def upsample2_backward(g):
    mats = [upsample_matrix(n // 2, g.dtype).T for n in g.shape[1:]]
    return np.ascontiguousarray(_apply_axes(g, mats))


def softmax(x):
    e = np.exp(x - x.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def softmax_backward(g, p):
    return p * (g - (g * p).sum(axis=0, keepdims=True))


GDL_EPS = 1e-5


def gdl_weights(onehot: np.ndarray) -> np.ndarray:
    """Squared-reciprocal class volumes; classes absent from the target get 0."""
    vol = onehot.reshape(onehot.shape[0], -1).sum(axis=1).astype(np.float64)
    w = np.zeros_like(vol)
    present = vol > 0
    w[present] = 1.0 / vol[present] ** 2
    return w


def generalized_dice(p: np.ndarray, onehot: np.ndarray, eps: float = GDL_EPS):
    """Generalized Dice loss and its gradient w.r.t. the probabilities ``p``."""
    c = p.shape[0]
    w = gdl_weights(onehot)
    pf = p.reshape(c, -1).astype(np.float64)
    gf = onehot.reshape(c, -1).astype(np.float64)
    num = float(np.dot(w, (pf * gf).sum(axis=1))) + eps
    den = float(np.dot(w, (pf + gf).sum(axis=1))) + eps
    loss = 1.0 - 2.0 * num / den
    grad = (-2.0 / den**2) * w[:, None] * (gf * den - num)
    return loss, grad.reshape(p.shape).astype(p.dtype)


def one_hot(labels: np.ndarray, classes: int, dtype=np.float32) -> np.ndarray:
    return (np.arange(classes).reshape((classes,) + (1,) * labels.ndim) == labels[None]).astype(dtype)
