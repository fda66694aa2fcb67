"""A minimal reverse-mode autodiff over numpy arrays.

Each op returns a :class:`Tensor` that remembers its parents and a closure
mapping the output gradient to one gradient per parent. :func:`backward`
walks the graph in reverse topological order. When no input requires a
gradient the op records nothing, so inference keeps no intermediates alive.
"""
from __future__ import annotations

import numpy as np

from . import functional as F


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "parents", "vjp")

    def __init__(self, data, requires_grad=False, parents=(), vjp=None):
        self.data = data
        self.requires_grad = requires_grad
        self.grad = None
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return np.shape(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _node(data, parents, vjp):
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, vjp)
    return Tensor(data)


def conv3d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    out = F.conv3d(x.data, w.data, b.data)
    return _node(out, (x, w, b), lambda g: F.conv3d_backward(g, x.data, w.data))


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    return _node(F.leaky_relu(x.data, slope), (x,),
                 lambda g: (F.leaky_relu_backward(g, x.data, slope),))


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; the mask drawn here is the one reused by the backward pass."""
    if not training or rate <= 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return _node(x.data * keep, (x,), lambda g: (g * keep,))


def avg_pool2(x: Tensor) -> Tensor:
    return _node(F.avg_pool2(x.data), (x,), lambda g: (F.avg_pool2_backward(g),))


def upsample2(x: Tensor) -> Tensor:
    return _node(F.upsample2(x.data), (x,), lambda g: (F.upsample2_backward(g),))


def concat(a: Tensor, b: Tensor) -> Tensor:
    ca = a.shape[0]
    return _node(np.concatenate([a.data, b.data], axis=0), (a, b),
                 lambda g: (g[:ca], g[ca:]))


def softmax(x: Tensor) -> Tensor:
    p = F.softmax(x.data)
    return _node(p, (x,), lambda g: (F.softmax_backward(g, p),))


def generalized_dice(p: Tensor, onehot: np.ndarray) -> Tensor:
    loss, dp = F.generalized_dice(p.data, onehot)
    return _node(np.float64(loss), (p,), lambda g: (g * dp,))


def mean2(a: Tensor, b: Tensor) -> Tensor:
    return _node((a.data + b.data) / 2.0, (a, b), lambda g: (g / 2.0, g / 2.0))


def _topological(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf requiring it."""
    root.grad = np.ones_like(root.data)
    for node in reversed(_topological(root)):
        if node.vjp is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
        if node.parents:
            node.grad = None
