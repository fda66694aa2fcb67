"""Random-convolution intensity augmentation.

A freshly sampled, never-trained stack of four convolutions (1 -> 2 -> 2 -> 2
-> 1 channels, one kernel size shared by all layers) scrambles local texture;
its output is blended with the input and rescaled to the input's Frobenius
norm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .model.functional import conv3d, leaky_relu
from .volume_io import Volume3

CHANNELS = (1, 2, 2, 2, 1)
KERNEL_SIZES = (1, 3)
SLOPE = 0.1
NORM_EPS = 1e-12


@dataclass(frozen=True)
class RandConvNet:
    kernel_size: int
    weights: tuple[np.ndarray, ...]
    slope: float = SLOPE

    def __post_init__(self):
        if len(self.weights) != 4:
            raise ValueError("a RandConv net has exactly 4 layers")
        if self.kernel_size not in KERNEL_SIZES:
            raise ValueError(f"kernel size must be 1 or 3, got {self.kernel_size}")


def sample_randconv(rng: np.random.Generator) -> RandConvNet:
    k = int(rng.choice(KERNEL_SIZES))
    weights = tuple(
        rng.standard_normal((cout, cin, k, k, k))
        for cin, cout in zip(CHANNELS[:-1], CHANNELS[1:])
    )
    return RandConvNet(k, weights)


def randconv_forward(net: RandConvNet, vol: Volume3) -> Volume3:
    x = vol.data.astype(np.float64)[None]
    for i, w in enumerate(net.weights):
        x = conv3d(x, w)
        if i < len(net.weights) - 1:
            x = leaky_relu(x, net.slope)
    return vol.with_data(x[0].astype(np.float32))


def blend_renorm(vol: Volume3, rc_out: Volume3, alpha: float) -> Volume3:
    """``b = alpha * rc_out + (1 - alpha) * vol`` rescaled so ``||b||_F == ||vol||_F``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"blend factor must lie in [0, 1], got {alpha}")
    if rc_out.dims != vol.dims:
        raise ShapeError(f"RandConv output dims {rc_out.dims} differ from input {vol.dims}")
    x = vol.data.astype(np.float64)
    b = alpha * rc_out.data.astype(np.float64) + (1.0 - alpha) * x
    nb = np.linalg.norm(b)
    if nb < NORM_EPS:
        return vol.with_data(vol.data.copy())
    return vol.with_data((b * (np.linalg.norm(x) / nb)).astype(np.float32))


def randconv_augment(vol: Volume3, rng: np.random.Generator, prob: float = 1.0) -> Volume3:
    """Sample a net and a blend factor, apply both (skipped with probability ``1 - prob``)."""
    if prob < 1.0 and rng.random() >= prob:
        return vol
    net = sample_randconv(rng)
    alpha = float(rng.uniform(0.0, 1.0))
    return blend_renorm(vol, randconv_forward(net, vol), alpha)
