from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .unet import ModelParams

PAPER_LR = 5e-5
EMA_DECAY = 0.999


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.weights.items()},
                   {k: np.zeros_like(a) for k, a in params.weights.items()}, 0)


def adam_step(params: ModelParams, grads, state: AdamState, lr: float = PAPER_LR,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, applied to ``params.weights`` in place."""
    if not state.m:
        state.m = {k: np.zeros_like(a) for k, a in params.weights.items()}
        state.v = {k: np.zeros_like(a) for k, a in params.weights.items()}
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, theta in params.weights.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {theta.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        theta -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(theta.dtype)
    return params, state


def ema_update(params: ModelParams, decay: float = EMA_DECAY) -> None:
    """shadow <- decay * shadow + (1 - decay) * current, in place."""
    for name, theta in params.weights.items():
        shadow = params.ema[name]
        # difference form keeps shadow == current an exact fixed point
        shadow += ((1 - decay) * (theta - shadow)).astype(shadow.dtype)
