"""3D U-Net: parameters, He initialization, forward pass, loss and gradients."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..volume_io import LabelMap, Volume3
from . import autograd as ag
from . import functional as F


@dataclass(frozen=True)
class NetConfig:
    levels: int = 2
    filters: int = 8
    dropout_rate: float = 0.1
    leaky_slope: float = 0.1
    classes: int = 8

    def __post_init__(self):
        if self.levels < 1 or self.filters < 1:
            raise ConfigError("levels and filters must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        if self.classes < 2:
            raise ConfigError("need at least 2 classes")


def param_shapes(cfg: NetConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes in canonical order."""
    f = cfg.filters
    shapes = {}
    for lvl in range(cfg.levels):
        cin = 1 if lvl == 0 else f
        shapes[f"enc{lvl}.conv1.w"] = (f, cin, 3, 3, 3)
        shapes[f"enc{lvl}.conv1.b"] = (f,)
        shapes[f"enc{lvl}.conv2.w"] = (f, f, 3, 3, 3)
        shapes[f"enc{lvl}.conv2.b"] = (f,)
    for lvl in range(cfg.levels - 1):
        shapes[f"dec{lvl}.conv1.w"] = (f, 2 * f, 3, 3, 3)
        shapes[f"dec{lvl}.conv1.b"] = (f,)
        shapes[f"dec{lvl}.conv2.w"] = (f, f, 3, 3, 3)
        shapes[f"dec{lvl}.conv2.b"] = (f,)
    shapes["head.w"] = (cfg.classes, f, 1, 1, 1)
    shapes["head.b"] = (cfg.classes,)
    return shapes


@dataclass
class ModelParams:
    config: NetConfig
    weights: dict[str, np.ndarray]
    ema: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.ema:
            self.ema = {k: v.copy() for k, v in self.weights.items()}

    @property
    def count(self) -> int:
        return int(sum(v.size for v in self.weights.values()))

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def ema_view(self) -> "ModelParams":
        """Params object whose live weights are the EMA shadow."""
        return ModelParams(self.config, self.ema, self.ema)


def he_init(cfg: NetConfig, rng: np.random.Generator, dtype=np.float32) -> ModelParams:
    """Kernels ~ N(0, 2 / fan_in), biases zero; the EMA shadow starts as a copy."""
    weights = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            weights[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            weights[name] = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
    return ModelParams(cfg, weights)


def _as_array(vol) -> np.ndarray:
    return vol.data if isinstance(vol, (Volume3, LabelMap)) else np.asarray(vol)


def check_input_dims(cfg: NetConfig, dims) -> None:
    div = 2 ** (cfg.levels - 1)
    if any(int(d) % div for d in dims):
        raise ShapeError(f"input dims {tuple(dims)} must be divisible by {div} for {cfg.levels} levels")


def _block(x, w, prefix, cfg, training, rng):
    slope = cfg.leaky_slope
    x = ag.leaky_relu(ag.conv3d(x, w[prefix + ".conv1.w"], w[prefix + ".conv1.b"]), slope)
    x = ag.dropout(x, cfg.dropout_rate, rng, training)
    return ag.leaky_relu(ag.conv3d(x, w[prefix + ".conv2.w"], w[prefix + ".conv2.b"]), slope)


def forward_graph(w: dict[str, ag.Tensor], image: np.ndarray, cfg: NetConfig,
                  training: bool, rng) -> ag.Tensor:
    """Softmax probabilities ``(classes, X, Y, Z)`` as a graph node."""
    check_input_dims(cfg, image.shape)
    dtype = w["head.w"].data.dtype
    x = ag.Tensor(np.asarray(image, dtype=dtype)[None])
    skips = []
    for lvl in range(cfg.levels):
        if lvl > 0:
            x = ag.avg_pool2(x)
        x = _block(x, w, f"enc{lvl}", cfg, training, rng)
        skips.append(x)
    skips.pop()
    for lvl in reversed(range(cfg.levels - 1)):
        x = ag.concat(skips.pop(), ag.upsample2(x))
        x = _block(x, w, f"dec{lvl}", cfg, training, rng)
    logits = ag.conv3d(x, w["head.w"], w["head.b"])
    return ag.softmax(logits)


def unet_forward(params: ModelParams, vol, training: bool = False, rng=None) -> np.ndarray:
    """Per-voxel class probabilities, shape ``(classes, X, Y, Z)``.

    Dropout is active only when ``training`` is set (then ``rng`` is required).
    """
    w = {k: ag.Tensor(v) for k, v in params.weights.items()}
    return forward_graph(w, _as_array(vol), params.config, training, rng).data


def generalized_dice_loss(pred: np.ndarray, gt) -> float:
    labels = _as_array(gt)
    if pred.shape[1:] != labels.shape:
        raise ShapeError(f"prediction grid {pred.shape[1:]} differs from ground truth {labels.shape}")
    return F.generalized_dice(pred, F.one_hot(labels, pred.shape[0], pred.dtype))[0]


def joint_loss(loss_ct: float, loss_mr: float) -> float:
    return (loss_ct + loss_mr) / 2.0


def grad(params: ModelParams, batch, rng, return_parts: bool = False):
    """Gradients of the balanced CT/MR objective w.r.t. every weight.

    ``batch`` is ``((ct_image, ct_labels), (mr_image, mr_labels))``; the two
    samples go through the same weights independently. Returns
    ``(grads, loss)`` (plus the two per-modality losses with ``return_parts``).
    """
    cfg = params.config
    w = {k: ag.Tensor(v, requires_grad=True) for k, v in params.weights.items()}
    losses = []
    for image, labels in batch:
        image, labels = _as_array(image), _as_array(labels)
        if image.shape != labels.shape:
            raise ShapeError(f"image {image.shape} and labels {labels.shape} differ")
        probs = forward_graph(w, image, cfg, True, rng)
        onehot = F.one_hot(labels, cfg.classes, probs.data.dtype)
        losses.append(ag.generalized_dice(probs, onehot))
    total = ag.mean2(*losses)
    ag.backward(total)
    grads = {}
    for k, t in w.items():
        grads[k] = t.grad if t.grad is not None else np.zeros_like(t.data)
        grads[k] = grads[k].astype(t.data.dtype, copy=False)
    if return_parts:
        return grads, float(total.data), [float(l.data) for l in losses]
    return grads, float(total.data)
