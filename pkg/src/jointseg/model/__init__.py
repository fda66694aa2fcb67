from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step, ema_update
from .unet import (
    ModelParams,
    NetConfig,
    generalized_dice_loss,
    grad,
    he_init,
    joint_loss,
    param_shapes,
    unet_forward,
)

__all__ = [
    "AdamState",
    "Checkpoint",
    "ModelParams",
    "NetConfig",
    "adam_step",
    "ema_update",
    "generalized_dice_loss",
    "grad",
    "he_init",
    "joint_loss",
    "load_checkpoint",
    "param_shapes",
    "save_checkpoint",
    "unet_forward",
]
