"""Minimal tensor library with reverse-mode autodiff and Adam."""

from .checkpoint import CheckpointError, load_arrays, save_arrays
from .layers import WNConv2d, named_parameters
from .ops import (
    add,
    conv2d,
    mae_loss,
    max_pool2,
    mse_loss,
    mul,
    nearest_upsample2,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    sub,
    tmean,
    tsum,
    weight_norm_resolve,
)
from .optim import AdamState, adam_step
from .tensor import Parameter, Tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "AdamState",
    "CheckpointError",
    "Parameter",
    "Tensor",
    "WNConv2d",
    "adam_step",
    "add",
    "backward",
    "conv2d",
    "is_grad_enabled",
    "load_arrays",
    "mae_loss",
    "max_pool2",
    "mse_loss",
    "mul",
    "named_parameters",
    "nearest_upsample2",
    "no_grad",
    "pixel_shuffle",
    "pixel_unshuffle",
    "relu",
    "save_arrays",
    "sub",
    "tmean",
    "tsum",
    "weight_norm_resolve",
]
