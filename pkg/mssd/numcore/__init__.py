"""Minimal float64 tensor library with reverse-mode differentiation."""

from mssd.numcore.conv import conv1d, conv1d_output_length, conv2d
from mssd.numcore.module import Module, uniform_init
from mssd.numcore.ops import (
    add,
    concat,
    dropout,
    gather,
    layer_norm,
    linear,
    matmul,
    mean,
    mse_loss,
    mul,
    pad_last,
    relu,
    reshape,
    scale,
    slice_axis,
    slice_last,
    softmax,
    split,
    sub,
    sum_all,
    transpose_last2,
)
from mssd.numcore.optim import Adam, AdamState, adam_step
from mssd.numcore.tensor import (
    AllocationTracker,
    GradTape,
    Gradients,
    Tensor,
    active_tape,
    as_tensor,
    backward,
)

__all__ = [
    "Adam",
    "AdamState",
    "AllocationTracker",
    "GradTape",
    "Gradients",
    "Module",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "conv1d",
    "conv1d_output_length",
    "conv2d",
    "dropout",
    "gather",
    "layer_norm",
    "linear",
    "matmul",
    "mean",
    "mse_loss",
    "mul",
    "pad_last",
    "relu",
    "reshape",
    "scale",
    "slice_axis",
    "slice_last",
    "softmax",
    "split",
    "sub",
    "sum_all",
    "transpose_last2",
    "uniform_init",
]
