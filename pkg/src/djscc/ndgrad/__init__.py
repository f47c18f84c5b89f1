"""Minimal dense-tensor engine with reverse-mode differentiation."""

from .conv import avg_pool2d, conv2d, conv2d_transpose
from .ops import (add, channel_norm, concat, div, exp, getitem, layer_norm, log, matmul,
                  mean, mul, power, relu, reshape, scale, sigmoid, softmax, sqrt, sub, sum,
                  take, transpose)
from .optim import AdamState, adam_step
from .tensor import ShapeError, Tape, Tensor, as_tensor, backward

__all__ = [
    "Tensor", "Tape", "ShapeError", "as_tensor", "backward",
    "add", "sub", "mul", "div", "scale", "power", "sqrt", "exp", "log", "relu", "sigmoid",
    "matmul", "sum", "mean", "reshape", "transpose", "getitem", "concat", "take",
    "softmax", "layer_norm", "channel_norm",
    "conv2d", "conv2d_transpose", "avg_pool2d",
    "AdamState", "adam_step",
]
