"""Numerical core: tensors, tape autodiff, NN primitives, optimizer."""

from ucodec.kernels.conv import conv1d, conv1d_out_len, conv2d, conv_transpose1d
from ucodec.kernels.module import Module
from ucodec.kernels.nn import (
    attention,
    cross_entropy,
    elu,
    gelu,
    layer_norm,
    leaky_relu,
    rope,
    softmax,
    weight_norm,
)
from ucodec.kernels.optim import Adam, warmup_lr
from ucodec.kernels.spectral import complex_mag, frame_count, hann_window, stft_reim
from ucodec.kernels.tensor import (
    Parameter,
    Tape,
    Tensor,
    absolute,
    add,
    clamp_min,
    concat,
    exp,
    log,
    matmul,
    mean,
    mul,
    narrow,
    no_grad,
    pad1d,
    reciprocal,
    reshape,
    rows,
    sqrt,
    square,
    stop_gradient,
    straight_through,
    sub,
    sum_,
    swapaxes,
    tanh,
    tensor,
    transpose,
)

__all__ = [
    "Adam", "Module", "Parameter", "Tape", "Tensor",
    "absolute", "add", "attention", "clamp_min", "complex_mag", "concat",
    "conv1d", "conv1d_out_len", "conv2d", "conv_transpose1d", "cross_entropy",
    "elu", "exp", "frame_count", "gelu", "hann_window", "layer_norm",
    "leaky_relu", "log", "matmul", "mean", "mul", "narrow", "no_grad",
    "pad1d", "reciprocal", "reshape", "rope", "rows", "softmax", "sqrt",
    "square", "stft_reim", "stop_gradient", "straight_through", "sub", "sum_",
    "swapaxes", "tanh", "tensor", "transpose", "warmup_lr", "weight_norm",
]
