"""Neural-net primitives: activations, normalization, attention, losses."""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from ucodec.errors import NumericError, ShapeError
from ucodec.kernels.tensor import (
    Tensor,
    _accum,
    _record,
    add,
    matmul,
    mean,
    mul,
    reciprocal,
    sqrt,
    square,
    sub,
    swapaxes,
)

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def elu(x: Tensor) -> Tensor:
    """x for x > 0, exp(x) - 1 otherwise (C1-continuous at 0)."""
    neg = np.expm1(np.minimum(x.data, 0.0))
    out = Tensor(np.where(x.data > 0, x.data, neg), requires_grad=x.requires_grad)

    def bwd(g, x=x, neg=neg):
        _accum(x, g * np.where(x.data > 0, 1.0, neg + 1.0))

    _record(out, bwd)
    return out


def gelu(x: Tensor) -> Tensor:
    """x * Phi(x) with the exact Gaussian CDF."""
    phi = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = Tensor(x.data * phi, requires_grad=x.requires_grad)

    def bwd(g, x=x, phi=phi):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
        _accum(x, g * (phi + x.data * pdf))

    _record(out, bwd)
    return out


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    out = Tensor(np.where(x.data > 0, x.data, slope * x.data), requires_grad=x.requires_grad)

    def bwd(g, x=x, slope=slope):
        _accum(x, g * np.where(x.data > 0, 1.0, slope))

    _record(out, bwd)
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(p, requires_grad=x.requires_grad)

    def bwd(g, x=x, p=p, axis=axis):
        dot = (g * p).sum(axis=axis, keepdims=True)
        _accum(x, p * (g - dot))

    _record(out, bwd)
    return out


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """-log softmax(logits)[target]; rows of a 2-d input give a loss vector."""
    ids = np.asarray(targets)
    vocab = logits.data.shape[-1]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise IndexError(f"target id outside vocabulary of size {vocab}")
    m = logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(logits.data - m).sum(axis=-1, keepdims=True)) + m
    if logits.ndim == 1:
        picked = logits.data[int(ids)]
    else:
        picked = np.take_along_axis(logits.data, ids[..., None], axis=-1)[..., 0]
    out = Tensor(lse[..., 0] - picked if logits.ndim > 1 else float(lse[0] - picked),
                 requires_grad=logits.requires_grad, dtype=logits.dtype)

    def bwd(g, logits=logits, ids=ids, lse=lse):
        p = np.exp(logits.data - lse)
        if logits.ndim == 1:
            p[int(ids)] -= 1.0
            _accum(logits, g * p)
        else:
            np.put_along_axis(p, ids[..., None], np.take_along_axis(p, ids[..., None], -1) - 1.0, -1)
            _accum(logits, g[..., None] * p)

    _record(out, bwd)
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    mu = mean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = mean(square(xc), axis=-1, keepdims=True)
    inv = reciprocal(sqrt(add(var, eps)))
    return add(mul(mul(xc, inv), gamma), beta)


def weight_norm(v: Tensor, g: Tensor, axis: int = 0) -> Tensor:
    """Reparameterize ``v`` so each slice along ``axis`` has norm ``|g|``."""
    axes = tuple(i for i in range(v.ndim) if i != axis)
    norm = np.sqrt((v.data * v.data).sum(axis=axes, keepdims=True))
    if np.any(norm == 0.0):
        raise NumericError("weight_norm: zero-norm channel")
    gshape = [1] * v.ndim
    gshape[axis] = g.data.shape[0]
    gb = g.data.reshape(gshape)
    unit = v.data / norm
    out = Tensor(gb * unit, requires_grad=v.requires_grad or g.requires_grad)

    def bwd(grad, v=v, g=g, gb=gb, unit=unit, norm=norm, axes=axes, gshape=gshape):
        if g.requires_grad:
            _accum(g, (grad * unit).sum(axis=axes, keepdims=True).reshape(g.data.shape))
        if v.requires_grad:
            dot = (grad * unit).sum(axis=axes, keepdims=True)
            _accum(v, (gb / norm) * (grad - unit * dot))

    _record(out, bwd)
    return out


def rope(x: Tensor, positions: np.ndarray, base: float = 10000.0) -> Tensor:
    """Rotate adjacent feature pairs of ``x`` [..., L, D] by position-dependent
    angles (pair i at position p rotates by p * base^(-2i/D))."""
    d = x.data.shape[-1]
    if d < 2 or d % 2:
        raise ShapeError(f"rope needs an even feature dim >= 2, got {d}")
    half = d // 2
    inv_freq = base ** (-np.arange(half, dtype=x.dtype) * 2.0 / d)
    ang = np.asarray(positions, dtype=x.dtype)[:, None] * inv_freq[None, :]
    cos, sin = np.cos(ang), np.sin(ang)
    xe, xo = x.data[..., 0::2], x.data[..., 1::2]
    y = np.empty_like(x.data)
    y[..., 0::2] = xe * cos - xo * sin
    y[..., 1::2] = xe * sin + xo * cos
    out = Tensor(y, requires_grad=x.requires_grad)

    def bwd(g, x=x, cos=cos, sin=sin):
        ge, go = g[..., 0::2], g[..., 1::2]
        gx = np.empty_like(g)
        gx[..., 0::2] = ge * cos + go * sin
        gx[..., 1::2] = -ge * sin + go * cos
        _accum(x, gx)

    _record(out, bwd)
    return out


def attention(q: Tensor, k: Tensor, v: Tensor, causal: bool = False,
              q_positions: np.ndarray | None = None,
              k_positions: np.ndarray | None = None,
              rope_base: float = 10000.0) -> Tensor:
    """Scaled dot-product attention over [H, L, dh] with RoPE on Q and K.

    With ``causal`` a query at position i only sees keys at positions <= i;
    when Lq < Lk the queries are aligned to the tail of the key sequence
    (incremental decoding with a cache).
    """
    h, lq, dh = q.data.shape
    lk = k.data.shape[1]
    if k.data.shape != (h, lk, dh) or v.data.shape != (h, lk, dh):
        raise ShapeError(f"attention shapes: q{q.data.shape} k{k.data.shape} v{v.data.shape}")
    if dh < 2 or dh % 2:
        raise ShapeError(f"attention head dim must be even and >= 2, got {dh}")
    off = lk - lq
    if k_positions is None:
        k_positions = np.arange(lk)
    if q_positions is None:
        q_positions = np.arange(lq) + off
    qr = rope(q, q_positions, rope_base)
    kr = rope(k, k_positions, rope_base)
    scores = mul(matmul(qr, swapaxes(kr, -1, -2)), 1.0 / np.sqrt(dh))
    if causal:
        mask = np.where(np.arange(lk)[None, :] > np.arange(lq)[:, None] + off,
                        -np.inf, 0.0).astype(q.dtype)
        scores = add(scores, Tensor(mask))
    return matmul(softmax(scores, axis=-1), v)
