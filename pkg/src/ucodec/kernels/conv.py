"""1-d and 2-d convolution primitives (cross-correlation convention).

Forward passes gather strided windows into a column matrix and run one BLAS
matmul; backward scatters column gradients back with one strided
slice-accumulate per kernel tap. The 1-d ops accept [Cin, L] or a batched
[B, Cin, L]; output rank matches input rank.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ucodec.errors import InputTooShortError, ShapeError
from ucodec.kernels.tensor import Tensor, _accum, _record


def conv1d_out_len(length: int, kernel: int, stride: int, dilation: int, padding: int) -> int:
    return (length + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
           dilation: int = 1, padding: int = 0) -> Tensor:
    """Correlate ``x`` [(B,) Cin, L] with ``w`` [Cout, Cin, K]."""
    if stride < 1 or dilation < 1 or padding < 0:
        raise ShapeError(f"bad conv1d hyperparameters stride={stride} dilation={dilation} padding={padding}")
    batched = x.ndim == 3
    if x.ndim not in (2, 3) or w.ndim != 3 or x.data.shape[-2] != w.data.shape[1]:
        raise ShapeError(f"conv1d shapes: x{x.data.shape} w{w.data.shape}")
    cout, cin, k = w.data.shape
    if b is not None and b.data.shape != (cout,):
        raise ShapeError(f"conv1d bias shape {b.data.shape} != ({cout},)")
    length = x.data.shape[-1]
    lout = conv1d_out_len(length, k, stride, dilation, padding)
    if lout < 1:
        raise InputTooShortError(
            f"conv1d input length {length} too short for kernel {k} "
            f"(stride={stride}, dilation={dilation}, padding={padding})"
        )

    xb = x.data if batched else x.data[None]
    nb = xb.shape[0]
    if padding:
        xb = np.pad(xb, ((0, 0), (0, 0), (padding, padding)))
    span = dilation * (k - 1) + 1
    win = sliding_window_view(xb, span, axis=2)[:, :, ::stride, ::dilation][:, :, :lout]
    col = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(nb, cin * k, lout)
    y = w.data.reshape(cout, cin * k) @ col  # (B, Cout, Lout)
    if b is not None:
        y = y + b.data[:, None]
    out_data = y if batched else y[0]

    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    out = Tensor(out_data, requires_grad=req)

    def bwd(g, x=x, w=w, b=b, col=col, stride=stride, dilation=dilation,
            padding=padding, lout=lout, batched=batched):
        cout, cin, k = w.data.shape
        gb = g if batched else g[None]
        if b is not None:
            _accum(b, gb.sum(axis=(0, 2)))
        if w.requires_grad:
            dw = np.matmul(gb, col.transpose(0, 2, 1)).sum(axis=0)
            _accum(w, dw.reshape(cout, cin, k))
        if x.requires_grad:
            dcol = (w.data.reshape(cout, cin * k).T @ gb).reshape(gb.shape[0], cin, k, lout)
            lpad = x.data.shape[-1] + 2 * padding
            dxp = np.zeros((gb.shape[0], cin, lpad), dtype=g.dtype)
            for tap in range(k):
                off = tap * dilation
                dxp[:, :, off:off + stride * lout:stride] += dcol[:, :, tap, :]
            dx = dxp[:, :, padding:padding + x.data.shape[-1]]
            _accum(x, dx if batched else dx[0])

    _record(out, bwd)
    return out


def conv_transpose1d(x: Tensor, w: Tensor, b: Tensor | None = None,
                     stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed correlation of ``x`` [(B,) Cin, L] with ``w`` [Cin, Cout, K]."""
    if stride < 1 or padding < 0:
        raise ShapeError(f"bad conv_transpose1d hyperparameters stride={stride} padding={padding}")
    batched = x.ndim == 3
    if x.ndim not in (2, 3) or w.ndim != 3 or x.data.shape[-2] != w.data.shape[0]:
        raise ShapeError(f"conv_transpose1d shapes: x{x.data.shape} w{w.data.shape}")
    cin, cout, k = w.data.shape
    length = x.data.shape[-1]
    full = (length - 1) * stride + k
    lout = full - 2 * padding
    if lout < 1:
        raise InputTooShortError(
            f"conv_transpose1d input length {length} too short (kernel {k}, "
            f"stride={stride}, padding={padding})"
        )

    xb = x.data if batched else x.data[None]
    nb = xb.shape[0]
    yfull = np.zeros((nb, cout, full), dtype=x.dtype)
    for tap in range(k):
        yfull[:, :, tap:tap + stride * length:stride] += w.data[:, :, tap].T @ xb
    y = yfull[:, :, padding:padding + lout]
    if b is not None:
        if b.data.shape != (cout,):
            raise ShapeError(f"conv_transpose1d bias shape {b.data.shape} != ({cout},)")
        y = y + b.data[:, None]
    out_data = y if batched else y[0]

    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    out = Tensor(out_data, requires_grad=req)

    def bwd(g, x=x, w=w, b=b, stride=stride, padding=padding, full=full,
            batched=batched):
        cin, cout, k = w.data.shape
        length = x.data.shape[-1]
        gb = g if batched else g[None]
        if b is not None:
            _accum(b, gb.sum(axis=(0, 2)))
        gfull = np.zeros((gb.shape[0], cout, full), dtype=g.dtype)
        gfull[:, :, padding:padding + gb.shape[-1]] = gb
        xb = x.data if batched else x.data[None]
        if x.requires_grad:
            dx = np.zeros_like(xb)
            for tap in range(k):
                dx += w.data[:, :, tap] @ gfull[:, :, tap:tap + stride * length:stride]
            _accum(x, dx if batched else dx[0])
        if w.requires_grad:
            dw = np.empty_like(w.data)
            for tap in range(k):
                sliced = gfull[:, :, tap:tap + stride * length:stride]
                dw[:, :, tap] = np.matmul(xb, sliced.transpose(0, 2, 1)).sum(axis=0)
            _accum(w, dw)

    _record(out, bwd)
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None,
           stride: tuple[int, int] = (1, 1), padding: tuple[int, int] = (0, 0),
           dilation: tuple[int, int] = (1, 1)) -> Tensor:
    """Correlate ``x`` [Cin, H, W] with ``w`` [Cout, Cin, Kh, Kw]."""
    sh, sw = stride
    ph, pw = padding
    dh, dw_ = dilation
    if x.ndim != 3 or w.ndim != 4 or x.data.shape[0] != w.data.shape[1]:
        raise ShapeError(f"conv2d shapes: x{x.data.shape} w{w.data.shape}")
    cout, cin, kh, kw = w.data.shape
    h, wid = x.data.shape[1:]
    hout = conv1d_out_len(h, kh, sh, dh, ph)
    wout = conv1d_out_len(wid, kw, sw, dw_, pw)
    if hout < 1 or wout < 1:
        raise InputTooShortError(f"conv2d input {x.data.shape} too small for kernel ({kh},{kw})")

    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    span_h = dh * (kh - 1) + 1
    span_w = dw_ * (kw - 1) + 1
    win = sliding_window_view(xp, (span_h, span_w), axis=(1, 2))
    win = win[:, ::sh, ::sw][:, :hout, :wout, ::dh, ::dw_]  # (Cin,Hout,Wout,Kh,Kw)
    col = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(cin * kh * kw, hout * wout)
    y = (w.data.reshape(cout, cin * kh * kw) @ col).reshape(cout, hout, wout)
    if b is not None:
        y = y + b.data[:, None, None]

    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    out = Tensor(y, requires_grad=req)

    def bwd(g, x=x, w=w, b=b, col=col, sh=sh, sw=sw, ph=ph, pw=pw, dh=dh,
            dw_=dw_, hout=hout, wout=wout):
        cout, cin, kh, kw = w.data.shape
        g2 = g.reshape(cout, hout * wout)
        if b is not None:
            _accum(b, g2.sum(axis=1))
        if w.requires_grad:
            _accum(w, (g2 @ col.T).reshape(cout, cin, kh, kw))
        if x.requires_grad:
            dcol = (w.data.reshape(cout, -1).T @ g2).reshape(cin, kh, kw, hout, wout)
            hp = x.data.shape[1] + 2 * ph
            wp = x.data.shape[2] + 2 * pw
            dxp = np.zeros((cin, hp, wp), dtype=g.dtype)
            for th in range(kh):
                oy = th * dh
                for tw in range(kw):
                    ox = tw * dw_
                    dxp[:, oy:oy + sh * hout:sh, ox:ox + sw * wout:sw] += dcol[:, th, tw]
            _accum(x, dxp[:, ph:ph + x.data.shape[1], pw:pw + x.data.shape[2]])

    _record(out, bwd)
    return out
