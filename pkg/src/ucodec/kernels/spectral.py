"""Differentiable short-time Fourier analysis.

``stft_reim`` is a single taped primitive: the forward runs a batched rfft
over strided frames, the backward applies the exact adjoint (zero-padded
inverse FFT per frame, window multiply, overlap-add).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ucodec.errors import InputTooShortError, ShapeError
from ucodec.kernels.tensor import Tensor, _accum, _record


def hann_window(length: int, dtype=np.float64) -> np.ndarray:
    """Periodic Hann window."""
    n = np.arange(length, dtype=np.float64)
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)).astype(dtype)


def frame_count(n_samples: int, win_length: int, hop: int) -> int:
    return (n_samples - win_length) // hop + 1


def stft_reim(x: Tensor, window: np.ndarray, hop: int) -> Tensor:
    """Windowed rfft of hop-strided frames of ``x`` [L] -> [2, F, K].

    Channel 0 holds the real part, channel 1 the imaginary part;
    K = win//2 + 1. Frames start at multiples of ``hop`` (no centering).
    """
    if x.ndim != 1:
        raise ShapeError(f"stft expects a 1-d signal, got shape {x.data.shape}")
    win = window.shape[0]
    if hop < 1:
        raise ShapeError(f"stft hop must be >= 1, got {hop}")
    n = x.data.shape[0]
    if frame_count(n, win, hop) < 1:
        raise InputTooShortError(f"signal of {n} samples shorter than window {win}")
    w = window.astype(x.dtype, copy=False)
    frames = sliding_window_view(x.data, win)[::hop] * w
    spec = np.fft.rfft(frames, axis=-1)
    out = Tensor(np.stack([spec.real, spec.imag]).astype(x.dtype, copy=False),
                 requires_grad=x.requires_grad)

    def bwd(g, x=x, w=w, hop=hop, win=win):
        n_frames = g.shape[1]
        gc = np.zeros((n_frames, win), dtype=np.complex128)
        gc[:, :win // 2 + 1] = g[0] + 1j * g[1]
        # adjoint of rfft: real part of the zero-padded inverse transform, times N
        frame_grads = np.fft.ifft(gc, axis=-1).real * win * w
        gx = np.zeros(x.data.shape, dtype=np.float64)
        idx = np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]
        np.add.at(gx, idx, frame_grads)
        _accum(x, gx.astype(x.dtype, copy=False))

    _record(out, bwd)
    return out


def complex_mag(reim: Tensor) -> Tensor:
    """Magnitude of a stacked [2, ...] real/imag pair, gradient 0 at zero."""
    if reim.data.shape[0] != 2:
        raise ShapeError(f"complex_mag expects a leading axis of 2, got {reim.data.shape}")
    re, im = reim.data[0], reim.data[1]
    mag = np.sqrt(re * re + im * im)
    out = Tensor(mag, requires_grad=reim.requires_grad)

    def bwd(g, reim=reim, mag=mag):
        safe = np.where(mag > 0, mag, 1.0)
        scale = g / safe
        gx = np.stack([reim.data[0] * scale, reim.data[1] * scale])
        gx[:, mag == 0] = 0.0
        _accum(reim, gx)

    _record(out, bwd)
    return out
