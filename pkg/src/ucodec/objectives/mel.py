"""Multi-scale log-mel reconstruction loss.

Magnitude STFT -> triangular mel filterbank (HTK scale) -> log with a floor,
L1 between the two signals' features, averaged over scales. Hop is a quarter
of the window at every scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import ucodec.kernels as K
from ucodec.kernels import Tensor


@dataclass(frozen=True)
class MelConfig:
    window_lengths: tuple[int, ...] = (32, 64, 128, 256, 512, 1024, 2048)
    mel_bins: tuple[int, ...] = (5, 10, 20, 40, 80, 160, 320)
    floor: float = 1e-5

    def __post_init__(self):
        if len(self.window_lengths) != len(self.mel_bins):
            raise ValueError("one mel-bin count per window length")
        for win, bins in zip(self.window_lengths, self.mel_bins):
            if bins >= win // 2:
                raise ValueError(f"{bins} mel bins do not fit under window {win}")


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """[n_mels, n_fft//2+1] triangular filters on the HTK mel scale."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    bank = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        bank[m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


class MultiScaleMelLoss:
    """Holds the per-scale windows and filterbanks; call on two [L] tensors."""

    def __init__(self, sample_rate: int, cfg: MelConfig = MelConfig()):
        self.cfg = cfg
        self.sample_rate = sample_rate
        self.windows = [K.hann_window(w) for w in cfg.window_lengths]
        self.banks = [mel_filterbank(sample_rate, w, m).T  # K x M for right-matmul
                      for w, m in zip(cfg.window_lengths, cfg.mel_bins)]

    def log_mel(self, x: Tensor, scale: int) -> Tensor:
        win = self.cfg.window_lengths[scale]
        mag = K.complex_mag(K.stft_reim(x, self.windows[scale], hop=max(1, win // 4)))
        mel = K.matmul(mag, K.tensor(self.banks[scale].astype(x.dtype)))
        return K.log(K.clamp_min(mel, self.cfg.floor))

    def __call__(self, x: Tensor, y: Tensor) -> Tensor:
        if x.data.shape != y.data.shape:
            raise ValueError(f"mel loss needs equal lengths, got {x.data.shape} vs {y.data.shape}")
        total = None
        for scale in range(len(self.cfg.window_lengths)):
            term = K.mean(K.absolute(K.sub(self.log_mel(x, scale), self.log_mel(y, scale))))
            total = term if total is None else K.add(total, term)
        return K.mul(total, 1.0 / len(self.cfg.window_lengths))
