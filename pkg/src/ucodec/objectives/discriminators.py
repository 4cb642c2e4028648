"""Waveform discriminators: multi-period 2-d convs over period-folded audio
plus multi-scale STFT branches over real/imag spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import ucodec.kernels as K
from ucodec.kernels import Module, Parameter, Tensor


@dataclass(frozen=True)
class DiscriminatorConfig:
    periods: tuple[int, ...] = (2, 3, 5, 7, 11)
    fft_sizes: tuple[int, ...] = (78, 126, 206, 334, 542, 876, 1418, 2296)
    base_channels: int = 32
    leaky_slope: float = 0.1


def desk_discriminator_config(**overrides) -> DiscriminatorConfig:
    base = dict(periods=(2, 3), fft_sizes=(78, 126), base_channels=4)
    base.update(overrides)
    return DiscriminatorConfig(**base)


class Conv2dLayer(Module):
    def __init__(self, rng, cin, cout, kernel, stride=(1, 1), padding=(0, 0),
                 dtype=np.float32, name="c2d"):
        kh, kw = kernel
        scale = 1.0 / np.sqrt(cin * kh * kw)
        self.w = Parameter(rng.standard_normal((cout, cin, kh, kw)) * scale,
                           name=f"{name}.w", dtype=dtype)
        self.b = Parameter(np.zeros(cout), name=f"{name}.b", dtype=dtype)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return K.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)


class PeriodBranch(Module):
    """Folds the waveform into (frames, period) and convolves along time."""

    def __init__(self, rng, period: int, base: int, slope: float, dtype=np.float32):
        self.period = period
        self.slope = slope
        chans = [1, base, 2 * base, 4 * base, 8 * base]
        self.convs = [
            Conv2dLayer(rng, chans[i], chans[i + 1], kernel=(5, 1), stride=(3, 1),
                        padding=(2, 0), dtype=dtype, name=f"p{period}.l{i}")
            for i in range(4)
        ]
        self.post = Conv2dLayer(rng, chans[-1], 1, kernel=(3, 1), padding=(1, 0),
                                dtype=dtype, name=f"p{period}.post")

    def __call__(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        n = x.data.shape[0]
        pad = (-n) % self.period
        if pad:
            x = K.pad1d(x, 0, pad)
        h = K.reshape(x, (1, (n + pad) // self.period, self.period))
        features = []
        for conv in self.convs:
            h = K.leaky_relu(conv(h), self.slope)
            features.append(h)
        return self.post(h), features


class SpectralBranch(Module):
    """Five 2-d convs over the (real, imag) spectrogram of one FFT size."""

    def __init__(self, rng, n_fft: int, base: int, slope: float, dtype=np.float32):
        self.n_fft = n_fft
        self.hop = max(1, n_fft // 4)
        self.slope = slope
        self.window = K.hann_window(n_fft)
        specs = [
            (2, base, (3, 9), (1, 1), (1, 4)),
            (base, base, (3, 9), (1, 2), (1, 4)),
            (base, base, (3, 9), (1, 2), (1, 4)),
            (base, base, (3, 3), (1, 1), (1, 1)),
        ]
        self.convs = [
            Conv2dLayer(rng, cin, cout, kernel=k, stride=s, padding=p,
                        dtype=dtype, name=f"s{n_fft}.l{i}")
            for i, (cin, cout, k, s, p) in enumerate(specs)
        ]
        self.post = Conv2dLayer(rng, base, 1, kernel=(3, 3), padding=(1, 1),
                                dtype=dtype, name=f"s{n_fft}.post")

    def __call__(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        spec = K.stft_reim(x, self.window, self.hop)     # (2, F, K)
        h = K.swapaxes(spec, 1, 2)                       # (2, K, F): freq x time
        features = []
        for conv in self.convs:
            h = K.leaky_relu(conv(h), self.slope)
            features.append(h)
        return self.post(h), features


class DiscriminatorSet(Module):
    def __init__(self, rng, cfg: DiscriminatorConfig = DiscriminatorConfig(),
                 dtype=np.float32):
        self.cfg = cfg
        self.period_branches = [
            PeriodBranch(rng, p, cfg.base_channels, cfg.leaky_slope, dtype)
            for p in cfg.periods
        ]
        self.spectral_branches = [
            SpectralBranch(rng, n, cfg.base_channels, cfg.leaky_slope, dtype)
            for n in cfg.fft_sizes
        ]

    def __call__(self, x: Tensor) -> list[tuple[Tensor, list[Tensor]]]:
        """Per branch: (logit map, ordered intermediate feature maps)."""
        out = []
        for branch in self.period_branches:
            out.append(branch(x))
        for branch in self.spectral_branches:
            out.append(branch(x))
        return out
