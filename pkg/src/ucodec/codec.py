"""Waveform <-> latent codec: strided conv encoder, transformer bottleneck,
mirrored transposed-conv decoder.

All temporal compression happens in the conv stack, so the bottleneck
transformer runs at the final frame rate. Channel width doubles at every
downsampling stage starting from ``base_channels`` and halves at every
upsampling stage starting from ``decoder_start_channels``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import prod

import numpy as np

import ucodec.kernels as K
from ucodec.errors import AlignmentError, FormatError, ShapeError
from ucodec.kernels import Module, Parameter, Tensor
from ucodec.transformer import Linear, TransformerStack


def frame_rate(strides, sample_rate: int) -> Fraction:
    """Latent frames per second: sample_rate / product(strides), exact."""
    if not strides or any(s < 1 for s in strides):
        raise ShapeError(f"strides must be non-empty and >= 1, got {strides}")
    return Fraction(sample_rate, prod(strides))


def pad_to_hop(samples: np.ndarray, hop: int) -> tuple[np.ndarray, int]:
    """Right-pad with zeros to the next hop multiple; returns original length."""
    n = len(samples)
    if n == 0:
        raise FormatError("empty waveform")
    rem = (-n) % hop
    if rem:
        samples = np.concatenate([samples, np.zeros(rem, dtype=samples.dtype)])
    return samples, n


@dataclass(frozen=True)
class BottleneckConfig:
    layers: int = 8
    heads: int = 8
    hidden: int = 512
    mlp: int = 2048


@dataclass(frozen=True)
class CodecConfig:
    sample_rate: int = 16000
    strides: tuple[int, ...] = (8, 5, 5, 4, 4)
    base_channels: int = 64
    latent_dim: int = 1024
    bottleneck: BottleneckConfig = field(default_factory=BottleneckConfig)
    decoder_start_channels: int = 2048
    n_quantizers: int = 32
    codebook_size: int = 256
    proj_dim: int = 8

    def __post_init__(self):
        if not self.strides or any(s < 1 for s in self.strides):
            raise ShapeError(f"bad strides {self.strides}")
        for name in ("sample_rate", "base_channels", "latent_dim",
                     "decoder_start_channels", "n_quantizers", "codebook_size",
                     "proj_dim"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be positive")
        if self.bottleneck.hidden % self.bottleneck.heads:
            raise ShapeError("bottleneck hidden size not divisible by head count")
        if self.decoder_start_channels % (1 << len(self.strides)):
            raise ShapeError(
                "decoder_start_channels must be divisible by 2^n_stages "
                f"({self.decoder_start_channels} vs {len(self.strides)} stages)"
            )

    @property
    def hop(self) -> int:
        return prod(self.strides)

    @property
    def frame_rate(self) -> Fraction:
        return frame_rate(self.strides, self.sample_rate)


def desk_config(**overrides) -> CodecConfig:
    """Small fast preset: hop 320 at 16 kHz (50 Hz frames)."""
    base = dict(
        sample_rate=16000,
        strides=(8, 5, 4, 2),
        base_channels=8,
        latent_dim=32,
        bottleneck=BottleneckConfig(layers=2, heads=2, hidden=32, mlp=64),
        decoder_start_channels=128,
        n_quantizers=4,
        codebook_size=64,
        proj_dim=8,
    )
    base.update(overrides)
    return CodecConfig(**base)


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class LatentSequence:
    values: np.ndarray  # T x D
    frame_rate: Fraction


class WnConv1d(Module):
    """Weight-normalized conv with explicit (possibly asymmetric) zero pad."""

    def __init__(self, rng, cin: int, cout: int, kernel: int, stride: int = 1,
                 dilation: int = 1, pad: tuple[int, int] = (0, 0),
                 dtype=np.float32, name: str = "conv"):
        scale = 1.0 / np.sqrt(cin * kernel)
        v = rng.standard_normal((cout, cin, kernel)) * scale
        self.v = Parameter(v, name=f"{name}.v", dtype=dtype)
        self.g = Parameter(np.linalg.norm(v.reshape(cout, -1), axis=1), name=f"{name}.g", dtype=dtype)
        self.b = Parameter(np.zeros(cout), name=f"{name}.b", dtype=dtype)
        self.stride = stride
        self.dilation = dilation
        self.pad = pad

    def __call__(self, x: Tensor) -> Tensor:
        if self.pad != (0, 0):
            x = K.pad1d(x, *self.pad)
        w = K.weight_norm(self.v, self.g)
        return K.conv1d(x, w, self.b, stride=self.stride, dilation=self.dilation)


class WnConvTranspose1d(Module):
    """Weight-normalized transposed conv trimmed to an exact stride multiple."""

    def __init__(self, rng, cin: int, cout: int, kernel: int, stride: int,
                 dtype=np.float32, name: str = "convt"):
        scale = 1.0 / np.sqrt(cin * kernel)
        v = rng.standard_normal((cin, cout, kernel)) * scale
        self.v = Parameter(v, name=f"{name}.v", dtype=dtype)
        self.g = Parameter(np.linalg.norm(v.transpose(1, 0, 2).reshape(cout, -1), axis=1),
                           name=f"{name}.g", dtype=dtype)
        self.b = Parameter(np.zeros(cout), name=f"{name}.b", dtype=dtype)
        self.stride = stride
        self.kernel = kernel

    def __call__(self, x: Tensor) -> Tensor:
        w = K.weight_norm(self.v, self.g, axis=1)
        y = K.conv_transpose1d(x, w, self.b, stride=self.stride)
        excess = self.kernel - self.stride
        want = x.data.shape[-1] * self.stride
        return K.narrow(y, y.ndim - 1, (excess + 1) // 2, want)


class ResidualUnit(Module):
    """Three dilated convs (1, 3, 9) with pre-activation ELU and a skip."""

    def __init__(self, rng, channels: int, dtype=np.float32, name: str = "res"):
        self.convs = [
            WnConv1d(rng, channels, channels, kernel=7, dilation=d,
                     pad=(3 * d, 3 * d), dtype=dtype, name=f"{name}.d{d}")
            for d in (1, 3, 9)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for conv in self.convs:
            h = conv(K.elu(h))
        return K.add(x, h)


class Encoder(Module):
    def __init__(self, cfg: CodecConfig, rng, dtype=np.float32):
        self.cfg = cfg
        ch = cfg.base_channels
        self.in_conv = WnConv1d(rng, 1, ch, kernel=7, pad=(3, 3), dtype=dtype, name="in")
        self.units, self.downs = [], []
        for i, s in enumerate(cfg.strides):
            self.units.append(ResidualUnit(rng, ch, dtype, name=f"enc{i}"))
            k = 2 * s
            self.downs.append(WnConv1d(rng, ch, 2 * ch, kernel=k, stride=s,
                                       pad=((s + 1) // 2, s // 2), dtype=dtype,
                                       name=f"down{i}"))
            ch *= 2
        self.to_hidden = WnConv1d(rng, ch, cfg.bottleneck.hidden, kernel=1,
                                  dtype=dtype, name="to_hidden")
        self.bottleneck = TransformerStack(rng, cfg.bottleneck.layers,
                                           cfg.bottleneck.hidden,
                                           cfg.bottleneck.heads,
                                           cfg.bottleneck.mlp, dtype)
        self.to_latent = Linear(rng, cfg.bottleneck.hidden, cfg.latent_dim,
                                dtype, "to_latent")

    def pre_bottleneck(self, x: Tensor) -> Tensor:
        """Conv stack output as a [(B,) T, hidden] sequence."""
        h = self.in_conv(x)
        for unit, down in zip(self.units, self.downs):
            h = down(unit(h))
        h = self.to_hidden(h)
        return K.transpose(h) if h.ndim == 2 else K.transpose(h, (0, 2, 1))

    def post_bottleneck(self, seq: Tensor) -> Tensor:
        return self.to_latent(self.bottleneck(seq, causal=False))

    def __call__(self, x: Tensor) -> Tensor:
        """[1, L] waveform -> [T, D] latents (or batched [B, 1, L] -> [B, T, D])."""
        return self.post_bottleneck(self.pre_bottleneck(x))


class Decoder(Module):
    def __init__(self, cfg: CodecConfig, rng, dtype=np.float32):
        self.cfg = cfg
        ch = cfg.decoder_start_channels
        self.from_latent = Linear(rng, cfg.latent_dim, ch, dtype, "from_latent")
        self.ups, self.units = [], []
        for i, s in enumerate(reversed(cfg.strides)):
            self.ups.append(WnConvTranspose1d(rng, ch, ch // 2, kernel=2 * s,
                                              stride=s, dtype=dtype, name=f"up{i}"))
            ch //= 2
            self.units.append(ResidualUnit(rng, ch, dtype, name=f"dec{i}"))
        self.out_conv = WnConv1d(rng, ch, 1, kernel=7, pad=(3, 3), dtype=dtype, name="out")

    def __call__(self, z: Tensor) -> Tensor:
        """[T, D] latents -> [1, T * hop] waveform in (-1, 1); batched alike."""
        h = self.from_latent(z)
        h = K.transpose(h) if h.ndim == 2 else K.transpose(h, (0, 2, 1))
        for up, unit in zip(self.ups, self.units):
            h = unit(up(h))
        return K.tanh(self.out_conv(K.elu(h)))


class CodecNet(Module):
    """Encoder/decoder pair with waveform-level entry points."""

    def __init__(self, cfg: CodecConfig, rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.encoder = Encoder(cfg, rng, dtype)
        self.decoder = Decoder(cfg, rng, dtype)

    def encode(self, wave: Waveform) -> LatentSequence:
        cfg = self.cfg
        if wave.sample_rate != cfg.sample_rate:
            raise FormatError(
                f"sample rate {wave.sample_rate} != configured {cfg.sample_rate}"
            )
        n = len(wave.samples)
        if n == 0 or n % cfg.hop:
            raise AlignmentError(
                f"waveform length {n} is not a positive multiple of hop {cfg.hop}"
            )
        with K.no_grad():
            z = self.encoder(K.tensor(wave.samples[None, :]))
        return LatentSequence(z.data, cfg.frame_rate)

    def decode(self, latent: LatentSequence) -> Waveform:
        if latent.values.ndim != 2 or latent.values.shape[1] != self.cfg.latent_dim:
            raise ShapeError(
                f"latent dim {latent.values.shape} != configured {self.cfg.latent_dim}"
            )
        with K.no_grad():
            y = self.decoder(K.tensor(latent.values))
        return Waveform(y.data[0], self.cfg.sample_rate)
