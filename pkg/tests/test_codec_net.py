"""Codec encoder/decoder: shapes, lengths, determinism, bottleneck behavior."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ucodec.kernels as K
from ucodec.codec import (
    BottleneckConfig,
    CodecConfig,
    CodecNet,
    LatentSequence,
    Waveform,
    desk_config,
    frame_rate,
    pad_to_hop,
)
from ucodec.errors import AlignmentError, FormatError, ShapeError


def tiny_config(strides, base=2, latent=8):
    return CodecConfig(
        strides=tuple(strides),
        base_channels=base,
        latent_dim=latent,
        bottleneck=BottleneckConfig(layers=1, heads=2, hidden=8, mlp=16),
        decoder_start_channels=base * (1 << len(strides)),
        n_quantizers=2,
        codebook_size=16,
        proj_dim=4,
    )


def test_frame_rate_paper_values():
    assert frame_rate([8, 5, 5, 4, 4], 16000) == 5
    assert frame_rate([5, 4, 4, 4, 4], 16000) == Fraction(25, 2)
    assert float(frame_rate([5, 4, 4, 4, 4], 16000)) == 12.5
    assert frame_rate([1], 16000) == 16000


def test_frame_rate_rejects_bad_strides():
    with pytest.raises(ShapeError):
        frame_rate([], 16000)
    with pytest.raises(ShapeError):
        frame_rate([0, 2], 16000)


def test_pad_to_hop_examples():
    x = np.ones(3200, dtype=np.float32)
    padded, n = pad_to_hop(x, 3200)
    assert len(padded) == 3200 and n == 3200

    padded, n = pad_to_hop(np.ones(1, dtype=np.float32), 3200)
    assert len(padded) == 3200 and n == 1
    assert padded[1:].sum() == 0

    padded, n = pad_to_hop(np.ones(16001, dtype=np.float32), 3200)
    assert len(padded) == 19200 and n == 16001

    with pytest.raises(FormatError):
        pad_to_hop(np.zeros(0), 3200)


def test_encode_frame_counts_paper_strides():
    cfg = tiny_config([8, 5, 5, 4, 4])
    net = CodecNet(cfg, np.random.default_rng(0))
    rng = np.random.default_rng(1)

    lat = net.encode(Waveform(rng.uniform(-0.5, 0.5, 16000), 16000))
    assert lat.values.shape == (5, cfg.latent_dim)
    assert lat.frame_rate == 5

    lat1 = net.encode(Waveform(rng.uniform(-0.5, 0.5, 3200), 16000))
    assert lat1.values.shape == (1, cfg.latent_dim)


def test_encode_miniature_shape_arithmetic():
    cfg = tiny_config([2, 2], latent=8)
    net = CodecNet(cfg, np.random.default_rng(0))
    for samples in (4, 8, 12):
        lat = net.encode(Waveform(np.zeros(samples, dtype=np.float32), 16000))
        assert lat.values.shape == (samples // 4, 8)


def test_decode_lengths_and_roundtrip_length():
    cfg = tiny_config([8, 5, 5, 4, 4])
    net = CodecNet(cfg, np.random.default_rng(0))
    rng = np.random.default_rng(2)

    out = net.decode(LatentSequence(rng.standard_normal((5, cfg.latent_dim)), cfg.frame_rate))
    assert len(out.samples) == 16000
    out1 = net.decode(LatentSequence(rng.standard_normal((1, cfg.latent_dim)), cfg.frame_rate))
    assert len(out1.samples) == 3200

    wave = Waveform(rng.uniform(-0.5, 0.5, 6400), 16000)
    assert len(net.decode(net.encode(wave)).samples) == 6400


@settings(max_examples=8, deadline=None)
@given(
    strides=st.lists(st.integers(1, 4), min_size=1, max_size=3),
    n_hops=st.integers(1, 3),
)
def test_length_invariant_random_configs(strides, n_hops):
    cfg = tiny_config(strides)
    net = CodecNet(cfg, np.random.default_rng(0))
    n = cfg.hop * n_hops
    wave = Waveform(np.random.default_rng(3).uniform(-0.5, 0.5, n), 16000)
    assert len(net.decode(net.encode(wave)).samples) == n


def test_encode_validation_errors():
    cfg = tiny_config([2, 2])
    net = CodecNet(cfg, np.random.default_rng(0))
    with pytest.raises(AlignmentError):
        net.encode(Waveform(np.zeros(5, dtype=np.float32), 16000))
    with pytest.raises(FormatError):
        net.encode(Waveform(np.zeros(4, dtype=np.float32), 8000))
    with pytest.raises(ShapeError):
        net.decode(LatentSequence(np.zeros((2, 5)), cfg.frame_rate))


def test_encoder_is_deterministic():
    cfg = desk_config(strides=(4, 4), base_channels=4, latent_dim=16,
                      decoder_start_channels=64)
    net = CodecNet(cfg, np.random.default_rng(7))
    wave = Waveform(np.random.default_rng(8).uniform(-0.5, 0.5, 64), 16000)
    a = net.encode(wave).values
    b = net.encode(wave).values
    np.testing.assert_array_equal(a, b)


def test_bottleneck_mixes_information_across_frames():
    """Perturbing one pre-transformer frame must move other frames'
    post-transformer features (unlike a conv-only bottleneck)."""
    cfg = tiny_config([2, 2])
    net = CodecNet(cfg, np.random.default_rng(0))
    rng = np.random.default_rng(9)
    feats = rng.standard_normal((6, cfg.bottleneck.hidden)).astype(np.float32)

    with K.no_grad():
        base = net.encoder.post_bottleneck(K.tensor(feats)).data
        bumped = feats.copy()
        bumped[2, 0] += 1.0  # single-coordinate bump (layer norm erases constants)
        moved = net.encoder.post_bottleneck(K.tensor(bumped)).data
    delta = np.abs(moved - base).max(axis=1)
    assert delta[2] > 0
    others = np.delete(delta, 2)
    assert (others > 1e-7).all()


def test_bottleneck_runs_at_frame_rate():
    """All temporal compression happens before the transformer."""
    cfg = tiny_config([2, 2])
    net = CodecNet(cfg, np.random.default_rng(0))
    wave = np.random.default_rng(10).uniform(-0.5, 0.5, 24).astype(np.float32)
    with K.no_grad():
        seq = net.encoder.pre_bottleneck(K.tensor(wave[None, :]))
    assert seq.data.shape == (24 // cfg.hop, cfg.bottleneck.hidden)
