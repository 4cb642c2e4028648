"""WAV I/O, corpus sampling, checkpoints, and config parsing."""

import wave as wave_mod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucodec import checkpoint
from ucodec.codec import Waveform
from ucodec.config import config_from_dict, config_to_dict, default_config, load_config
from ucodec.data import CropSampler, crop_offset, list_lm_pairs, text_to_ids
from ucodec.errors import ConfigError, DatasetError, FormatError
from ucodec.wavio import read_wav, write_wav


def test_wav_roundtrip_quantization_bound(tmp_path):
    rng = np.random.default_rng(70)
    signal = rng.uniform(-0.9, 0.9, 1600).astype(np.float32)
    path = tmp_path / "x.wav"
    write_wav(path, Waveform(signal, 16000))
    loaded = read_wav(path)
    assert loaded.sample_rate == 16000
    assert np.abs(loaded.samples - signal).max() <= 1.0 / 32768.0


def test_wav_zeros_payload_size(tmp_path):
    path = tmp_path / "z.wav"
    write_wav(path, Waveform(np.zeros(16000, dtype=np.float32), 16000))
    with wave_mod.open(str(path), "rb") as f:
        assert f.getnframes() == 16000
        assert f.getnframes() * f.getsampwidth() == 32000
    assert read_wav(path).samples.sum() == 0.0


def test_wav_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    with wave_mod.open(str(path), "wb") as f:
        f.setnchannels(2)
        f.setsampwidth(2)
        f.setframerate(16000)
        f.writeframes(b"\x00\x00" * 200)
    with pytest.raises(FormatError, match="channel"):
        read_wav(path)


def test_wav_rejects_wrong_rate(tmp_path):
    path = tmp_path / "slow.wav"
    write_wav(path, Waveform(np.zeros(100, dtype=np.float32), 8000))
    with pytest.raises(FormatError, match="rate"):
        read_wav(path, expected_rate=16000)


def test_wav_rejects_garbage(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"not a wav at all")
    with pytest.raises(FormatError):
        read_wav(path)


def test_sampler_determinism():
    rng = np.random.default_rng(71)
    signals = [rng.uniform(-1, 1, 700).astype(np.float32) for _ in range(3)]
    a = CropSampler(signals, excerpt=64, hop=16, batch_size=2, seed=5)
    b = CropSampler(signals, excerpt=64, hop=16, batch_size=2, seed=5)
    for _ in range(10):
        np.testing.assert_array_equal(a.next_batch(), b.next_batch())


def test_sampler_state_roundtrip():
    rng = np.random.default_rng(72)
    signals = [rng.uniform(-1, 1, 500).astype(np.float32) for _ in range(4)]
    a = CropSampler(signals, excerpt=32, hop=16, batch_size=3, seed=9)
    for _ in range(5):
        a.next_batch()
    state = a.state()
    expect = [a.next_batch() for _ in range(4)]

    b = CropSampler(signals, excerpt=32, hop=16, batch_size=3, seed=0)
    b.restore(state)
    for want in expect:
        np.testing.assert_array_equal(b.next_batch(), want)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 2000), seed=st.integers(0, 1000))
def test_crop_offsets_are_hop_aligned(n, seed):
    off = crop_offset(n, excerpt=160, hop=32, rng=np.random.default_rng(seed))
    assert off % 32 == 0
    assert off >= 0


def test_crop_offset_distribution_sweeps_file():
    rng = np.random.default_rng(73)
    offsets = {crop_offset(1000, 160, 32, rng) for _ in range(1000)}
    assert offsets == {0, 32, 64, 96, 128, 160, 192, 224, 256, 288, 320, 352,
                       384, 416, 448, 480, 512, 544, 576, 608, 640, 672, 704,
                       736, 768, 800, 832}


def test_sampler_pads_short_files():
    signals = [np.ones(10, dtype=np.float32)]
    sampler = CropSampler(signals, excerpt=32, hop=16, batch_size=1, seed=0)
    batch = sampler.next_batch()
    assert batch.shape == (1, 32)
    assert batch[0, :10].sum() == 10.0
    assert batch[0, 10:].sum() == 0.0


def test_sampler_rejects_bad_inputs(tmp_path):
    with pytest.raises(DatasetError):
        CropSampler([], 32, 16, 1, 0)
    with pytest.raises(DatasetError):
        CropSampler([np.zeros(10, dtype=np.float32)], 33, 16, 1, 0)
    from ucodec.data import list_wavs
    with pytest.raises(DatasetError):
        list_wavs(tmp_path)


def test_text_and_pairs(tmp_path):
    assert text_to_ids("hi") == [104, 105]
    (tmp_path / "a.ucb").write_bytes(b"x")
    with pytest.raises(DatasetError):
        list_lm_pairs(tmp_path)
    (tmp_path / "a.txt").write_text("hello")
    pairs = list_lm_pairs(tmp_path)
    assert len(pairs) == 1


def test_checkpoint_bit_exact_roundtrip(tmp_path):
    rng = np.random.default_rng(74)
    arrays = {
        "a.w": rng.standard_normal((3, 4)).astype(np.float32),
        "b": rng.standard_normal(7).astype(np.float32),
    }
    meta = {"step": 12, "note": "x"}
    path = tmp_path / "ck.uckp"
    checkpoint.save(path, arrays, meta)
    loaded_meta, loaded = checkpoint.load(path)
    assert loaded_meta == meta
    assert checkpoint.load_meta(path) == meta
    for k in arrays:
        np.testing.assert_array_equal(loaded[k], arrays[k])
        assert loaded[k].dtype == np.float32


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.uckp"
    path.write_bytes(b"nope")
    with pytest.raises(FormatError):
        checkpoint.load(path)


def test_config_defaults_validate():
    cfg = default_config()
    assert cfg.codec.codec_config().hop == 320
    assert cfg.train.lr == 1e-4
    assert cfg.train.warmup_steps == 1000
    assert cfg.lm.k_top == 5
    assert cfg.lm.temperature == 1.0


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[codec]\n"
        "strides = 4,4\n"
        "base_channels = 4\n"
        "latent_dim = 16\n"
        "bottleneck_layers = 1\n"
        "bottleneck_heads = 2\n"
        "bottleneck_hidden = 16\n"
        "bottleneck_mlp = 32\n"
        "decoder_start_channels = 16\n"
        "n_quantizers = 2\n"
        "codebook_size = 8\n"
        "[train]\n"
        "lr = 1e-3\n"
        "excerpt_samples = 64\n"
        "batch = 1\n"
        "[lm]\n"
        "k_top = 3\n"
    )
    cfg = load_config(path)
    assert cfg.codec.strides == (4, 4)
    assert cfg.train.lr == 1e-3
    assert cfg.lm.k_top == 3

    rebuilt = config_from_dict(config_to_dict(cfg))
    assert rebuilt == cfg


def test_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[train]\nlearning_rate = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(path)


def test_config_rejects_unknown_section(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[optimizer]\nlr = 1\n")
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(path)


def test_config_rejects_inconsistent_dims(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[train]\nexcerpt_samples = 123\n")
    with pytest.raises(ConfigError, match="excerpt_samples"):
        load_config(path)


def test_config_rejects_bad_value(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[train]\nlr = fast\n")
    with pytest.raises(ConfigError, match="bad value"):
        load_config(path)


def test_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")
