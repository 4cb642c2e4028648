"""End-to-end command-line workflows on a miniature corpus."""

import json

import numpy as np
import pytest

from ucodec.cli import main
from ucodec.codec import Waveform
from ucodec.wavio import write_wav

TINY_INI = """\
[codec]
strides = 4,4
base_channels = 4
latent_dim = 16
bottleneck_layers = 1
bottleneck_heads = 2
bottleneck_hidden = 16
bottleneck_mlp = 32
decoder_start_channels = 64
n_quantizers = 2
codebook_size = 8
proj_dim = 4

[train]
lr = 1e-3
warmup_steps = 5
batch = 2
steps = 4
seed = 0
excerpt_samples = 64
checkpoint_every = 2
mel_windows = 32,64
mel_bins = 5,10
disc_periods = 2,3
disc_fft_sizes = 32
disc_channels = 2

[lm]
global_layers = 1
global_dim = 16
global_heads = 2
global_ff = 32
local_layers = 1
local_dim = 16
local_heads = 2
local_ff = 32
k_top = 2
max_frames = 4
lr = 5e-3
warmup_steps = 5
steps = 30
"""


@pytest.fixture
def workspace(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    rng = np.random.default_rng(80)
    t = np.arange(256) / 16000.0
    for i, freq in enumerate((440.0, 660.0)):
        sig = 0.4 * np.sin(2 * np.pi * freq * t) + 0.01 * rng.standard_normal(256)
        write_wav(corpus / f"tone{i}.wav", Waveform(sig.astype(np.float32), 16000))
    config = tmp_path / "run.ini"
    config.write_text(TINY_INI)
    return tmp_path, corpus, config


def run(argv):
    return main([str(a) for a in argv])


def test_codec_train_encode_decode_eval(workspace, capsys):
    tmp, corpus, config = workspace
    out = tmp / "train"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out]) == 0
    assert (out / "checkpoint.uckp").exists()
    assert (out / "checkpoint_step2.uckp").exists()
    lines = (out / "metrics.jsonl").read_text().strip().split("\n")
    assert len(lines) == 4
    report = json.loads(lines[-1])
    for key in ("step", "d_loss", "mel", "adv", "fm", "cb", "commit", "lr"):
        assert key in report

    ckpt = out / "checkpoint.uckp"
    wav_in = corpus / "tone0.wav"
    ucb = tmp / "tone0.ucb"
    assert run(["codec", "encode", "--checkpoint", ckpt, "--in", wav_in,
                "--out", ucb]) == 0
    assert ucb.exists()

    capsys.readouterr()
    assert run(["inspect", ucb]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_quantizers"] == 2
    assert info["codebook_size"] == 8
    assert info["frames"] == 16  # 256 samples / hop 16
    assert info["original_length"] == 256

    wav_out = tmp / "decoded.wav"
    assert run(["codec", "decode", "--checkpoint", ckpt, "--in", ucb,
                "--out", wav_out]) == 0
    from ucodec.wavio import read_wav
    decoded = read_wav(wav_out)
    assert len(decoded.samples) == 256  # trimmed to the original length

    capsys.readouterr()
    assert run(["codec", "eval", "--checkpoint", ckpt, "--in", wav_in]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"si_snr_db", "mel_l1", "achieved_kbps", "frames"}
    # hop 16 at 16 kHz -> 1000 frames/s; 2 layers x 3 bits -> 6 kbps
    assert report["achieved_kbps"] == pytest.approx(6.0)


def test_resume_reproduces_next_step_bit_identically(workspace):
    tmp, corpus, config = workspace
    out_a = tmp / "a"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out_a, "--steps", "3"]) == 0
    step3_a = json.loads((out_a / "metrics.jsonl").read_text().strip().split("\n")[2])

    out_b = tmp / "b"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out_b, "--steps", "2"]) == 0
    out_c = tmp / "c"
    assert run(["codec", "train", "--resume", out_b / "checkpoint.uckp",
                "--data", corpus, "--out", out_c, "--steps", "3"]) == 0
    step3_c = json.loads((out_c / "metrics.jsonl").read_text().strip().split("\n")[0])
    assert step3_a == step3_c


def test_decode_rejects_corrupt_and_incompatible_streams(workspace, capsys):
    tmp, corpus, config = workspace
    out = tmp / "train"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out, "--steps", "1"]) == 0
    ckpt = out / "checkpoint.uckp"
    ucb = tmp / "x.ucb"
    assert run(["codec", "encode", "--checkpoint", ckpt,
                "--in", corpus / "tone0.wav", "--out", ucb]) == 0

    truncated = tmp / "trunc.ucb"
    truncated.write_bytes(ucb.read_bytes()[:-1])
    assert run(["codec", "decode", "--checkpoint", ckpt, "--in", truncated,
                "--out", tmp / "y.wav"]) == 2
    assert "error:" in capsys.readouterr().err

    from fractions import Fraction

    from ucodec.bitstream import StreamHeader, pack

    alien = pack(np.zeros((2, 3), dtype=int),
                 StreamHeader(16000, Fraction(5), 3, 8, 2, 6400))
    bad = tmp / "alien.ucb"
    bad.write_bytes(alien)
    assert run(["codec", "decode", "--checkpoint", ckpt, "--in", bad,
                "--out", tmp / "z.wav"]) == 2
    assert "does not match" in capsys.readouterr().err


def test_lm_train_and_synth_deterministic(workspace):
    tmp, corpus, config = workspace
    out = tmp / "train"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out, "--steps", "1"]) == 0
    ckpt = out / "checkpoint.uckp"

    lm_data = tmp / "lm_corpus"
    lm_data.mkdir()
    for i in range(2):
        ucb = lm_data / f"utt{i}.ucb"
        assert run(["codec", "encode", "--checkpoint", ckpt,
                    "--in", corpus / f"tone{i}.wav", "--out", ucb]) == 0
        (lm_data / f"utt{i}.txt").write_text(f"utterance {i}")

    lm_out = tmp / "lm"
    assert run(["lm", "train", "--config", config, "--codec-checkpoint", ckpt,
                "--data", lm_data, "--out", lm_out, "--steps", "10"]) == 0
    lm_ckpt = lm_out / "lm_checkpoint.uckp"
    assert lm_ckpt.exists()

    wav_a = tmp / "synth_a.wav"
    wav_b = tmp / "synth_b.wav"
    for path in (wav_a, wav_b):
        assert run(["lm", "synth", "--checkpoint", lm_ckpt,
                    "--codec-checkpoint", ckpt, "--text", "hello",
                    "--out", path, "--max-frames", "3", "--min-frames", "3",
                    "--seed", "7"]) == 0
    assert wav_a.read_bytes() == wav_b.read_bytes()

    from ucodec.wavio import read_wav
    assert len(read_wav(wav_a).samples) == 3 * 16  # frames x hop


def test_lm_synth_rejects_mismatched_codec(workspace, tmp_path):
    tmp, corpus, config = workspace
    out = tmp / "train"
    assert run(["codec", "train", "--config", config, "--data", corpus,
                "--out", out, "--steps", "1"]) == 0
    ckpt = out / "checkpoint.uckp"

    other_ini = tmp / "other.ini"
    other_ini.write_text(TINY_INI.replace("codebook_size = 8", "codebook_size = 16"))
    out2 = tmp / "train2"
    assert run(["codec", "train", "--config", other_ini, "--data", corpus,
                "--out", out2, "--steps", "1"]) == 0

    lm_data = tmp / "lm_corpus"
    lm_data.mkdir()
    ucb = lm_data / "utt0.ucb"
    assert run(["codec", "encode", "--checkpoint", ckpt,
                "--in", corpus / "tone0.wav", "--out", ucb]) == 0
    (lm_data / "utt0.txt").write_text("x")
    lm_out = tmp / "lm"
    assert run(["lm", "train", "--config", config, "--codec-checkpoint", ckpt,
                "--data", lm_data, "--out", lm_out, "--steps", "2"]) == 0

    assert run(["lm", "synth", "--checkpoint", lm_out / "lm_checkpoint.uckp",
                "--codec-checkpoint", out2 / "checkpoint.uckp",
                "--text", "x", "--out", tmp / "no.wav"]) == 2


def test_bench_macs_csv_header(tmp_path, capsys):
    assert run(["bench", "macs"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0] == "model,frame_rate,rtf,mac_g,mac_l,mac_total"
    assert len(lines) == 6
    # internal identity S * (G + L) == total on every emitted row
    for line in lines[1:]:
        cells = line.split(",")
        rate, mac_g, mac_l, total = (float(cells[1]), float(cells[3]),
                                     float(cells[4]), float(cells[5]))
        assert total == pytest.approx(rate * (mac_g + mac_l), abs=1e-5)

    path = tmp_path / "macs.json"
    assert run(["bench", "macs", "--format", "json", "--out", path]) == 0
    rows = json.loads(path.read_text())
    assert {r["model"] for r in rows} == {
        "8rvq-c16384", "16rvq-c4096", "32rvq-c256", "100rvq-c4",
        "12.5hz-8rvq-c1024"}
