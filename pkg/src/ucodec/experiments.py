"""Desk-scale experiment protocols used by the scripts and acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import ucodec.kernels as K
from ucodec.bench import si_snr
from ucodec.codec import BottleneckConfig, CodecConfig
from ucodec.objectives.discriminators import desk_discriminator_config
from ucodec.objectives.losses import LossWeights
from ucodec.objectives.mel import MelConfig
from ucodec.objectives.trainer import CodecTrainer

SINE_FREQS = (200.0, 325.0, 475.0, 650.0, 850.0)


def sine_corpus(excerpt: int = 1600, sample_rate: int = 16000,
                amplitude: float = 0.5) -> list[np.ndarray]:
    """Five fixed pure tones, each exactly one excerpt long."""
    t = np.arange(excerpt) / sample_rate
    return [np.asarray(amplitude * np.sin(2 * np.pi * f * t), dtype=np.float32)
            for f in SINE_FREQS]


def toy_codec_config() -> CodecConfig:
    """Miniature model: hop 320 at 16 kHz (50 Hz frames)."""
    return CodecConfig(
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


def toy_mel_config() -> MelConfig:
    return MelConfig(window_lengths=(32, 64, 128, 256, 512),
                     mel_bins=(5, 10, 20, 40, 80))


@dataclass(frozen=True)
class SineOverfitResult:
    seed: int
    steps: int
    early_mel: float   # mean of steps 81..120
    final_mel: float   # mean of the last 40 steps
    si_snr_db: float   # reconstruction of the first training excerpt

    @property
    def mel_reduction(self) -> float:
        return 1.0 - self.final_mel / self.early_mel


def reconstruct_excerpt(trainer: CodecTrainer, excerpt: np.ndarray) -> np.ndarray:
    with K.no_grad():
        z = trainer.net.encoder(K.tensor(excerpt[None, :]))
        result = trainer.quantizer.quantize(z)
        return trainer.net.decoder(result.quantized).data[0]


def run_sine_overfit(seed: int, steps: int = 2000, lr: float = 1e-3,
                     warmup_steps: int = 100, excerpt: int = 1600,
                     log_every: int = 0) -> SineOverfitResult:
    """Mel-only overfit (GAN weights zero) of the miniature codec on the
    fixed five-tone corpus; full-batch, so the run is deterministic."""
    corpus = sine_corpus(excerpt)
    trainer = CodecTrainer(
        toy_codec_config(), seed=seed, lr=lr, warmup_steps=warmup_steps,
        weights=LossWeights(adversarial=0.0, feature_matching=0.0),
        mel_cfg=toy_mel_config(), disc_cfg=desk_discriminator_config(),
    )
    batch = np.stack(corpus)
    mel_curve = []
    for step in range(1, steps + 1):
        report = trainer.train_step(batch)
        mel_curve.append(report["mel"])
        if log_every and step % log_every == 0:
            print(f"seed {seed} step {step}: mel={report['mel']:.5f}")

    early = float(np.mean(mel_curve[80:120])) if steps >= 120 else float(np.mean(mel_curve))
    final = float(np.mean(mel_curve[-40:]))
    recon = reconstruct_excerpt(trainer, corpus[0])
    return SineOverfitResult(
        seed=seed, steps=steps, early_mel=early, final_mel=final,
        si_snr_db=si_snr(corpus[0], recon),
    )
