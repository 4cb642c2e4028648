"""Codec GAN training loop: one discriminator update, then one generator
update per batch, with linear learning-rate warmup."""

from __future__ import annotations

import numpy as np

import ucodec.kernels as K
from ucodec.codec import CodecConfig, CodecNet
from ucodec.errors import TrainingDivergenceError
from ucodec.frvq import ResidualQuantizer, ZERO_NORM_EPS
from ucodec.kernels import Adam, Tape, Tensor, warmup_lr
from ucodec.objectives.discriminators import DiscriminatorConfig, DiscriminatorSet
from ucodec.objectives.losses import (
    LossWeights,
    feature_matching_loss,
    generator_loss,
    lsgan_d_loss,
    lsgan_g_loss,
    vq_losses,
)
from ucodec.objectives.mel import MelConfig, MultiScaleMelLoss


class CodecTrainer:
    def __init__(self, cfg: CodecConfig, seed: int = 0,
                 lr: float = 1e-4, warmup_steps: int = 1000,
                 weights: LossWeights = LossWeights(),
                 mel_cfg: MelConfig = MelConfig(),
                 disc_cfg: DiscriminatorConfig = DiscriminatorConfig(),
                 dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.weights = weights
        self.lr = lr
        self.warmup_steps = warmup_steps
        self.net = CodecNet(cfg, rng, dtype)
        self.quantizer = ResidualQuantizer(rng, cfg.n_quantizers, cfg.latent_dim,
                                           cfg.proj_dim, cfg.codebook_size, dtype)
        self.disc = DiscriminatorSet(rng, disc_cfg, dtype)
        self.mel = MultiScaleMelLoss(cfg.sample_rate, mel_cfg)
        self.g_opt = Adam(self.net.parameters() + self.quantizer.parameters(), lr)
        self.d_opt = Adam(self.disc.parameters(), lr)
        self.repair_rng = np.random.default_rng(seed + 0x5EED)
        self.step_count = 0

    @property
    def gan_active(self) -> bool:
        return self.weights.adversarial > 0 or self.weights.feature_matching > 0

    def reconstruct(self, batch: np.ndarray, tape: Tape):
        """Forward a [B, L] batch of hop-aligned excerpts in one pass;
        returns (x [B,1,L], y [B,1,L], quantization)."""
        with tape:
            x = K.tensor(batch[:, None, :])
            z = self.net.encoder(x)
            qr = self.quantizer.quantize(z)
            y = self.net.decoder(qr.quantized)
        return x, y, qr

    def discriminator_step(self, x: Tensor, y: Tensor, lr: float) -> float:
        tape = Tape()
        with tape:
            losses = []
            for i in range(x.data.shape[0]):
                real_out = self.disc(K.tensor(x.data[i, 0]))
                fake_out = self.disc(K.tensor(y.data[i, 0]))
                losses.append(lsgan_d_loss([r for r, _ in real_out],
                                           [f for f, _ in fake_out]))
            total = _mean_of(losses)
        self.d_opt.zero_grad()
        tape.backward(total)
        self.d_opt.step(lr)
        return total.item()

    def generator_step(self, tape: Tape, x: Tensor, y: Tensor, qr, lr: float) -> dict:
        n_batch = x.data.shape[0]
        with tape:
            mel_terms, adv_terms, fm_terms = [], [], []
            for i in range(n_batch):
                x1 = K.tensor(x.data[i, 0])
                y1 = K.reshape(K.narrow(y, 0, i, 1), (-1,))
                mel_terms.append(self.mel(x1, y1))
                if self.gan_active:
                    with K.no_grad():
                        real_out = self.disc(x1)
                    fake_out = self.disc(y1)
                    adv_terms.append(lsgan_g_loss([f for f, _ in fake_out]))
                    fm_terms.append(feature_matching_loss(
                        [feats for _, feats in real_out],
                        [feats for _, feats in fake_out]))
            cb_loss, commit_loss = vq_losses(qr.projected, qr.selected)
            mel_loss = _mean_of(mel_terms)
            adv_loss = _mean_of(adv_terms) if adv_terms else None
            fm_loss = _mean_of(fm_terms) if fm_terms else None
            total = generator_loss(mel_loss, adv_loss, fm_loss, cb_loss,
                                   commit_loss, self.weights)
        self.g_opt.zero_grad()
        tape.backward(total)
        self.g_opt.step(lr)
        return {
            "mel": mel_loss.item(),
            "adv": adv_loss.item() if adv_loss is not None else 0.0,
            "fm": fm_loss.item() if fm_loss is not None else 0.0,
            "cb": cb_loss.item(),
            "commit": commit_loss.item(),
            "total": total.item(),
        }

    def train_step(self, batch: np.ndarray) -> dict:
        """One D update then one G update on a [B, L] batch of excerpts."""
        self.step_count += 1
        lr = warmup_lr(self.lr, self.step_count, self.warmup_steps)

        g_tape = Tape()
        x, y, qr = self.reconstruct(batch, g_tape)

        d_loss = 0.0
        if self.gan_active:
            d_loss = self.discriminator_step(x, y, lr)

        report = self.generator_step(g_tape, x, y, qr, lr)
        self._repair_dead_codebook_rows()

        metrics = {"step": self.step_count, "d_loss": d_loss, "lr": lr, **report}
        bad = [k for k, v in metrics.items() if not np.isfinite(v)]
        if bad:
            raise TrainingDivergenceError(
                f"non-finite {bad} at step {self.step_count}: {metrics}"
            )
        return metrics

    def _repair_dead_codebook_rows(self) -> None:
        # cosine lookup needs every row to keep a nonzero norm
        for layer in self.quantizer.layers:
            rows = layer.codebook.data
            norms = np.linalg.norm(rows, axis=1)
            dead = norms < ZERO_NORM_EPS
            if dead.any():
                fresh = self.repair_rng.standard_normal((int(dead.sum()), rows.shape[1]))
                fresh /= np.linalg.norm(fresh, axis=1, keepdims=True)
                rows[dead] = fresh.astype(rows.dtype)


def _mean_of(terms):
    total = terms[0]
    for t in terms[1:]:
        total = K.add(total, t)
    return K.mul(total, 1.0 / len(terms))
