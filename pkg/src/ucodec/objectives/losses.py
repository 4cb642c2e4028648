"""Adversarial, feature-matching, and VQ losses plus the weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import ucodec.kernels as K
from ucodec.kernels import Tensor


@dataclass(frozen=True)
class LossWeights:
    mel: float = 15.0
    adversarial: float = 1.0
    feature_matching: float = 1.0
    codebook: float = 1.0
    commitment: float = 0.25

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


def lsgan_d_loss(real_logits: list[Tensor], fake_logits: list[Tensor]) -> Tensor:
    """Least-squares discriminator loss, summed over branches."""
    total = None
    for real, fake in zip(real_logits, fake_logits):
        term = K.add(K.mean(K.square(K.sub(real, 1.0))), K.mean(K.square(fake)))
        total = term if total is None else K.add(total, term)
    return total


def lsgan_g_loss(fake_logits: list[Tensor]) -> Tensor:
    """Least-squares generator loss, summed over branches."""
    total = None
    for fake in fake_logits:
        term = K.mean(K.square(K.sub(fake, 1.0)))
        total = term if total is None else K.add(total, term)
    return total


def feature_matching_loss(real_features: list[list[Tensor]],
                          fake_features: list[list[Tensor]]) -> Tensor:
    """Mean over branches and depths of L1 between feature maps, each term
    normalized by the mean magnitude of the real map."""
    terms = []
    if len(real_features) != len(fake_features):
        raise ValueError("feature lists must pair up per branch")
    for reals, fakes in zip(real_features, fake_features):
        if len(reals) != len(fakes):
            raise ValueError("feature lists must pair up per depth")
        for r, f in zip(reals, fakes):
            if r.data.shape != f.data.shape:
                raise ValueError(f"feature shape mismatch {r.data.shape} vs {f.data.shape}")
            denom = float(abs(r.data).mean()) or 1.0
            terms.append(K.mul(K.mean(K.absolute(K.sub(r, f))), 1.0 / denom))
    total = terms[0]
    for t in terms[1:]:
        total = K.add(total, t)
    return K.mul(total, 1.0 / len(terms))


def vq_losses(projected: list[Tensor], selected: list[Tensor]) -> tuple[Tensor, Tensor]:
    """(codebook, commitment) L1 losses averaged over layers and frames.

    The codebook loss stops gradients into the projections; the commitment
    loss stops gradients into the code rows.
    """
    cb_terms, commit_terms = [], []
    for p, c in zip(projected, selected):
        cb_terms.append(K.mean(K.absolute(K.sub(K.stop_gradient(p), c))))
        commit_terms.append(K.mean(K.absolute(K.sub(p, K.stop_gradient(c)))))
    scale = 1.0 / len(cb_terms)

    def total(terms):
        acc = terms[0]
        for t in terms[1:]:
            acc = K.add(acc, t)
        return K.mul(acc, scale)

    return total(cb_terms), total(commit_terms)


def generator_loss(mel: Tensor, adversarial: Tensor | None,
                   feature_matching: Tensor | None, codebook: Tensor,
                   commitment: Tensor, weights: LossWeights) -> Tensor:
    total = K.mul(mel, weights.mel)
    if adversarial is not None:
        total = K.add(total, K.mul(adversarial, weights.adversarial))
    if feature_matching is not None:
        total = K.add(total, K.mul(feature_matching, weights.feature_matching))
    total = K.add(total, K.mul(codebook, weights.codebook))
    return K.add(total, K.mul(commitment, weights.commitment))
