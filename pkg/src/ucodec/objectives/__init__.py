from ucodec.objectives.losses import (
    LossWeights,
    feature_matching_loss,
    generator_loss,
    lsgan_d_loss,
    lsgan_g_loss,
    vq_losses,
)
from ucodec.objectives.mel import MelConfig, MultiScaleMelLoss, mel_filterbank

__all__ = [
    "LossWeights", "MelConfig", "MultiScaleMelLoss", "mel_filterbank",
    "feature_matching_loss", "generator_loss", "lsgan_d_loss", "lsgan_g_loss",
    "vq_losses",
]
