"""Compose and restore trainer state through the checkpoint container.

A codec checkpoint carries the encoder/decoder/quantizer/discriminator
parameters, both optimizers' moments, the config snapshot, the step count,
and the data-sampler RNG state, so resuming reproduces the next step's
losses bit-identically.
"""

from __future__ import annotations

import numpy as np

from ucodec import checkpoint
from ucodec.config import RunConfig, config_from_dict, config_to_dict
from ucodec.errors import CompatibilityError
from ucodec.lm import HierLm, LmTrainer
from ucodec.objectives.trainer import CodecTrainer


def _named(module, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}.{name}": p.data for name, p in module.named_parameters()}


def _load_named(module, prefix: str, arrays: dict[str, np.ndarray]) -> None:
    for name, p in module.named_parameters():
        key = f"{prefix}.{name}"
        if key not in arrays:
            raise CompatibilityError(f"checkpoint is missing parameter {key}")
        if arrays[key].shape != p.data.shape:
            raise CompatibilityError(
                f"parameter {key} has shape {arrays[key].shape}, model expects {p.data.shape}"
            )
        p.data[...] = arrays[key]


def _opt_arrays(opt, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v for k, v in opt.state_arrays().items()}


def _load_opt(opt, prefix: str, arrays: dict[str, np.ndarray], t: int) -> None:
    state = {k[len(prefix) + 1:]: v for k, v in arrays.items() if k.startswith(prefix + ".")}
    opt.load_state_arrays(state, t)


def save_codec_trainer(path, trainer: CodecTrainer, run_cfg: RunConfig,
                       sampler_state: dict | None = None) -> None:
    arrays = {}
    arrays.update(_named(trainer.net, "net"))
    arrays.update(_named(trainer.quantizer, "quantizer"))
    arrays.update(_named(trainer.disc, "disc"))
    arrays.update(_opt_arrays(trainer.g_opt, "g_opt"))
    arrays.update(_opt_arrays(trainer.d_opt, "d_opt"))
    meta = {
        "kind": "codec",
        "step": trainer.step_count,
        "g_opt_t": trainer.g_opt.t,
        "d_opt_t": trainer.d_opt.t,
        "config": config_to_dict(run_cfg),
        "sampler_state": sampler_state,
        "repair_rng_state": trainer.repair_rng.bit_generator.state,
    }
    checkpoint.save(path, arrays, meta)


def load_codec_trainer(path) -> tuple[CodecTrainer, RunConfig, dict | None]:
    meta, arrays = checkpoint.load(path)
    if meta.get("kind") != "codec":
        raise CompatibilityError(f"{path}: not a codec checkpoint")
    run_cfg = config_from_dict(meta["config"])
    trainer = CodecTrainer(
        run_cfg.codec.codec_config(),
        seed=run_cfg.train.seed,
        lr=run_cfg.train.lr,
        warmup_steps=run_cfg.train.warmup_steps,
        weights=run_cfg.train.loss_weights(),
        mel_cfg=run_cfg.train.mel_config(),
        disc_cfg=run_cfg.train.disc_config(),
    )
    _load_named(trainer.net, "net", arrays)
    _load_named(trainer.quantizer, "quantizer", arrays)
    _load_named(trainer.disc, "disc", arrays)
    _load_opt(trainer.g_opt, "g_opt", arrays, meta["g_opt_t"])
    _load_opt(trainer.d_opt, "d_opt", arrays, meta["d_opt_t"])
    trainer.step_count = meta["step"]
    trainer.repair_rng.bit_generator.state = meta["repair_rng_state"]
    return trainer, run_cfg, meta.get("sampler_state")


def save_lm_trainer(path, trainer: LmTrainer, run_cfg: RunConfig,
                    order_state: dict | None = None) -> None:
    arrays = _named(trainer.model, "lm")
    arrays.update(_opt_arrays(trainer.opt, "opt"))
    meta = {
        "kind": "lm",
        "step": trainer.step_count,
        "opt_t": trainer.opt.t,
        "config": config_to_dict(run_cfg),
        "order_state": order_state,
    }
    checkpoint.save(path, arrays, meta)


def load_lm_trainer(path) -> tuple[LmTrainer, RunConfig, dict | None]:
    meta, arrays = checkpoint.load(path)
    if meta.get("kind") != "lm":
        raise CompatibilityError(f"{path}: not an LM checkpoint")
    run_cfg = config_from_dict(meta["config"])
    model = HierLm(run_cfg.lm.lm_config(run_cfg.codec.codec_config()),
                   np.random.default_rng(run_cfg.lm.seed))
    trainer = LmTrainer(model, lr=run_cfg.lm.lr, warmup_steps=run_cfg.lm.warmup_steps)
    _load_named(model, "lm", arrays)
    _load_opt(trainer.opt, "opt", arrays, meta["opt_t"])
    trainer.step_count = meta["step"]
    return trainer, run_cfg, meta.get("order_state")
