"""Command-line driver.

Subcommands: ``codec train|encode|decode|eval``, ``lm train|synth``,
``bench macs|rtf``, ``inspect <file.ucb>``. The environment variable
``UCODEC_THREADS`` caps the numeric backend's thread pool; it must take
effect before numpy loads, so heavy imports happen inside the handlers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _cap_threads() -> None:
    cap = os.environ.get("UCODEC_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucodec")
    sub = parser.add_subparsers(dest="command", required=True)

    codec = sub.add_parser("codec", help="waveform codec workflows")
    codec_sub = codec.add_subparsers(dest="action", required=True)

    train = codec_sub.add_parser("train")
    train.add_argument("--config", type=Path, default=None)
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--steps", type=int, default=None)
    train.add_argument("--resume", type=Path, default=None)
    train.set_defaults(func=cmd_codec_train)

    encode = codec_sub.add_parser("encode")
    encode.add_argument("--checkpoint", type=Path, required=True)
    encode.add_argument("--in", dest="infile", type=Path, required=True)
    encode.add_argument("--out", type=Path, required=True)
    encode.set_defaults(func=cmd_codec_encode)

    decode = codec_sub.add_parser("decode")
    decode.add_argument("--checkpoint", type=Path, required=True)
    decode.add_argument("--in", dest="infile", type=Path, required=True)
    decode.add_argument("--out", type=Path, required=True)
    decode.set_defaults(func=cmd_codec_decode)

    evaluate = codec_sub.add_parser("eval")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--in", dest="infile", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, default=None)
    evaluate.set_defaults(func=cmd_codec_eval)

    lm = sub.add_parser("lm", help="token language model workflows")
    lm_sub = lm.add_subparsers(dest="action", required=True)

    lm_train = lm_sub.add_parser("train")
    lm_train.add_argument("--config", type=Path, default=None)
    lm_train.add_argument("--codec-checkpoint", type=Path, required=True)
    lm_train.add_argument("--data", type=Path, required=True)
    lm_train.add_argument("--out", type=Path, required=True)
    lm_train.add_argument("--seed", type=int, default=None)
    lm_train.add_argument("--steps", type=int, default=None)
    lm_train.set_defaults(func=cmd_lm_train)

    lm_synth = lm_sub.add_parser("synth")
    lm_synth.add_argument("--checkpoint", type=Path, required=True)
    lm_synth.add_argument("--codec-checkpoint", type=Path, required=True)
    lm_synth.add_argument("--text", type=str, required=True)
    lm_synth.add_argument("--out", type=Path, required=True)
    lm_synth.add_argument("--prompt", type=Path, default=None)
    lm_synth.add_argument("--max-frames", type=int, default=None)
    lm_synth.add_argument("--min-frames", type=int, default=0)
    lm_synth.add_argument("--seed", type=int, default=0)
    lm_synth.add_argument("--greedy", action="store_true")
    lm_synth.set_defaults(func=cmd_lm_synth)

    bench = sub.add_parser("bench", help="complexity and timing reports")
    bench.add_argument("mode", choices=["macs", "rtf"])
    bench.add_argument("--config", type=Path, default=None)
    bench.add_argument("--out", type=Path, default=None)
    bench.add_argument("--format", choices=["csv", "json"], default="csv")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--audio-seconds", type=float, default=2.0)
    bench.set_defaults(func=cmd_bench)

    inspect = sub.add_parser("inspect", help="describe a .ucb token stream")
    inspect.add_argument("file", type=Path)
    inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    from ucodec.errors import UcodecError

    try:
        return args.func(args) or 0
    except UcodecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _load_run_config(path, seed=None):
    from ucodec.config import default_config, load_config
    from dataclasses import replace

    cfg = load_config(path) if path else default_config()
    if seed is not None:
        cfg = type(cfg)(codec=cfg.codec, train=replace(cfg.train, seed=seed),
                        lm=replace(cfg.lm, seed=seed))
    return cfg


# -- codec ------------------------------------------------------------------


def cmd_codec_train(args) -> int:
    from ucodec.data import CropSampler, load_corpus
    from ucodec.objectives.trainer import CodecTrainer
    from ucodec.persist import load_codec_trainer, save_codec_trainer

    if args.resume:
        trainer, run_cfg, sampler_state = load_codec_trainer(args.resume)
    else:
        run_cfg = _load_run_config(args.config, args.seed)
        trainer = CodecTrainer(
            run_cfg.codec.codec_config(), seed=run_cfg.train.seed,
            lr=run_cfg.train.lr, warmup_steps=run_cfg.train.warmup_steps,
            weights=run_cfg.train.loss_weights(),
            mel_cfg=run_cfg.train.mel_config(),
            disc_cfg=run_cfg.train.disc_config(),
        )
        sampler_state = None

    codec_cfg = run_cfg.codec.codec_config()
    signals = load_corpus(args.data, codec_cfg.sample_rate)
    sampler = CropSampler(signals, run_cfg.train.excerpt_samples, codec_cfg.hop,
                          run_cfg.train.batch, run_cfg.train.seed)
    if sampler_state is not None:
        sampler.restore(sampler_state)

    args.out.mkdir(parents=True, exist_ok=True)
    total_steps = args.steps if args.steps is not None else run_cfg.train.steps
    metrics_path = args.out / "metrics.jsonl"
    print_every = max(1, total_steps // 10)
    with open(metrics_path, "a") as metrics:
        while trainer.step_count < total_steps:
            report = trainer.train_step(sampler.next_batch())
            metrics.write(json.dumps(report) + "\n")
            if report["step"] % print_every == 0 or report["step"] == total_steps:
                print(f"step {report['step']}: mel={report['mel']:.4f} "
                      f"d={report['d_loss']:.4f} lr={report['lr']:.2e}")
            if report["step"] % run_cfg.train.checkpoint_every == 0:
                save_codec_trainer(args.out / f"checkpoint_step{report['step']}.uckp",
                                   trainer, run_cfg, sampler.state())
    save_codec_trainer(args.out / "checkpoint.uckp", trainer, run_cfg, sampler.state())
    print(f"saved {args.out / 'checkpoint.uckp'}")
    return 0


def _encode_to_stream(trainer, codec_cfg, wave):
    import ucodec.kernels as K
    from ucodec.bitstream import StreamHeader
    from ucodec.codec import pad_to_hop

    padded, original = pad_to_hop(wave.samples, codec_cfg.hop)
    with K.no_grad():
        z = trainer.net.encoder(K.tensor(padded[None, :]))
        result = trainer.quantizer.quantize(z)
    header = StreamHeader(codec_cfg.sample_rate, codec_cfg.frame_rate,
                          codec_cfg.n_quantizers, codec_cfg.codebook_size,
                          result.codes.shape[0], original)
    return header, result.codes


def _decode_from_grid(trainer, header, grid):
    import ucodec.kernels as K
    from ucodec.codec import Waveform

    latents = trainer.quantizer.dequantize(grid)
    with K.no_grad():
        audio = trainer.net.decoder(K.tensor(latents)).data[0]
    return Waveform(audio[:header.original_length], header.sample_rate)


def _check_stream_compat(header, codec_cfg, path) -> None:
    from ucodec.errors import CompatibilityError

    mismatches = []
    if header.sample_rate != codec_cfg.sample_rate:
        mismatches.append(f"sample_rate {header.sample_rate} != {codec_cfg.sample_rate}")
    if header.n_quantizers != codec_cfg.n_quantizers:
        mismatches.append(f"n_quantizers {header.n_quantizers} != {codec_cfg.n_quantizers}")
    if header.codebook_size != codec_cfg.codebook_size:
        mismatches.append(f"codebook_size {header.codebook_size} != {codec_cfg.codebook_size}")
    if header.frame_rate != codec_cfg.frame_rate:
        mismatches.append(f"frame_rate {header.frame_rate} != {codec_cfg.frame_rate}")
    if mismatches:
        raise CompatibilityError(f"{path} does not match checkpoint: " + "; ".join(mismatches))


def cmd_codec_encode(args) -> int:
    from ucodec.bitstream import pack
    from ucodec.persist import load_codec_trainer
    from ucodec.wavio import read_wav

    trainer, run_cfg, _ = load_codec_trainer(args.checkpoint)
    codec_cfg = run_cfg.codec.codec_config()
    wave = read_wav(args.infile, codec_cfg.sample_rate)
    header, grid = _encode_to_stream(trainer, codec_cfg, wave)
    args.out.write_bytes(pack(grid, header))
    print(f"wrote {args.out} ({header.n_frames} frames, "
          f"{header.payload_bits} payload bits)")
    return 0


def cmd_codec_decode(args) -> int:
    from ucodec.bitstream import unpack
    from ucodec.checkpoint import load_meta
    from ucodec.config import config_from_dict
    from ucodec.persist import load_codec_trainer
    from ucodec.wavio import write_wav

    header, grid = unpack(args.infile.read_bytes())
    # compatibility gate before any model memory is allocated
    snapshot = config_from_dict(load_meta(args.checkpoint)["config"])
    _check_stream_compat(header, snapshot.codec.codec_config(), args.infile)

    trainer, run_cfg, _ = load_codec_trainer(args.checkpoint)
    wave = _decode_from_grid(trainer, header, grid)
    write_wav(args.out, wave)
    print(f"wrote {args.out} ({len(wave.samples)} samples)")
    return 0


def cmd_codec_eval(args) -> int:
    from ucodec.bench import mel_l1, si_snr
    from ucodec.persist import load_codec_trainer
    from ucodec.wavio import read_wav

    trainer, run_cfg, _ = load_codec_trainer(args.checkpoint)
    codec_cfg = run_cfg.codec.codec_config()
    wave = read_wav(args.infile, codec_cfg.sample_rate)
    header, grid = _encode_to_stream(trainer, codec_cfg, wave)
    decoded = _decode_from_grid(trainer, header, grid)

    duration = header.original_length / codec_cfg.sample_rate
    report = {
        "si_snr_db": si_snr(wave.samples, decoded.samples),
        "mel_l1": mel_l1(wave.samples, decoded.samples, codec_cfg.sample_rate,
                         run_cfg.train.mel_config()),
        "achieved_kbps": header.payload_bits / duration / 1000.0,
        "frames": header.n_frames,
    }
    text = json.dumps(report, indent=2)
    if args.out:
        args.out.write_text(text)
    print(text)
    return 0


# -- language model -----------------------------------------------------------


def cmd_lm_train(args) -> int:
    import numpy as np

    from ucodec.bitstream import unpack
    from ucodec.checkpoint import load_meta
    from ucodec.config import config_from_dict
    from ucodec.data import list_lm_pairs, text_to_ids
    from ucodec.lm import HierLm, LmTrainer, check_lm_codec_compat
    from ucodec.persist import save_lm_trainer

    run_cfg = _load_run_config(args.config, args.seed)
    codec_snapshot = config_from_dict(load_meta(args.codec_checkpoint)["config"])
    codec_cfg = codec_snapshot.codec.codec_config()
    lm_cfg = run_cfg.lm.lm_config(codec_cfg)
    check_lm_codec_compat(lm_cfg, codec_cfg.n_quantizers, codec_cfg.codebook_size)

    pairs = []
    for txt, ucb in list_lm_pairs(args.data):
        header, grid = unpack(ucb.read_bytes())
        _check_stream_compat(header, codec_cfg, ucb)
        pairs.append((text_to_ids(txt.read_text().strip()), grid))

    model = HierLm(lm_cfg, np.random.default_rng(run_cfg.lm.seed))
    trainer = LmTrainer(model, lr=run_cfg.lm.lr, warmup_steps=run_cfg.lm.warmup_steps)
    order_rng = np.random.default_rng(run_cfg.lm.seed + 1)

    args.out.mkdir(parents=True, exist_ok=True)
    total_steps = args.steps if args.steps is not None else run_cfg.lm.steps
    print_every = max(1, total_steps // 10)
    with open(args.out / "metrics.jsonl", "a") as metrics:
        order: list[int] = []
        for _ in range(total_steps):
            if not order:
                order = list(order_rng.permutation(len(pairs)))
            text_ids, grid = pairs[order.pop(0)]
            report = trainer.train_step(text_ids, grid)
            metrics.write(json.dumps(report) + "\n")
            if report["step"] % print_every == 0:
                print(f"step {report['step']}: nll={report['nll']:.4f}")
    save_lm_trainer(args.out / "lm_checkpoint.uckp", trainer, run_cfg)
    print(f"saved {args.out / 'lm_checkpoint.uckp'}")
    return 0


def cmd_lm_synth(args) -> int:
    import numpy as np

    from ucodec.bitstream import unpack
    from ucodec.data import text_to_ids
    from ucodec.lm import check_lm_codec_compat
    from ucodec.persist import load_codec_trainer, load_lm_trainer
    from ucodec.bitstream import StreamHeader
    from ucodec.wavio import write_wav

    lm_trainer, lm_run_cfg, _ = load_lm_trainer(args.checkpoint)
    codec_trainer, codec_run_cfg, _ = load_codec_trainer(args.codec_checkpoint)
    codec_cfg = codec_run_cfg.codec.codec_config()
    model = lm_trainer.model
    check_lm_codec_compat(model.cfg, codec_cfg.n_quantizers, codec_cfg.codebook_size)

    prompt = None
    if args.prompt:
        header, prompt = unpack(args.prompt.read_bytes())
        _check_stream_compat(header, codec_cfg, args.prompt)

    max_frames = args.max_frames if args.max_frames is not None else lm_run_cfg.lm.max_frames
    grid = model.synthesize(
        text_to_ids(args.text), prompt_grid=prompt, max_frames=max_frames,
        min_frames=args.min_frames, rng=np.random.default_rng(args.seed),
        k_top=1 if args.greedy else None,
    )
    if grid.shape[0] == 0:
        print("model emitted EOS immediately; no audio written")
        return 1
    header = StreamHeader(codec_cfg.sample_rate, codec_cfg.frame_rate,
                          codec_cfg.n_quantizers, codec_cfg.codebook_size,
                          grid.shape[0], grid.shape[0] * codec_cfg.hop)
    wave = _decode_from_grid(codec_trainer, header, grid)
    write_wav(args.out, wave)
    print(f"wrote {args.out} ({grid.shape[0]} frames, "
          f"{len(wave.samples) / codec_cfg.sample_rate:.2f} s)")
    return 0


# -- bench / inspect ----------------------------------------------------------


def cmd_bench(args) -> int:
    from ucodec.bench import (MacBreakdown, global_macs_per_frame,
                              local_macs_per_frame, LmArchPreset, macs_table,
                              measure_rtf, rows_to_csv, rows_to_json)

    if args.mode == "macs":
        rows = macs_table()
    else:
        import numpy as np

        from ucodec.lm import HierLm
        from ucodec.config import default_config

        run_cfg = _load_run_config(args.config)
        rows = []
        for name, rate in (("desk-5hz-synth", 5.0), ("desk-12.5hz-synth", 12.5)):
            lm_cfg = run_cfg.lm.lm_config(run_cfg.codec.codec_config())
            model = HierLm(lm_cfg, np.random.default_rng(args.seed))
            frames = int(round(args.audio_seconds * rate))

            def workload(model=model, frames=frames, rate=rate):
                model.synthesize([], max_frames=frames, min_frames=frames,
                                 rng=np.random.default_rng(args.seed))
                return frames / rate

            report = measure_rtf(workload)
            arch = LmArchPreset(name, rate, lm_cfg.n_quantizers,
                                lm_cfg.codebook_size, lm_cfg.local_dim,
                                global_layers=lm_cfg.global_layers,
                                global_dim=lm_cfg.global_dim,
                                global_ff=lm_cfg.global_ff,
                                local_layers=lm_cfg.local_layers)
            rows.append(MacBreakdown(name, rate, global_macs_per_frame(arch),
                                     local_macs_per_frame(arch), rtf=report.rtf))

    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
    if args.out:
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_inspect(args) -> int:
    from ucodec.bitstream import bitrate_bps, unpack

    header, grid = unpack(args.file.read_bytes())
    report = {
        "sample_rate": header.sample_rate,
        "frame_rate": float(header.frame_rate),
        "n_quantizers": header.n_quantizers,
        "codebook_size": header.codebook_size,
        "frames": header.n_frames,
        "original_length": header.original_length,
        "payload_bits": header.payload_bits,
        "entropy_bitrate_bps": bitrate_bps(header.frame_rate, header.n_quantizers,
                                           header.codebook_size),
        "min_id": int(grid.min()) if grid.size else None,
        "max_id": int(grid.max()) if grid.size else None,
    }
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
