"""Complexity accounting (multiply-accumulates), RTF timing, signal metrics.

MAC formulas count projection/attention multiplies only (softmax and
normalization flops are excluded by the MAC definition). Per-frame local
cost covers all N intra-frame decoding steps of that frame.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ucodec.errors import MetricError
from ucodec.objectives.mel import MelConfig, MultiScaleMelLoss

GIGA = 1e9


def mac_linear(in_dim: int, out_dim: int, positions: int) -> int:
    return in_dim * out_dim * positions


def mac_conv1d(cin: int, cout: int, kernel: int, lout: int) -> int:
    return cin * cout * kernel * lout


def mac_transformer(layers: int, d_model: int, ff_dim: int, seq_len: int,
                    past_len: int = 0) -> int:
    """QKV/output projections + MLP per position, plus score and value
    products against ``past_len + seq_len`` attended positions."""
    proj = layers * (4 * d_model * d_model + 2 * d_model * ff_dim) * seq_len
    attend = layers * 2 * seq_len * (past_len + seq_len) * d_model
    return proj + attend


def mac_total_per_second(frame_rate, mac_g: float, mac_l: float) -> float:
    """Giga-MACs per second of audio: S * (per-frame global + local)."""
    return float(frame_rate) * (mac_g + mac_l)


@dataclass(frozen=True)
class MacBreakdown:
    model: str
    frame_rate: float
    mac_g: float  # giga-MACs per frame, global model
    mac_l: float  # giga-MACs per frame, all local steps of one frame
    rtf: float | None = None

    @property
    def mac_total(self) -> float:
        return mac_total_per_second(self.frame_rate, self.mac_g, self.mac_l)


@dataclass(frozen=True)
class RtfReport:
    wall_seconds: float
    audio_seconds: float
    hardware: str
    runs: int

    @property
    def rtf(self) -> float:
        return self.wall_seconds / self.audio_seconds


@dataclass(frozen=True)
class LmArchPreset:
    """Paper-scale reference architecture for one codec configuration.

    The global stack is 24 layers x 1536 (ff 6144) everywhere; the local
    width shrinks as the quantizer stack deepens (estimates chosen so the
    per-frame accounting lands in the published complexity regime).
    """
    name: str
    frame_rate: float
    n_quantizers: int
    codebook_size: int
    local_dim: int
    global_layers: int = 24
    global_dim: int = 1536
    global_ff: int = 6144
    local_layers: int = 8

    @property
    def local_ff(self) -> int:
        return 4 * self.local_dim


PAPER_PRESETS = (
    LmArchPreset("8rvq-c16384", 5.0, 8, 16384, local_dim=512),
    LmArchPreset("16rvq-c4096", 5.0, 16, 4096, local_dim=256),
    LmArchPreset("32rvq-c256", 5.0, 32, 256, local_dim=64),
    LmArchPreset("100rvq-c4", 5.0, 100, 4, local_dim=32),
    LmArchPreset("12.5hz-8rvq-c1024", 12.5, 8, 1024, local_dim=128),
)

CONTEXT_SECONDS = 5.0  # representative decoding context for per-frame MACs


def global_macs_per_frame(preset: LmArchPreset, context_seconds: float = CONTEXT_SECONDS) -> float:
    past = int(round(preset.frame_rate * context_seconds))
    return mac_transformer(preset.global_layers, preset.global_dim,
                           preset.global_ff, 1, past) / GIGA


def local_macs_per_frame(preset: LmArchPreset) -> float:
    total = mac_linear(preset.global_dim, preset.local_dim, 1)  # conditioning proj
    for k in range(preset.n_quantizers):
        total += mac_transformer(preset.local_layers, preset.local_dim,
                                 preset.local_ff, 1, past_len=k)
        vocab = preset.codebook_size + (1 if k == 0 else 0)
        total += mac_linear(preset.local_dim, vocab, 1)
    return total / GIGA


def macs_table(presets=PAPER_PRESETS) -> list[MacBreakdown]:
    return [
        MacBreakdown(p.name, p.frame_rate, global_macs_per_frame(p),
                     local_macs_per_frame(p))
        for p in presets
    ]


CSV_HEADER = "model,frame_rate,rtf,mac_g,mac_l,mac_total"


def rows_to_csv(rows: list[MacBreakdown]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in rows:
        writer.writerow([r.model, f"{r.frame_rate:g}",
                         "" if r.rtf is None else f"{r.rtf:.4f}",
                         f"{r.mac_g:.6f}", f"{r.mac_l:.6f}", f"{r.mac_total:.6f}"])
    return buf.getvalue()


def rows_to_json(rows: list[MacBreakdown]) -> str:
    return json.dumps([
        {"model": r.model, "frame_rate": r.frame_rate, "rtf": r.rtf,
         "mac_g": r.mac_g, "mac_l": r.mac_l, "mac_total": r.mac_total}
        for r in rows
    ], indent=2)


def measure_rtf(workload, runs: int = 3, hardware: str | None = None) -> RtfReport:
    """Median wall time of >= 3 runs of ``workload`` (which returns the
    seconds of audio it produced) divided by those audio seconds."""
    if runs < 3:
        raise ValueError("measure_rtf needs at least 3 runs")
    times = []
    audio_seconds = None
    for _ in range(runs):
        start = time.perf_counter()
        produced = float(workload())
        times.append(time.perf_counter() - start)
        if produced <= 0:
            raise ValueError("workload produced no audio")
        audio_seconds = produced
    return RtfReport(
        wall_seconds=float(np.median(times)),
        audio_seconds=audio_seconds,
        hardware=hardware or f"{platform.machine()} single-thread",
        runs=runs,
    )


def si_snr(reference: np.ndarray, estimate: np.ndarray, cap_db: float = 100.0) -> float:
    """Scale-invariant SNR in dB over zero-meaned signals, clamped to
    [-cap_db, cap_db]."""
    x = np.asarray(reference, dtype=np.float64)
    y = np.asarray(estimate, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch {x.shape} vs {y.shape}")
    x = x - x.mean()
    y = y - y.mean()
    power = float(x @ x)
    if power == 0.0:
        raise MetricError("si_snr undefined for a silent reference")
    target = (float(y @ x) / power) * x
    err = y - target
    num = float(target @ target)
    den = float(err @ err)
    if den == 0.0:
        return cap_db
    if num == 0.0:
        return -cap_db
    return float(np.clip(10.0 * np.log10(num / den), -cap_db, cap_db))


def mel_l1(reference: np.ndarray, estimate: np.ndarray, sample_rate: int,
           cfg: MelConfig = MelConfig()) -> float:
    import ucodec.kernels as K

    loss = MultiScaleMelLoss(sample_rate, cfg)
    with K.no_grad():
        return loss(K.tensor(np.asarray(reference, dtype=np.float64)),
                    K.tensor(np.asarray(estimate, dtype=np.float64))).item()
