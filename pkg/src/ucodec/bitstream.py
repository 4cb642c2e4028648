"""Token-grid serialization (.ucb) and the bitrate arithmetic.

Stream layout: a fixed header, then every token as ceil(log2 C) bits,
most-significant bit first, frames in time order and quantizer layers in
order inside each frame; the final byte is zero-padded.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ucodec.errors import CorruptStreamError, FormatError, ShapeError

MAGIC = b"UCB1"
VERSION = 1
_HEADER = struct.Struct("<4sBIHHHIII")  # magic, ver, sr, fr_num, fr_den, N, C, T, orig_len


def bits_per_token(codebook_size: int) -> int:
    if codebook_size < 2:
        raise ShapeError(f"codebook size must be >= 2, got {codebook_size}")
    return (codebook_size - 1).bit_length()


def bitrate_bps(frame_rate, n_quantizers: int, codebook_size: int) -> float:
    """Entropy bitrate S * N * log2(C) in bits per second."""
    if codebook_size < 2:
        raise ShapeError(f"codebook size must be >= 2, got {codebook_size}")
    return float(frame_rate) * n_quantizers * math.log2(codebook_size)


def token_rate(frame_rate, n_quantizers: int) -> float:
    """Discrete tokens per second: S * N."""
    return float(frame_rate) * n_quantizers


@dataclass(frozen=True)
class StreamHeader:
    sample_rate: int
    frame_rate: Fraction
    n_quantizers: int
    codebook_size: int
    n_frames: int
    original_length: int

    @property
    def payload_bits(self) -> int:
        return self.n_frames * self.n_quantizers * bits_per_token(self.codebook_size)

    @property
    def payload_bytes(self) -> int:
        return (self.payload_bits + 7) // 8


def pack(grid: np.ndarray, header: StreamHeader) -> bytes:
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape != (header.n_frames, header.n_quantizers):
        raise ShapeError(
            f"grid {grid.shape} inconsistent with header "
            f"({header.n_frames} x {header.n_quantizers})"
        )
    if grid.size and (grid.min() < 0 or grid.max() >= header.codebook_size):
        raise ShapeError(f"code ids must lie in [0, {header.codebook_size})")
    fr = Fraction(header.frame_rate)
    head = _HEADER.pack(MAGIC, VERSION, header.sample_rate,
                        fr.numerator, fr.denominator,
                        header.n_quantizers, header.codebook_size,
                        header.n_frames, header.original_length)
    bits_per = bits_per_token(header.codebook_size)
    tokens = grid.reshape(-1).astype(np.uint32)
    shifts = np.arange(bits_per - 1, -1, -1, dtype=np.uint32)
    bits = ((tokens[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    payload = np.packbits(bits.reshape(-1))  # MSB-first, zero-padded tail
    return head + payload.tobytes()


def unpack(data: bytes) -> tuple[StreamHeader, np.ndarray]:
    if len(data) < _HEADER.size:
        raise CorruptStreamError("stream shorter than its header")
    magic, version, sr, fr_num, fr_den, n_q, c_size, n_frames, orig = \
        _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported stream version {version}")
    if fr_den == 0 or c_size < 2:
        raise CorruptStreamError("malformed header fields")
    header = StreamHeader(sr, Fraction(fr_num, fr_den), n_q, c_size, n_frames, orig)

    payload = data[_HEADER.size:]
    if len(payload) != header.payload_bytes:
        raise CorruptStreamError(
            f"payload is {len(payload)} bytes, header implies {header.payload_bytes}"
        )
    bits_per = bits_per_token(c_size)
    n_tokens = n_frames * n_q
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:n_tokens * bits_per]
    weights = (1 << np.arange(bits_per - 1, -1, -1)).astype(np.int64)
    tokens = bits.reshape(n_tokens, bits_per).astype(np.int64) @ weights
    if n_tokens and tokens.max() >= c_size:
        raise CorruptStreamError(f"decoded id {tokens.max()} >= codebook size {c_size}")
    return header, tokens.reshape(n_frames, n_q)
