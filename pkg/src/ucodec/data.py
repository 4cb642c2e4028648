"""Training corpus ingestion: deterministic shuffling, hop-aligned crops."""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from ucodec.errors import DatasetError
from ucodec.wavio import read_wav


def list_wavs(directory) -> list[Path]:
    paths = sorted(Path(directory).glob("*.wav"))
    if not paths:
        raise DatasetError(f"no .wav files in {directory}")
    return paths


def load_corpus(directory, sample_rate: int = 16000) -> list[np.ndarray]:
    return [read_wav(p, sample_rate).samples for p in list_wavs(directory)]


def crop_offset(n_samples: int, excerpt: int, hop: int, rng: np.random.Generator) -> int:
    """Uniform hop-aligned start for an excerpt-sized crop (0 if it barely fits)."""
    slots = (n_samples - excerpt) // hop
    if slots <= 0:
        return 0
    return int(rng.integers(0, slots + 1)) * hop


class CropSampler:
    """Endless [B, excerpt] batches with a capturable RNG state.

    File order reshuffles deterministically per epoch from the seed; crops
    are hop-aligned; short files are zero-padded to the excerpt length.
    """

    def __init__(self, signals: list[np.ndarray], excerpt: int, hop: int,
                 batch_size: int, seed: int):
        if excerpt % hop:
            raise DatasetError(f"excerpt {excerpt} is not a multiple of hop {hop}")
        if not signals:
            raise DatasetError("empty corpus")
        if batch_size < 1:
            raise DatasetError(f"batch size must be >= 1, got {batch_size}")
        self.signals = signals
        self.excerpt = excerpt
        self.hop = hop
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self._queue: list[int] = []

    def state(self) -> dict:
        return {"rng": self.rng.bit_generator.state, "queue": list(self._queue)}

    def restore(self, state: dict) -> None:
        self.rng.bit_generator.state = state["rng"]
        self._queue = list(state["queue"])

    def next_batch(self) -> np.ndarray:
        picks = []
        while len(picks) < self.batch_size:
            if not self._queue:
                self._queue = list(self.rng.permutation(len(self.signals)))
            picks.append(self._queue.pop(0))
        batch = np.zeros((len(picks), self.excerpt), dtype=np.float32)
        for row, i in enumerate(picks):
            sig = self.signals[i]
            off = crop_offset(len(sig), self.excerpt, self.hop, self.rng)
            piece = sig[off:off + self.excerpt]
            batch[row, :len(piece)] = piece
        return batch

    def __iter__(self) -> Iterator[np.ndarray]:
        while True:
            yield self.next_batch()


def batches(signals: list[np.ndarray], excerpt: int, hop: int, batch_size: int,
            seed: int) -> Iterator[np.ndarray]:
    return iter(CropSampler(signals, excerpt, hop, batch_size, seed))


def text_to_ids(text: str) -> list[int]:
    """Byte-level text ids (UTF-8)."""
    return list(text.encode("utf-8"))


def list_lm_pairs(directory) -> list[tuple[Path, Path]]:
    """Matched (transcript, token-stream) pairs: stem.txt next to stem.ucb."""
    root = Path(directory)
    pairs = []
    for ucb in sorted(root.glob("*.ucb")):
        txt = ucb.with_suffix(".txt")
        if not txt.exists():
            raise DatasetError(f"{ucb} has no matching transcript {txt.name}")
        pairs.append((txt, ucb))
    if not pairs:
        raise DatasetError(f"no (.txt, .ucb) pairs in {directory}")
    return pairs
