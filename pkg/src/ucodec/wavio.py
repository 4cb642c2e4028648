"""PCM16 mono WAV reading and writing.

The engine validates instead of resampling: anything that is not mono PCM16
at the expected rate is rejected with a message naming the offending field.
"""

from __future__ import annotations

import wave

import numpy as np

from ucodec.codec import Waveform
from ucodec.errors import FormatError

SCALE = 32768.0


def read_wav(path, expected_rate: int | None = 16000) -> Waveform:
    try:
        with wave.open(str(path), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            frames = f.readframes(f.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if channels != 1:
        raise FormatError(f"{path}: channel count {channels}, need mono")
    if width != 2:
        raise FormatError(f"{path}: sample width {8 * width} bits, need PCM16")
    if expected_rate is not None and rate != expected_rate:
        raise FormatError(f"{path}: sample rate {rate}, need {expected_rate}")
    pcm = np.frombuffer(frames, dtype="<i2")
    return Waveform(pcm.astype(np.float32) / SCALE, rate)


def write_wav(path, wave_out: Waveform) -> None:
    samples = np.clip(wave_out.samples, -1.0, 1.0)
    pcm = np.clip(np.rint(samples * SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(wave_out.sample_rate)
        f.writeframes(pcm.tobytes())
