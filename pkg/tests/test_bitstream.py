"""Bitstream: bitrate arithmetic and lossless pack/unpack."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucodec.bitstream import (
    StreamHeader,
    bitrate_bps,
    bits_per_token,
    pack,
    token_rate,
    unpack,
)
from ucodec.errors import CorruptStreamError, FormatError, ShapeError

PRESETS = [(8, 8192), (8, 16384), (16, 4096), (32, 256), (100, 4)]


def header_for(grid, codebook_size, frame_rate=Fraction(5)):
    return StreamHeader(16000, frame_rate, grid.shape[1], codebook_size,
                        grid.shape[0], grid.shape[0] * 3200)


def test_bitrate_published_rows():
    assert bitrate_bps(5, 32, 256) == 1280.0
    assert bitrate_bps(5, 16, 4096) == 960.0
    assert bitrate_bps(5, 8, 8192) == 520.0
    assert bitrate_bps(5, 8, 16384) == 560.0
    assert bitrate_bps(5, 100, 4) == 1000.0
    assert bitrate_bps(Fraction(25, 2), 8, 1024) == 1000.0


def test_bitrate_rejects_tiny_codebook():
    with pytest.raises(ShapeError):
        bitrate_bps(5, 8, 1)


def test_token_rate_rows():
    assert token_rate(5, 32) == 160.0
    assert token_rate(Fraction(25, 2), 8) == 100.0
    assert token_rate(5, 1) == 5.0


def test_bits_per_token():
    assert bits_per_token(4) == 2
    assert bits_per_token(256) == 8
    assert bits_per_token(16384) == 14
    assert bits_per_token(5) == 3  # non-power-of-two rounds up


def test_byte_layout_example():
    grid = np.array([[0], [1], [2], [3]])
    header = header_for(grid, 4)
    data = pack(grid, header)
    payload = data[-1:]
    assert payload == bytes([0b00011011])


def test_one_second_payload_size_matches_bitrate():
    rng = np.random.default_rng(50)
    grid = rng.integers(0, 256, size=(5, 32))  # 1 s at 5 Hz
    data = pack(grid, header_for(grid, 256))
    header, _ = unpack(data)
    assert header.payload_bits == 1280
    assert len(data) - (len(data) - header.payload_bytes) == 160


@settings(max_examples=60, deadline=None)
@given(
    preset=st.sampled_from(PRESETS),
    n_frames=st.integers(0, 12),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_random_grids(preset, n_frames, seed):
    n_q, c = preset
    grid = np.random.default_rng(seed).integers(0, c, size=(n_frames, n_q))
    header = header_for(grid, c, frame_rate=Fraction(25, 2))
    out_header, out_grid = unpack(pack(grid, header))
    assert out_header == header
    np.testing.assert_array_equal(out_grid, grid)


def test_roundtrip_bulk_all_presets():
    rng = np.random.default_rng(51)
    for n_q, c in PRESETS:
        for _ in range(200):
            t = int(rng.integers(1, 12))
            grid = rng.integers(0, c, size=(t, n_q))
            _, out = unpack(pack(grid, header_for(grid, c)))
            np.testing.assert_array_equal(out, grid)


def test_unpack_rejects_bad_magic():
    grid = np.zeros((1, 1), dtype=int)
    data = bytearray(pack(grid, header_for(grid, 4)))
    data[:4] = b"XXXX"
    with pytest.raises(FormatError):
        unpack(bytes(data))


def test_unpack_rejects_bad_version():
    grid = np.zeros((1, 1), dtype=int)
    data = bytearray(pack(grid, header_for(grid, 4)))
    data[4] = 9
    with pytest.raises(FormatError):
        unpack(bytes(data))


def test_unpack_rejects_truncation_and_padding():
    grid = np.random.default_rng(52).integers(0, 256, size=(3, 8))
    data = pack(grid, header_for(grid, 256))
    with pytest.raises(CorruptStreamError):
        unpack(data[:-1])
    with pytest.raises(CorruptStreamError):
        unpack(data + b"\x00")


def test_unpack_rejects_out_of_range_id():
    # C=5 -> 3 bits per token; id 7 is encodable but invalid
    grid = np.array([[1]])
    header = StreamHeader(16000, Fraction(5), 1, 5, 1, 3200)
    data = bytearray(pack(grid, header))
    data[-1] = 0b11100000
    with pytest.raises(CorruptStreamError):
        unpack(bytes(data))


def test_pack_validates_grid():
    grid = np.array([[4]])
    with pytest.raises(ShapeError):
        pack(grid, header_for(grid, 4))
    with pytest.raises(ShapeError):
        pack(np.zeros((2, 3), dtype=int), header_for(np.zeros((2, 2), dtype=int), 4))


def test_header_roundtrip_fractional_rate():
    grid = np.random.default_rng(53).integers(0, 1024, size=(4, 8))
    header = StreamHeader(16000, Fraction(25, 2), 8, 1024, 4, 5120)
    out_header, _ = unpack(pack(grid, header))
    assert out_header.frame_rate == Fraction(25, 2)
    assert float(out_header.frame_rate) == 12.5
