"""Bitplane block coder: framing, round-trips, corruption detection and
rate determinism."""

import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from lc5w import tier1
from lc5w.errors import CorruptStreamError


def roundtrip(coeffs):
    blob = tier1.encode_block(coeffs)
    out, end = tier1.decode_block(blob, 0, *coeffs.shape)
    assert end == len(blob)
    return out


def test_zero_block_is_three_bytes():
    blob = tier1.encode_block(np.zeros((64, 64), dtype=np.int64))
    assert blob == b"\x00\x00\x00"
    out, end = tier1.decode_block(blob, 0, 64, 64)
    assert end == 3 and not out.any()


def test_header_carries_plane_count_and_length():
    blob = tier1.encode_block(np.array([[5]]))
    kbits, nbytes = struct.unpack_from("<BH", blob, 0)
    assert kbits == 3  # |5| needs three magnitude planes
    assert len(blob) == 3 + nbytes


def test_single_coefficient_blocks():
    for v in (1, -1, 7, -100, 2 ** 31, -(2 ** 32 - 1)):
        got = roundtrip(np.array([[v]]))
        assert got[0, 0] == v


def test_magnitude_cap():
    roundtrip(np.array([[2 ** 32 - 1]]))  # 32 planes: largest legal value
    with pytest.raises(ValueError, match="planes"):
        tier1.encode_block(np.array([[2 ** 32]]))


def test_block_must_be_2d():
    with pytest.raises(ValueError):
        tier1.encode_block(np.zeros(16, dtype=np.int64))


@pytest.mark.parametrize("shape", [(1, 1), (1, 13), (9, 1), (4, 4), (5, 7),
                                   (16, 16), (33, 17), (64, 64)])
def test_roundtrip_shapes_and_contents(shape):
    rng = np.random.default_rng(shape[0] * 71 + shape[1])
    generators = [
        lambda: rng.integers(-3, 4, shape),
        lambda: rng.integers(-(2 ** 15), 2 ** 15, shape),
        lambda: np.where(rng.random(shape) < 0.05,
                         rng.integers(-999, 1000, shape), 0),
        lambda: np.full(shape, -(2 ** 20), dtype=np.int64),
        lambda: rng.integers(0, 2, shape),
    ]
    for make in generators:
        coeffs = make()
        assert np.array_equal(roundtrip(coeffs), coeffs)


def test_sparse_blocks_code_compactly():
    block = np.zeros((64, 64), dtype=np.int64)
    block[10, 10] = 9
    block[50, 3] = -2
    assert len(tier1.encode_block(block)) < 64 * 64 * 2 // 8


def test_truncated_payload_raises():
    rng = np.random.default_rng(0)
    blob = tier1.encode_block(rng.integers(-50, 50, (16, 16)))
    for cut in (0, 1, 2, len(blob) // 2, len(blob) - 1):
        with pytest.raises(CorruptStreamError):
            tier1.decode_block(blob[:cut], 0, 16, 16)


def test_invalid_headers_raise():
    with pytest.raises(CorruptStreamError, match="plane count"):
        tier1.decode_block(struct.pack("<BH", 40, 0), 0, 4, 4)
    with pytest.raises(CorruptStreamError, match="payload"):
        tier1.decode_block(struct.pack("<BH", 0, 2) + b"\x00\x00", 0, 4, 4)


def test_bit_flips_are_caught_or_contained():
    # no checksum by design, so detection is probabilistic: the vast
    # majority of single-bit flips must fail the end-of-stream check, and
    # none may escape as anything but the codec's own error type
    rng = np.random.default_rng(1)
    coeffs = rng.integers(-40, 40, (8, 8))
    blob = bytearray(tier1.encode_block(coeffs))
    flips = raised = 0
    for pos in range(3, len(blob)):
        for bit in range(8):
            blob[pos] ^= 1 << bit
            flips += 1
            try:
                tier1.decode_block(bytes(blob), 0, 8, 8)
            except CorruptStreamError:
                raised += 1
            blob[pos] ^= 1 << bit
    assert raised >= 0.95 * flips


def test_subband_payload_is_tile_concatenation():
    rng = np.random.default_rng(2)
    band = rng.integers(-100, 100, (5, 9))
    blob = tier1.encode_subband(band, 4)
    parts = []
    for y0, y1, x0, x1 in tier1.iter_tiles(5, 9, 4):
        parts.append(tier1.encode_block(band[y0:y1, x0:x1]))
    assert blob == b"".join(parts)
    out, end = tier1.decode_subband(blob, 0, 5, 9, 4)
    assert end == len(blob)
    assert np.array_equal(out, band)


def test_tile_grid_is_raster_order():
    assert list(tier1.iter_tiles(5, 9, 4)) == [
        (0, 4, 0, 4), (0, 4, 4, 8), (0, 4, 8, 9),
        (4, 5, 0, 4), (4, 5, 4, 8), (4, 5, 8, 9),
    ]
    assert list(tier1.iter_tiles(0, 4, 4)) == []


def test_empty_band_is_empty_payload():
    band = np.zeros((0, 7), dtype=np.int64)
    assert tier1.encode_subband(band, 4) == b""
    out, end = tier1.decode_subband(b"", 0, 0, 7, 4)
    assert end == 0 and out.shape == (0, 7)


def test_rate_is_deterministic_across_runs_and_threads():
    rng = np.random.default_rng(3)
    bands = [rng.integers(-200, 200, (24, 24)) for _ in range(12)]
    baseline = [tier1.subband_rate(b, 16) for b in bands]
    assert [tier1.subband_rate(b, 16) for b in bands] == baseline
    for workers in (2, 8):
        with ThreadPoolExecutor(workers) as pool:
            rates = list(pool.map(lambda b: tier1.subband_rate(b, 16), bands))
        assert rates == baseline


def test_encoded_bytes_identical_under_concurrency():
    rng = np.random.default_rng(4)
    blocks = [rng.integers(-99, 99, (16, 16)) for _ in range(16)]
    expected = [tier1.encode_block(b) for b in blocks]
    with ThreadPoolExecutor(8) as pool:
        got = list(pool.map(tier1.encode_block, blocks))
    assert got == expected
