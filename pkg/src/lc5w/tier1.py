"""Context-adaptive bitplane coding of integer coefficient blocks.

Each code block is coded magnitude-plane by magnitude-plane, most
significant plane first, with three passes per plane over a 4-row stripe
scan: neighbours of already-significant samples first (they are the likely
next ones), then refinement bits of known-significant samples, then a
cleanup sweep with a run mode that folds whole all-quiet stripe columns
into a single decision. Signs are coded the moment a sample turns
significant, with a context built from the left/up neighbour signs.

Decisions go through a binary arithmetic coder with per-context adaptive
counts; run-interruption offsets and the trailing integrity sentinel are
coded at a fixed 1/2 split. The byte stream for one block is

    [K: u8] [payload length: u16 LE] [payload]

where K is the number of magnitude planes; K = 0 means the block is all
zeros and carries no payload.
"""

from __future__ import annotations

import struct

import numpy as np

from ._jit import njit
from .errors import CorruptStreamError

DEFAULT_CODE_BLOCK = 64
MAX_PLANES = 32
SENTINEL = 0xA3C5

_FULL = (1 << 32) - 1
_HALF = 1 << 31
_QUARTER = 1 << 30
_THREEQ = 3 << 30
_COUNT_CAP = 1024

# context layout: 0..8 significance (by significant-neighbour count),
# 9..13 sign, 14..16 refinement, 17 run, 18 fixed 1/2 (never adapted)
_N_CTX = 19
_CTX_RUN = 17
_CTX_RAW = 18


@njit(cache=True, nogil=True)
def _put_bit(buf, st, bit):
    pos = st[3]
    if (pos >> 3) < buf.shape[0]:
        if bit != 0:
            buf[pos >> 3] = buf[pos >> 3] | (1 << (7 - (pos & 7)))
    else:
        st[4] = 1
    st[3] = pos + 1


@njit(cache=True, nogil=True)
def _enc_bit(buf, st, counts, ctx, bit, adapt):
    low = st[0]
    high = st[1]
    c0 = counts[ctx, 0]
    total = c0 + counts[ctx, 1]
    split = low + ((high - low + 1) * c0) // total - 1
    if bit == 0:
        high = split
    else:
        low = split + 1
    while True:
        if high < _HALF:
            _put_bit(buf, st, 0)
            for _ in range(st[2]):
                _put_bit(buf, st, 1)
            st[2] = 0
        elif low >= _HALF:
            _put_bit(buf, st, 1)
            for _ in range(st[2]):
                _put_bit(buf, st, 0)
            st[2] = 0
            low -= _HALF
            high -= _HALF
        elif low >= _QUARTER and high < _THREEQ:
            st[2] += 1
            low -= _QUARTER
            high -= _QUARTER
        else:
            break
        low = low << 1
        high = (high << 1) | 1
    st[0] = low
    st[1] = high
    if adapt != 0:
        counts[ctx, bit] += 1
        if counts[ctx, 0] + counts[ctx, 1] > _COUNT_CAP:
            counts[ctx, 0] = (counts[ctx, 0] + 1) >> 1
            counts[ctx, 1] = (counts[ctx, 1] + 1) >> 1


@njit(cache=True, nogil=True)
def _enc_finish(buf, st):
    st[2] += 1
    if st[0] < _QUARTER:
        _put_bit(buf, st, 0)
        for _ in range(st[2]):
            _put_bit(buf, st, 1)
    else:
        _put_bit(buf, st, 1)
        for _ in range(st[2]):
            _put_bit(buf, st, 0)


@njit(cache=True, nogil=True)
def _get_bit(buf, nbits, st):
    pos = st[3]
    st[3] = pos + 1
    if pos >= nbits:
        return 0
    return (buf[pos >> 3] >> (7 - (pos & 7))) & 1


@njit(cache=True, nogil=True)
def _dec_start(buf, nbits, st):
    st[0] = 0
    st[1] = _FULL
    st[3] = 0
    code = 0
    for _ in range(32):
        code = (code << 1) | _get_bit(buf, nbits, st)
    st[2] = code


@njit(cache=True, nogil=True)
def _dec_bit(buf, nbits, st, counts, ctx, adapt):
    low = st[0]
    high = st[1]
    code = st[2]
    c0 = counts[ctx, 0]
    total = c0 + counts[ctx, 1]
    split = low + ((high - low + 1) * c0) // total - 1
    if code <= split:
        bit = 0
        high = split
    else:
        bit = 1
        low = split + 1
    while True:
        if high < _HALF:
            pass
        elif low >= _HALF:
            low -= _HALF
            high -= _HALF
            code -= _HALF
        elif low >= _QUARTER and high < _THREEQ:
            low -= _QUARTER
            high -= _QUARTER
            code -= _QUARTER
        else:
            break
        low = low << 1
        high = (high << 1) | 1
        code = (code << 1) | _get_bit(buf, nbits, st)
    st[0] = low
    st[1] = high
    st[2] = code
    if adapt != 0:
        counts[ctx, bit] += 1
        if counts[ctx, 0] + counts[ctx, 1] > _COUNT_CAP:
            counts[ctx, 0] = (counts[ctx, 0] + 1) >> 1
            counts[ctx, 1] = (counts[ctx, 1] + 1) >> 1
    return bit


@njit(cache=True, nogil=True)
def _nbr_count(sig, y, x):
    h, w = sig.shape
    n = 0
    for dy in range(-1, 2):
        yy = y + dy
        if yy < 0 or yy >= h:
            continue
        for dx in range(-1, 2):
            if dy == 0 and dx == 0:
                continue
            xx = x + dx
            if 0 <= xx < w and sig[yy, xx] != 0:
                n += 1
    return n


@njit(cache=True, nogil=True)
def _sign_ctx(sig, sgn, y, x):
    h = 0
    if x > 0 and sig[y, x - 1] != 0:
        h = -1 if sgn[y, x - 1] != 0 else 1
    v = 0
    if y > 0 and sig[y - 1, x] != 0:
        v = -1 if sgn[y - 1, x] != 0 else 1
    flip = 0
    if h < 0 or (h == 0 and v < 0):
        h = -h
        v = -v
        flip = 1
    if h == 0:
        ctx = 9 if v == 0 else 10
    elif v < 0:
        ctx = 11
    elif v == 0:
        ctx = 12
    else:
        ctx = 13
    return ctx, flip


@njit(cache=True, nogil=True)
def _encode_block_kernel(mag, neg, kbits, buf):
    h, w = mag.shape
    counts = np.ones((_N_CTX, 2), np.int64)
    st = np.zeros(5, np.int64)
    st[1] = _FULL
    sig = np.zeros((h, w), np.uint8)
    sgn = np.zeros((h, w), np.uint8)
    fresh = np.zeros((h, w), np.uint8)
    visited = np.zeros((h, w), np.uint8)
    sig_before = np.zeros((h, w), np.uint8)

    for p in range(kbits - 1, -1, -1):
        for y in range(h):
            for x in range(w):
                visited[y, x] = 0
                sig_before[y, x] = sig[y, x]

        # pass 1: neighbours of significant samples
        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                for y in range(s0, s1):
                    if sig[y, x] != 0 or visited[y, x] != 0:
                        continue
                    n = _nbr_count(sig, y, x)
                    if n == 0:
                        continue
                    bit = (mag[y, x] >> p) & 1
                    _enc_bit(buf, st, counts, n, bit, 1)
                    visited[y, x] = 1
                    if bit != 0:
                        ctx, flip = _sign_ctx(sig, sgn, y, x)
                        nb = 1 if neg[y, x] != 0 else 0
                        _enc_bit(buf, st, counts, ctx, nb ^ flip, 1)
                        sig[y, x] = 1
                        sgn[y, x] = neg[y, x]
                        fresh[y, x] = 1

        # pass 2: refinement of previously significant samples
        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                for y in range(s0, s1):
                    if sig_before[y, x] == 0 or visited[y, x] != 0:
                        continue
                    if fresh[y, x] != 0:
                        ctx = 15 if _nbr_count(sig, y, x) > 0 else 14
                    else:
                        ctx = 16
                    _enc_bit(buf, st, counts, ctx, (mag[y, x] >> p) & 1, 1)
                    fresh[y, x] = 0
                    visited[y, x] = 1

        # pass 3: cleanup with run mode on all-quiet stripe columns
        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                run_ok = (s1 - s0) == 4
                if run_ok:
                    for y in range(s0, s1):
                        if (sig[y, x] != 0 or visited[y, x] != 0
                                or _nbr_count(sig, y, x) != 0):
                            run_ok = False
                            break
                start = s0
                if run_ok:
                    r = -1
                    for k in range(4):
                        if (mag[s0 + k, x] >> p) & 1 != 0:
                            r = k
                            break
                    if r < 0:
                        _enc_bit(buf, st, counts, _CTX_RUN, 0, 1)
                        for y in range(s0, s1):
                            visited[y, x] = 1
                        continue
                    _enc_bit(buf, st, counts, _CTX_RUN, 1, 1)
                    _enc_bit(buf, st, counts, _CTX_RAW, (r >> 1) & 1, 0)
                    _enc_bit(buf, st, counts, _CTX_RAW, r & 1, 0)
                    for k in range(r):
                        visited[s0 + k, x] = 1
                    y = s0 + r
                    ctx, flip = _sign_ctx(sig, sgn, y, x)
                    nb = 1 if neg[y, x] != 0 else 0
                    _enc_bit(buf, st, counts, ctx, nb ^ flip, 1)
                    sig[y, x] = 1
                    sgn[y, x] = neg[y, x]
                    fresh[y, x] = 1
                    visited[y, x] = 1
                    start = y + 1
                for y in range(start, s1):
                    if sig[y, x] != 0 or visited[y, x] != 0:
                        continue
                    n = _nbr_count(sig, y, x)
                    bit = (mag[y, x] >> p) & 1
                    _enc_bit(buf, st, counts, n, bit, 1)
                    visited[y, x] = 1
                    if bit != 0:
                        ctx, flip = _sign_ctx(sig, sgn, y, x)
                        nb = 1 if neg[y, x] != 0 else 0
                        _enc_bit(buf, st, counts, ctx, nb ^ flip, 1)
                        sig[y, x] = 1
                        sgn[y, x] = neg[y, x]
                        fresh[y, x] = 1

    for i in range(15, -1, -1):
        _enc_bit(buf, st, counts, _CTX_RAW, (SENTINEL >> i) & 1, 0)
    _enc_finish(buf, st)
    if st[4] != 0:
        return -1
    return st[3]


@njit(cache=True, nogil=True)
def _decode_block_kernel(mag, neg, kbits, buf, nbits):
    h, w = mag.shape
    counts = np.ones((_N_CTX, 2), np.int64)
    st = np.zeros(5, np.int64)
    _dec_start(buf, nbits, st)
    sig = np.zeros((h, w), np.uint8)
    sgn = np.zeros((h, w), np.uint8)
    fresh = np.zeros((h, w), np.uint8)
    visited = np.zeros((h, w), np.uint8)
    sig_before = np.zeros((h, w), np.uint8)

    for p in range(kbits - 1, -1, -1):
        for y in range(h):
            for x in range(w):
                visited[y, x] = 0
                sig_before[y, x] = sig[y, x]

        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                for y in range(s0, s1):
                    if sig[y, x] != 0 or visited[y, x] != 0:
                        continue
                    n = _nbr_count(sig, y, x)
                    if n == 0:
                        continue
                    bit = _dec_bit(buf, nbits, st, counts, n, 1)
                    visited[y, x] = 1
                    if bit != 0:
                        ctx, flip = _sign_ctx(sig, sgn, y, x)
                        nb = _dec_bit(buf, nbits, st, counts, ctx, 1) ^ flip
                        mag[y, x] |= 1 << p
                        sig[y, x] = 1
                        sgn[y, x] = nb
                        neg[y, x] = nb
                        fresh[y, x] = 1

        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                for y in range(s0, s1):
                    if sig_before[y, x] == 0 or visited[y, x] != 0:
                        continue
                    if fresh[y, x] != 0:
                        ctx = 15 if _nbr_count(sig, y, x) > 0 else 14
                    else:
                        ctx = 16
                    bit = _dec_bit(buf, nbits, st, counts, ctx, 1)
                    mag[y, x] |= bit << p
                    fresh[y, x] = 0
                    visited[y, x] = 1

        for s0 in range(0, h, 4):
            s1 = min(s0 + 4, h)
            for x in range(w):
                run_ok = (s1 - s0) == 4
                if run_ok:
                    for y in range(s0, s1):
                        if (sig[y, x] != 0 or visited[y, x] != 0
                                or _nbr_count(sig, y, x) != 0):
                            run_ok = False
                            break
                start = s0
                if run_ok:
                    if _dec_bit(buf, nbits, st, counts, _CTX_RUN, 1) == 0:
                        for y in range(s0, s1):
                            visited[y, x] = 1
                        continue
                    r = (_dec_bit(buf, nbits, st, counts, _CTX_RAW, 0) << 1)
                    r |= _dec_bit(buf, nbits, st, counts, _CTX_RAW, 0)
                    for k in range(r):
                        visited[s0 + k, x] = 1
                    y = s0 + r
                    ctx, flip = _sign_ctx(sig, sgn, y, x)
                    nb = _dec_bit(buf, nbits, st, counts, ctx, 1) ^ flip
                    mag[y, x] |= 1 << p
                    sig[y, x] = 1
                    sgn[y, x] = nb
                    neg[y, x] = nb
                    fresh[y, x] = 1
                    visited[y, x] = 1
                    start = y + 1
                for y in range(start, s1):
                    if sig[y, x] != 0 or visited[y, x] != 0:
                        continue
                    n = _nbr_count(sig, y, x)
                    bit = _dec_bit(buf, nbits, st, counts, n, 1)
                    visited[y, x] = 1
                    if bit != 0:
                        ctx, flip = _sign_ctx(sig, sgn, y, x)
                        nb = _dec_bit(buf, nbits, st, counts, ctx, 1) ^ flip
                        mag[y, x] |= 1 << p
                        sig[y, x] = 1
                        sgn[y, x] = nb
                        neg[y, x] = nb
                        fresh[y, x] = 1

    check = 0
    for _ in range(16):
        check = (check << 1) | _dec_bit(buf, nbits, st, counts, _CTX_RAW, 0)
    if check != SENTINEL:
        return 1
    return 0


def encode_block(coeffs: np.ndarray) -> bytes:
    """Code one block; returns header + payload bytes."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.int64)
    if coeffs.ndim != 2:
        raise ValueError("code block must be 2-D")
    mag = np.abs(coeffs)
    kbits = int(np.max(mag, initial=0)).bit_length()
    if kbits == 0:
        return struct.pack("<BH", 0, 0)
    if kbits > MAX_PLANES:
        raise ValueError(f"coefficient magnitudes need {kbits} planes (max {MAX_PLANES})")
    neg = (coeffs < 0).astype(np.uint8)
    h, w = coeffs.shape
    # loose upper bound: <= 10 bits per coded decision (count ratio is
    # capped at 1:1023) over all planes, plus signs, sentinel and flush
    n_sym = kbits * 3 * h * w + h * w + 64
    buf = np.zeros((10 * n_sym) // 8 + 64, np.uint8)
    nbits = _encode_block_kernel(mag, neg, kbits, buf)
    if nbits < 0:
        raise CorruptStreamError("coded block exceeded its worst-case budget")
    nbytes = (int(nbits) + 7) // 8
    if nbytes > 0xFFFF:
        raise CorruptStreamError(f"coded block payload {nbytes} overflows length field")
    return struct.pack("<BH", kbits, nbytes) + buf[:nbytes].tobytes()


def decode_block(data, offset: int, height: int, width: int):
    """Inverse of encode_block; returns (coeffs, next offset)."""
    if offset + 3 > len(data):
        raise CorruptStreamError("truncated code block header")
    kbits, nbytes = struct.unpack_from("<BH", data, offset)
    offset += 3
    if kbits > MAX_PLANES:
        raise CorruptStreamError(f"invalid plane count {kbits}")
    if kbits == 0:
        if nbytes != 0:
            raise CorruptStreamError("zero-plane block with payload")
        return np.zeros((height, width), np.int64), offset
    if offset + nbytes > len(data):
        raise CorruptStreamError("truncated code block payload")
    payload = np.frombuffer(data, np.uint8, count=nbytes, offset=offset)
    mag = np.zeros((height, width), np.int64)
    neg = np.zeros((height, width), np.uint8)
    status = _decode_block_kernel(mag, neg, kbits, payload, nbytes * 8)
    if status != 0:
        raise CorruptStreamError("code block failed its integrity check")
    coeffs = np.where(neg != 0, -mag, mag)
    return coeffs, offset + nbytes


def iter_tiles(height: int, width: int, cb: int):
    for y0 in range(0, height, cb):
        for x0 in range(0, width, cb):
            yield y0, min(y0 + cb, height), x0, min(x0 + cb, width)


def encode_subband(coeffs: np.ndarray, cb: int = DEFAULT_CODE_BLOCK) -> bytes:
    """Tile a band into cb x cb blocks (raster order) and code each."""
    h, w = coeffs.shape
    parts = []
    for y0, y1, x0, x1 in iter_tiles(h, w, cb):
        parts.append(encode_block(coeffs[y0:y1, x0:x1]))
    return b"".join(parts)


def decode_subband(data, offset: int, height: int, width: int,
                   cb: int = DEFAULT_CODE_BLOCK):
    """Inverse of encode_subband; returns (coeffs, next offset)."""
    out = np.zeros((height, width), np.int64)
    for y0, y1, x0, x1 in iter_tiles(height, width, cb):
        block, offset = decode_block(data, offset, y1 - y0, x1 - x0)
        out[y0:y1, x0:x1] = block
    return out, offset


def subband_rate(coeffs: np.ndarray, cb: int = DEFAULT_CODE_BLOCK) -> int:
    """Exact coded size of a band in bytes (headers included)."""
    return len(encode_subband(coeffs, cb))
