"""Shared test utilities: an independent (slow, loop-based) oracle for the
re-sort decision quotient, and a random volume factory."""

import math

import numpy as np

from lc5w import motion
from lc5w.volume_io import sample_bounds, volume_from_array


def random_volume(rng, frames, height, width, bit_depth=8, signed=False):
    lo, hi = sample_bounds(bit_depth, signed)
    data = rng.integers(lo, hi + 1, size=(frames, height, width))
    return volume_from_array(data, bit_depth, signed)


def bounded_random_field(rng, height, width, bs, sr):
    """Vectors drawn uniformly from the in-bounds window of every block."""
    nby, nbx = motion.grid_shape(height, width, bs)
    vec = np.zeros((nby, nbx, 2), dtype=np.int64)
    for by in range(nby):
        for bx in range(nbx):
            y0, x0 = by * bs, bx * bs
            y1, x1 = min(y0 + bs, height), min(x0 + bs, width)
            vec[by, bx, 0] = rng.integers(max(-sr, -y0),
                                          min(sr, height - y1) + 1)
            vec[by, bx, 1] = rng.integers(max(-sr, -x0),
                                          min(sr, width - x1) + 1)
    return motion.MotionField(bs, sr, vec)


def slow_boundary_positions(extent, block_size, level):
    spacing = block_size // (2 ** level)
    out = []
    k = 1
    while k * spacing - 1 < extent:
        out.append(k * spacing - 1)
        k += 1
    return out


def slow_quotient(coeffs, orientation, block_size, level):
    """Boundary-vs-neighbour absolute-sum quotient, re-derived with plain
    loops. Deliberately shares no code with the library."""
    h, w = coeffs.shape
    a = [[abs(int(coeffs[y, x])) for x in range(w)] for y in range(h)]

    def colsum(x):
        return sum(a[y][x] for y in range(h))

    def rowsum(y):
        return sum(a[y][x] for x in range(w))

    if orientation == "HL":
        cols = slow_boundary_positions(w, block_size, level)
        s_b = sum(colsum(c) for c in cols)
        s_n = sum(colsum(c + step) for c in cols for step in (-1, 1)
                  if 0 <= c + step < w)
        return s_n / (2.0 * s_b) if s_b else math.inf
    if orientation == "LH":
        rows = slow_boundary_positions(h, block_size, level)
        s_b = sum(rowsum(r) for r in rows)
        s_n = sum(rowsum(r + step) for r in rows for step in (-1, 1)
                  if 0 <= r + step < h)
        return s_n / (2.0 * s_b) if s_b else math.inf
    if orientation == "HH":
        rows = slow_boundary_positions(h, block_size, level)
        cols = slow_boundary_positions(w, block_size, level)
        s_b = sum(a[r][c] for r in rows for c in cols)
        s_n = sum(a[r + dy][c + dx]
                  for r in rows for c in cols
                  for dy in (-1, 1) for dx in (-1, 1)
                  if 0 <= r + dy < h and 0 <= c + dx < w)
        return s_n / (4.0 * s_b) if s_b else math.inf
    raise ValueError(orientation)
