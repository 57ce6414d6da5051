"""Boundary-coefficient re-sorting for block-compensated residuals.

Block compensation leaves step discontinuities along block edges. A step
between samples m-1 and m (m even) produces exactly one nonzero 5/3 detail
coefficient, at index m/2 - 1; after `level` splits the block grid of pitch
B therefore shows up in a detail band as the index set {k * B/2^level - 1}.
Gathering those rows/columns into a contiguous leading group ("re-sorting")
turns scattered spikes into compact structure that a context coder exploits.

Whether gathering actually helps is decided per band either by a cheap
statistic (LC: compare energy next to the boundary set against energy on
it) or by coding both layouts and keeping the smaller (OPT).
"""

from __future__ import annotations

import math

import numpy as np

from .spatial import ORIENTATIONS

# Q thresholds per (orientation, level); a band is re-sorted when its
# boundary-contrast quotient falls below the threshold.
DEFAULT_THRESHOLDS = {
    ("HL", 1): 0.5, ("HL", 2): 0.6, ("HL", 3): 0.6,
    ("LH", 1): 0.5, ("LH", 2): 0.6, ("LH", 3): 0.6,
    ("HH", 1): 0.3, ("HH", 2): 0.3, ("HH", 3): 0.6,
}


def max_resort_depth(block_size: int) -> int:
    """Deepest level whose boundary set is still distinct (log2(B) - 1)."""
    if block_size < 2 or block_size & (block_size - 1):
        raise ValueError("block_size must be a power of two >= 2")
    return block_size.bit_length() - 2


def candidate_keys(block_size: int, spatial_levels: int) -> list:
    """(orientation, level) pairs eligible for re-sorting, level-major."""
    depth = min(max_resort_depth(block_size), spatial_levels)
    return [(o, lvl) for lvl in range(1, depth + 1) for o in ORIENTATIONS]


def boundary_indices(extent: int, block_size: int, level: int) -> np.ndarray:
    """Detail-band indices hit by block edges of pitch block_size.

    At decomposition `level` the edges land every block_size/2^level
    samples, one position before the multiple.
    """
    if level < 1 or level > max_resort_depth(block_size):
        raise ValueError(f"level {level} outside 1..{max_resort_depth(block_size)}")
    spacing = block_size >> level
    return np.arange(spacing - 1, extent, spacing, dtype=np.int64)


def partition_permutation(extent: int, indices: np.ndarray) -> np.ndarray:
    """Stable permutation listing `indices` first, the rest in order."""
    mask = np.zeros(extent, dtype=bool)
    mask[indices] = True
    return np.concatenate([np.flatnonzero(mask), np.flatnonzero(~mask)])


def _axes_for(orientation: str) -> tuple:
    # HL holds column detail, LH row detail, HH both
    if orientation == "HL":
        return (1,)
    if orientation == "LH":
        return (0,)
    if orientation == "HH":
        return (0, 1)
    raise ValueError(f"band {orientation!r} is not re-sortable")


def resort_band(coeffs: np.ndarray, orientation: str, block_size: int,
                level: int) -> np.ndarray:
    """Gather boundary rows/columns to the front of the band."""
    out = np.asarray(coeffs, dtype=np.int64)
    for axis in _axes_for(orientation):
        idx = boundary_indices(out.shape[axis], block_size, level)
        perm = partition_permutation(out.shape[axis], idx)
        out = np.take(out, perm, axis=axis)
    return out


def unsort_band(coeffs: np.ndarray, orientation: str, block_size: int,
                level: int) -> np.ndarray:
    """Exact inverse of resort_band."""
    out = np.asarray(coeffs, dtype=np.int64)
    for axis in _axes_for(orientation):
        idx = boundary_indices(out.shape[axis], block_size, level)
        perm = partition_permutation(out.shape[axis], idx)
        out = np.take(out, np.argsort(perm, kind="stable"), axis=axis)
    return out


def lc_statistic(coeffs: np.ndarray, orientation: str, block_size: int,
                 level: int) -> float:
    """Boundary-contrast quotient Q.

    Q compares the magnitude mass adjacent to the boundary set against the
    mass sitting on it (scaled by the neighbour count, duplicates included,
    out-of-range neighbours skipped). Small Q means the band's energy is
    concentrated on block edges, which is when gathering pays off. An empty
    boundary mass gives Q = +inf (never re-sort).
    """
    c = np.abs(np.asarray(coeffs, dtype=np.int64))
    if orientation in ("HL", "LH"):
        axis = _axes_for(orientation)[0]
        extent = c.shape[axis]
        idx = boundary_indices(extent, block_size, level)
        line = c.sum(axis=1 - axis)  # magnitude mass per row/column
        s_b = int(line[idx].sum())
        if s_b == 0:
            return math.inf
        s_n = 0
        for i in idx:
            if i - 1 >= 0:
                s_n += int(line[i - 1])
            if i + 1 < extent:
                s_n += int(line[i + 1])
        return s_n / (2.0 * s_b)
    if orientation != "HH":
        raise ValueError(f"band {orientation!r} is not re-sortable")
    rows = boundary_indices(c.shape[0], block_size, level)
    cols = boundary_indices(c.shape[1], block_size, level)
    if rows.size == 0 or cols.size == 0:
        return math.inf
    s_b = int(c[np.ix_(rows, cols)].sum())
    if s_b == 0:
        return math.inf
    s_n = 0
    for r in rows:
        for cc in cols:
            for dr, dc in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
                rr, c2 = r + dr, cc + dc
                if 0 <= rr < c.shape[0] and 0 <= c2 < c.shape[1]:
                    s_n += int(c[rr, c2])
    return s_n / (4.0 * s_b)


def threshold_for(orientation: str, level: int, thresholds=None) -> float:
    """Look up a decision threshold; levels past the table reuse its last."""
    if thresholds is None:
        thresholds = DEFAULT_THRESHOLDS
    if level < 1:
        raise ValueError("level must be >= 1")
    lvl = level
    while lvl > 1 and (orientation, lvl) not in thresholds:
        lvl -= 1
    try:
        return thresholds[(orientation, lvl)]
    except KeyError:
        raise ValueError(f"no threshold for band {orientation!r}") from None


def decide_lc(coeffs: np.ndarray, orientation: str, block_size: int,
              level: int, thresholds=None) -> bool:
    """Re-sort iff the quotient falls below the configured threshold."""
    q = lc_statistic(coeffs, orientation, block_size, level)
    return q < threshold_for(orientation, level, thresholds)


def decide_opt(coeffs: np.ndarray, orientation: str, block_size: int,
               level: int, rate_fn) -> bool:
    """Re-sort iff the coded size strictly improves (ties keep original)."""
    original = rate_fn(coeffs)
    resorted = rate_fn(resort_band(coeffs, orientation, block_size, level))
    return resorted < original
