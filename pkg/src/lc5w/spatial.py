"""Reversible spatial 5/3 wavelet (integer lifting, dyadic decomposition).

Orientation naming follows the usual convention: HL carries horizontal
detail (column structure), LH carries vertical detail (row structure),
HH carries both. Level 1 is the finest scale.

All arithmetic is exact on int64; forward followed by inverse reproduces
the input bit for bit, for any shape including odd and length-1 axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORIENTATIONS = ("HL", "LH", "HH")


def max_levels(height: int, width: int) -> int:
    """Deepest usable decomposition for a frame geometry (always >= 1)."""
    m = min(height, width)
    return max(1, m.bit_length() - 1)


def lift_forward_1d(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split the last axis into (lowpass, highpass) halves.

    highpass d[n] = x[2n+1] - floor((x[2n] + x[2n+2]) / 2)
    lowpass  s[n] = x[2n]   + floor((d[n-1] + d[n] + 2) / 4)

    with symmetric extension at both borders. Lowpass keeps ceil(N/2)
    samples, highpass floor(N/2).
    """
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[-1]
    even = x[..., 0::2]
    odd = x[..., 1::2]
    n_high = n // 2
    if n_high == 0:
        return even.copy(), odd.copy()
    if n % 2 == 0:
        even_right = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    else:
        even_right = even[..., 1:]
    d = odd - ((even[..., :n_high] + even_right) >> 1)
    if n % 2 == 0:
        d_left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
        d_right = d
    else:
        d_left = np.concatenate([d[..., :1], d], axis=-1)
        d_right = np.concatenate([d, d[..., -1:]], axis=-1)
    s = even + ((d_left + d_right + 2) >> 2)
    return s, d


def lift_inverse_1d(s: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Exact inverse of lift_forward_1d; returns the merged axis."""
    s = np.asarray(s, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    n_low = s.shape[-1]
    n_high = d.shape[-1]
    if n_low - n_high not in (0, 1) or n_low < 1:
        raise ValueError("inconsistent lowpass/highpass lengths")
    n = n_low + n_high
    if n_high == 0:
        return s.copy()
    if n % 2 == 0:
        d_left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
        d_right = d
    else:
        d_left = np.concatenate([d[..., :1], d], axis=-1)
        d_right = np.concatenate([d, d[..., -1:]], axis=-1)
    even = s - ((d_left + d_right + 2) >> 2)
    if n % 2 == 0:
        even_right = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    else:
        even_right = even[..., 1:]
    odd = d + ((even[..., :n_high] + even_right) >> 1)
    out = np.empty(s.shape[:-1] + (n,), dtype=np.int64)
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return out


@dataclass
class Subband:
    orientation: str  # "LL", "HL", "LH" or "HH"
    level: int
    coeffs: np.ndarray


@dataclass
class SubbandPyramid:
    """Dyadic decomposition of one frame.

    ``bands`` maps (orientation, level) to a Subband; the residual lowpass
    lives at ("LL", levels). Detail bands may be zero-sized when an axis
    collapses to a single sample.
    """

    height: int
    width: int
    levels: int
    bands: dict

    def band_keys(self):
        """Coarse-to-fine emission order: LL, then HL/LH/HH per level."""
        keys = [("LL", self.levels)]
        for lvl in range(self.levels, 0, -1):
            keys.extend((o, lvl) for o in ORIENTATIONS)
        return keys


def forward_2d(samples: np.ndarray, levels: int) -> SubbandPyramid:
    """Decompose a 2-D integer grid into `levels` dyadic scales."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2:
        raise ValueError("expected a 2-D sample grid")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    height, width = samples.shape
    bands = {}
    ll = samples
    for lvl in range(1, levels + 1):
        low_x, high_x = lift_forward_1d(ll)
        ll_t, lh_t = lift_forward_1d(low_x.T)
        hl_t, hh_t = lift_forward_1d(high_x.T)
        ll = np.ascontiguousarray(ll_t.T)
        bands[("HL", lvl)] = Subband("HL", lvl, np.ascontiguousarray(hl_t.T))
        bands[("LH", lvl)] = Subband("LH", lvl, np.ascontiguousarray(lh_t.T))
        bands[("HH", lvl)] = Subband("HH", lvl, np.ascontiguousarray(hh_t.T))
    bands[("LL", levels)] = Subband("LL", levels, ll)
    return SubbandPyramid(height, width, levels, bands)


def inverse_2d(pyr: SubbandPyramid) -> np.ndarray:
    """Reassemble the frame a forward_2d pyramid came from."""
    ll = pyr.bands[("LL", pyr.levels)].coeffs
    for lvl in range(pyr.levels, 0, -1):
        hl = pyr.bands[("HL", lvl)].coeffs
        lh = pyr.bands[("LH", lvl)].coeffs
        hh = pyr.bands[("HH", lvl)].coeffs
        low_x = lift_inverse_1d(ll.T, lh.T).T
        high_x = lift_inverse_1d(hl.T, hh.T).T
        ll = lift_inverse_1d(low_x, high_x)
    if ll.shape != (pyr.height, pyr.width):
        raise ValueError("pyramid geometry does not match its bands")
    return ll


def band_shape(height: int, width: int, orientation: str, level: int) -> tuple[int, int]:
    """Shape of one subband of a height x width frame, without transforming."""
    h, w = height, width
    for _ in range(level - 1):
        h = (h + 1) // 2
        w = (w + 1) // 2
    low_h, high_h = (h + 1) // 2, h // 2
    low_w, high_w = (w + 1) // 2, w // 2
    table = {
        "LL": (low_h, low_w),
        "HL": (low_h, high_w),
        "LH": (high_h, low_w),
        "HH": (high_h, high_w),
    }
    if orientation not in table:
        raise ValueError(f"unknown orientation {orientation!r}")
    return table[orientation]
