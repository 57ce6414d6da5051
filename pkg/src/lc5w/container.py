"""Self-contained byte container tying the pipeline together.

Layout (all little-endian):

    header (43 bytes):
        magic "LC5W", version u8,
        width u32, height u32, frame_count u32,
        bit_depth u8, signed u8, block_size u8, search_range u8,
        temporal_levels u8, spatial_levels u8, code_block u8, mode u8,
        9 x u16 decision thresholds (value * 1000, level-major HL/LH/HH)

    then one record per differential frame, stage by stage:
        2 motion fields (toward previous / next neighbour), each
            blocks_y * blocks_x * 2 signed bytes; a side that does not
            exist structurally is stored as zeros and ignored on decode
        signaling (only when mode != none): 1 byte (bit0 = any band
            re-sorted); if set, ceil(candidates/8) bytes of per-band
            flags, LSB first, level-major
        subbands, coarse to fine (LL, then HL/LH/HH per level), each as
            raster code blocks

    then the residual smoothed frames, subbands only.

Geometry never travels in the records; every shape derives from the
header, so a decoder knows exactly how many bytes each piece owns and any
mismatch surfaces as a CorruptStreamError.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import motion, resort, spatial, temporal, tier1
from .errors import CorruptStreamError, FormatError
from .volume_io import Volume, _read_pgm, _write_pgm, sample_bounds, volume_from_array

MAGIC = b"LC5W"
VERSION = 1
MODES = ("none", "lc", "opt")

_HEADER = struct.Struct("<4sB3I8B9H")
HEADER_SIZE = _HEADER.size
_THRESHOLD_KEYS = [(o, lvl) for lvl in (1, 2, 3) for o in spatial.ORIENTATIONS]
_EXPORT_OFFSET = 32768


@dataclass
class CodecConfig:
    block_size: int = motion.DEFAULT_BLOCK_SIZE
    search_range: int = motion.DEFAULT_SEARCH_RANGE
    spatial_levels: int = 7
    temporal_levels: int = 1
    code_block: int = tier1.DEFAULT_CODE_BLOCK
    mode: str = "none"
    thresholds: dict | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.block_size < 2 or self.block_size & (self.block_size - 1):
            raise ValueError("block_size must be a power of two >= 2")
        if not 0 <= self.search_range <= 127:
            raise ValueError("search_range must be in 0..127")
        if self.spatial_levels < 1 or self.temporal_levels < 1:
            raise ValueError("decomposition levels must be >= 1")
        if self.code_block not in (4, 8, 16, 32, 64):
            raise ValueError("code_block must be a power of two in 4..64")
        merged = dict(resort.DEFAULT_THRESHOLDS)
        if self.thresholds:
            merged.update(self.thresholds)
        for key, value in merged.items():
            q = round(value * 1000)
            if not 1 <= q <= 0xFFFF:
                raise ValueError(f"threshold {key} = {value} not representable")
            merged[key] = q / 1000.0
        self.thresholds = merged

    def effective(self, height: int, width: int, frames: int):
        """Clamp the requested parameters to a concrete geometry.

        Returns (block_size, search_enabled, spatial_levels,
        temporal_levels). Frames too small to tile get the minimum block
        grid with motion search disabled (all-zero vectors still lift
        losslessly, so nothing else changes).
        """
        m = min(height, width)
        if m >= 2:
            bs = min(self.block_size, 1 << (m.bit_length() - 1))
            search = True
        else:
            bs, search = 2, False
        d = min(self.spatial_levels, spatial.max_levels(height, width))
        lt = temporal.effective_levels(frames, self.temporal_levels)
        return bs, search, d, lt


@dataclass
class HPFrameStats:
    """Coding breakdown of one differential frame."""

    stage: int
    slot: int
    band_bytes: dict
    decisions: dict
    quotients: dict
    signaling_bytes: int
    motion_bytes: int

    @property
    def payload_bytes(self) -> int:
        return sum(self.band_bytes.values())


@dataclass
class EncodeStats:
    mode: str
    block_size: int
    search_range: int
    spatial_levels: int
    temporal_levels: int
    code_block: int
    hp_frames: list = field(default_factory=list)
    lp_band_bytes: list = field(default_factory=list)
    total_bytes: int = 0
    header_bytes: int = HEADER_SIZE

    @property
    def hp_payload_total(self) -> int:
        return sum(f.payload_bytes for f in self.hp_frames)

    @property
    def signaling_total(self) -> int:
        return sum(f.signaling_bytes for f in self.hp_frames)

    @property
    def motion_total(self) -> int:
        return sum(f.motion_bytes for f in self.hp_frames)

    @property
    def lp_payload_total(self) -> int:
        return sum(sum(b.values()) for b in self.lp_band_bytes)


def _pack_header(vol: Volume, cfg: CodecConfig, bs, d, lt) -> bytes:
    thr = [round(cfg.thresholds[k] * 1000) for k in _THRESHOLD_KEYS]
    return _HEADER.pack(
        MAGIC, VERSION, vol.width, vol.height, len(vol),
        vol.bit_depth, int(vol.signed), bs, cfg.search_range,
        lt, d, cfg.code_block, MODES.index(cfg.mode), *thr,
    )


def _pack_field(mf) -> bytes:
    return np.ascontiguousarray(mf.vectors, dtype=np.int8).tobytes()


def _unpack_field(data, offset, height, width, bs, sr):
    nby, nbx = motion.grid_shape(height, width, bs)
    n = nby * nbx * 2
    if offset + n > len(data):
        raise CorruptStreamError("truncated motion data")
    vec = np.frombuffer(data, np.int8, n, offset).reshape(nby, nbx, 2)
    try:
        mf = motion.MotionField(bs, sr, vec.astype(np.int64))
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from exc
    return mf, offset + n


def _decide_bands(pyr, bs, cb, mode, thresholds, candidates):
    """Run the configured per-band decision; returns

    (decisions, quotients, coded) where coded caches the chosen payload
    for bands the opt mode already had to encode.
    """
    decisions, quotients, coded = {}, {}, {}
    for key in candidates:
        orientation, level = key
        band = pyr.bands[key].coeffs
        q = resort.lc_statistic(band, orientation, bs, level)
        quotients[key] = q
        if mode == "none":
            decisions[key] = False
        elif mode == "lc":
            decisions[key] = q < resort.threshold_for(orientation, level, thresholds)
        else:
            enc_plain = tier1.encode_subband(band, cb)
            enc_sorted = tier1.encode_subband(
                resort.resort_band(band, orientation, bs, level), cb)
            decisions[key] = len(enc_sorted) < len(enc_plain)
            coded[key] = enc_sorted if decisions[key] else enc_plain
    return decisions, quotients, coded


def _pack_signaling(mode, candidates, decisions) -> bytes:
    if mode == "none":
        return b""
    if not any(decisions.values()):
        return b"\x00"
    flags = bytearray(1 + (len(candidates) + 7) // 8)
    flags[0] = 1
    for i, key in enumerate(candidates):
        if decisions[key]:
            flags[1 + (i >> 3)] |= 1 << (i & 7)
    return bytes(flags)


def _unpack_signaling(data, offset, mode, candidates):
    if mode == "none":
        return {key: False for key in candidates}, offset
    if offset + 1 > len(data):
        raise CorruptStreamError("truncated signaling byte")
    lead = data[offset]
    offset += 1
    if lead not in (0, 1):
        raise CorruptStreamError(f"invalid signaling byte {lead:#x}")
    if lead == 0:
        return {key: False for key in candidates}, offset
    n = (len(candidates) + 7) // 8
    if offset + n > len(data):
        raise CorruptStreamError("truncated signaling flags")
    decisions = {}
    for i, key in enumerate(candidates):
        decisions[key] = bool(data[offset + (i >> 3)] >> (i & 7) & 1)
    offset += n
    return decisions, offset


def encode_with_stats(vol: Volume, cfg: CodecConfig | None = None):
    """Encode a volume; returns (container bytes, EncodeStats)."""
    cfg = cfg or CodecConfig()
    bs, search, d, lt = cfg.effective(vol.height, vol.width, len(vol))
    candidates = resort.candidate_keys(bs, d)
    stats = EncodeStats(cfg.mode, bs, cfg.search_range, d, lt, cfg.code_block)

    frames = [f.samples for f in vol.frames]
    decomp = temporal.forward(frames, cfg.temporal_levels, bs,
                              cfg.search_range, update=True, search=search)
    assert decomp.levels == lt

    zero = motion.zero_field(vol.height, vol.width, bs, cfg.search_range)
    parts = [_pack_header(vol, cfg, bs, d, lt)]
    for s_idx, stage in enumerate(decomp.stages, start=1):
        for slot, hp in enumerate(stage.hp):
            f_prev = stage.fields_prev[slot] or zero
            f_next = stage.fields_next[slot] or zero
            motion_blob = _pack_field(f_prev) + _pack_field(f_next)
            pyr = spatial.forward_2d(hp, d)
            decisions, quotients, coded = _decide_bands(
                pyr, bs, cfg.code_block, cfg.mode, cfg.thresholds, candidates)
            signaling = _pack_signaling(cfg.mode, candidates, decisions)
            band_bytes = {}
            body = []
            for key in pyr.band_keys():
                if key in coded:
                    blob = coded[key]
                else:
                    band = pyr.bands[key].coeffs
                    if decisions.get(key, False):
                        band = resort.resort_band(band, key[0], bs, key[1])
                    blob = tier1.encode_subband(band, cfg.code_block)
                band_bytes[key] = len(blob)
                body.append(blob)
            parts.append(motion_blob)
            parts.append(signaling)
            parts.extend(body)
            stats.hp_frames.append(HPFrameStats(
                s_idx, slot, band_bytes, decisions, quotients,
                len(signaling), len(motion_blob)))

    for lp in decomp.stages[-1].lp:
        pyr = spatial.forward_2d(lp, d)
        band_bytes = {}
        for key in pyr.band_keys():
            blob = tier1.encode_subband(pyr.bands[key].coeffs, cfg.code_block)
            band_bytes[key] = len(blob)
            parts.append(blob)
        stats.lp_band_bytes.append(band_bytes)

    blob = b"".join(parts)
    stats.total_bytes = len(blob)
    return blob, stats


def encode(vol: Volume, cfg: CodecConfig | None = None) -> bytes:
    return encode_with_stats(vol, cfg)[0]


def _parse_header(data):
    if len(data) < HEADER_SIZE:
        raise CorruptStreamError("container shorter than its header")
    fields = _HEADER.unpack_from(data, 0)
    magic, version = fields[0], fields[1]
    if magic != MAGIC:
        raise CorruptStreamError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptStreamError(f"unsupported version {version}")
    width, height, frame_count = fields[2], fields[3], fields[4]
    bit_depth, signed, bs, sr, lt, d, cb, mode_idx = fields[5:13]
    thr_raw = fields[13:]
    if width < 1 or height < 1 or frame_count < 1:
        raise CorruptStreamError("degenerate geometry in header")
    if not 8 <= bit_depth <= 16 or signed not in (0, 1):
        raise CorruptStreamError("invalid sample description")
    if bs < 2 or bs & (bs - 1):
        raise CorruptStreamError(f"invalid block size {bs}")
    if sr > 127:
        raise CorruptStreamError(f"invalid search range {sr}")
    if cb not in (4, 8, 16, 32, 64):
        raise CorruptStreamError(f"invalid code block size {cb}")
    if mode_idx >= len(MODES):
        raise CorruptStreamError(f"invalid mode {mode_idx}")
    if d < 1 or lt < 1 or lt != temporal.effective_levels(frame_count, lt):
        raise CorruptStreamError("inconsistent decomposition levels")
    thresholds = {k: thr_raw[i] / 1000.0 for i, k in enumerate(_THRESHOLD_KEYS)}
    if any(v <= 0 for v in thresholds.values()):
        raise CorruptStreamError("invalid threshold table")
    return (width, height, frame_count, bit_depth, bool(signed), bs, sr,
            lt, d, cb, MODES[mode_idx], thresholds)


def _read_pyramid(data, offset, height, width, d, cb, decisions, bs):
    bands = {}
    keys = [("LL", d)] + [(o, lvl) for lvl in range(d, 0, -1)
                          for o in spatial.ORIENTATIONS]
    for key in keys:
        shape = spatial.band_shape(height, width, key[0], key[1])
        coeffs, offset = tier1.decode_subband(data, offset, *shape, cb)
        if decisions.get(key, False):
            coeffs = resort.unsort_band(coeffs, key[0], bs, key[1])
        bands[key] = spatial.Subband(key[0], key[1], coeffs)
    return spatial.SubbandPyramid(height, width, d, bands), offset


def decode(data) -> Volume:
    """Reconstruct the exact volume a container was encoded from."""
    (width, height, frame_count, bit_depth, signed, bs, sr, lt, d, cb,
     mode, _thresholds) = _parse_header(data)
    candidates = resort.candidate_keys(bs, d)

    offset = HEADER_SIZE
    t_counts = [frame_count]
    for _ in range(lt - 1):
        t_counts.append(t_counts[-1] // 2)

    stages = []
    for t_frames in t_counts:
        n_hp = (t_frames + 1) // 2
        hp_list, prev_list, next_list = [], [], []
        for t in range(n_hp):
            mf_prev, offset = _unpack_field(data, offset, height, width, bs, sr)
            mf_next, offset = _unpack_field(data, offset, height, width, bs, sr)
            decisions, offset = _unpack_signaling(data, offset, mode, candidates)
            pyr, offset = _read_pyramid(data, offset, height, width, d, cb,
                                        decisions, bs)
            hp_list.append(spatial.inverse_2d(pyr))
            prev_list.append(mf_prev if t > 0 else None)
            next_list.append(mf_next if 2 * t + 1 < t_frames else None)
        stages.append(temporal.TemporalStage(hp_list, [], prev_list, next_list))

    lp_list = []
    for _ in range(t_counts[-1] // 2):
        pyr, offset = _read_pyramid(data, offset, height, width, d, cb, {}, bs)
        lp_list.append(spatial.inverse_2d(pyr))
    stages[-1].lp = lp_list

    if offset != len(data):
        raise CorruptStreamError(f"{len(data) - offset} trailing bytes")

    try:
        frames = temporal.inverse(temporal.TemporalDecomposition(stages))
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from exc
    lo, hi = sample_bounds(bit_depth, signed)
    stacked = np.stack(frames)
    if stacked.min() < lo or stacked.max() > hi:
        raise CorruptStreamError("decoded samples leave the declared range")
    return volume_from_array(stacked, bit_depth, signed)


# ---------------------------------------------------------------------------
# coefficient plane export


def _mosaic(pyr: spatial.SubbandPyramid) -> np.ndarray:
    """Tile a pyramid into one frame-sized plane (LL top-left, dyadic)."""
    canvas = np.zeros((pyr.height, pyr.width), np.int64)
    ll = pyr.bands[("LL", pyr.levels)].coeffs
    canvas[: ll.shape[0], : ll.shape[1]] = ll
    for lvl in range(pyr.levels, 0, -1):
        low_h, low_w = spatial.band_shape(pyr.height, pyr.width, "LL", lvl)
        hl = pyr.bands[("HL", lvl)].coeffs
        lh = pyr.bands[("LH", lvl)].coeffs
        hh = pyr.bands[("HH", lvl)].coeffs
        canvas[:low_h, low_w : low_w + hl.shape[1]] = hl
        canvas[low_h : low_h + lh.shape[0], :low_w] = lh
        canvas[low_h : low_h + hh.shape[0], low_w : low_w + hh.shape[1]] = hh
    return canvas


def export_planes(vol: Volume, cfg: CodecConfig | None, out_dir) -> list:
    """Write each differential frame's coefficient plane as 16-bit PGMs.

    Per frame i: hpNNNN_unsorted.pgm (plain layout), hpNNNN_sorted.pgm
    (after the configured re-sorting decisions) and hpNNNN.txt describing
    geometry and the per-band outcome. Values are stored offset by 32768;
    coefficients outside +/-32767 are unrepresentable and raise.
    """
    cfg = cfg or CodecConfig()
    bs, search, d, lt = cfg.effective(vol.height, vol.width, len(vol))
    candidates = resort.candidate_keys(bs, d)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    frames = [f.samples for f in vol.frames]
    decomp = temporal.forward(frames, cfg.temporal_levels, bs,
                              cfg.search_range, update=True, search=search)
    written = []
    index = 0
    for stage in decomp.stages:
        for hp in stage.hp:
            pyr = spatial.forward_2d(hp, d)
            decisions, quotients, _ = _decide_bands(
                pyr, bs, cfg.code_block, cfg.mode, cfg.thresholds, candidates)
            sorted_bands = {}
            for key, band in pyr.bands.items():
                coeffs = band.coeffs
                if decisions.get(key, False):
                    coeffs = resort.resort_band(coeffs, key[0], bs, key[1])
                sorted_bands[key] = spatial.Subband(key[0], key[1], coeffs)
            sorted_pyr = spatial.SubbandPyramid(pyr.height, pyr.width, d,
                                                sorted_bands)
            for tag, p in (("unsorted", pyr), ("sorted", sorted_pyr)):
                plane = _mosaic(p)
                if plane.min() < -_EXPORT_OFFSET or plane.max() >= _EXPORT_OFFSET:
                    raise FormatError(
                        "coefficient outside the exportable 16-bit window")
                path = out_dir / f"hp{index:04d}_{tag}.pgm"
                _write_pgm(path, plane + _EXPORT_OFFSET, 65535)
                written.append(path)
            lines = [
                f"width {vol.width}", f"height {vol.height}",
                f"levels {d}", f"block_size {bs}", f"mode {cfg.mode}",
            ]
            for key in candidates:
                lines.append(
                    f"{key[0]} {key[1]} resorted {int(decisions[key])} "
                    f"q {quotients[key]:.6f}")
            meta = out_dir / f"hp{index:04d}.txt"
            meta.write_text("\n".join(lines) + "\n")
            written.append(meta)
            index += 1
    return written


def load_exported_frame(path) -> np.ndarray:
    """Read back a plane written by export_planes (offset removed)."""
    data, maxval = _read_pgm(Path(path))
    if maxval != 65535:
        raise FormatError(f"{path}: expected a 16-bit plane export")
    return data - _EXPORT_OFFSET
