"""Motion-compensated temporal lifting.

One stage maps frames F_0..F_{T-1} onto ceil(T/2) differential frames (from
the even positions) and floor(T/2) smoothed frames (from the odd positions):

    H_t = F_{2t}   - floor((P(F_{2t-1}) + P(F_{2t+1})) / 2)
    L_t = F_{2t+1} + floor((A(H_t) + A(H_{t+1}) + 2) / 4)

where P motion-compensates a neighbour into the even frame's coordinates
and A carries a differential frame back along negated vectors. A missing
neighbour is mirrored (the remaining one stands in for both), so a single
frame passes through as its own differential. Because both steps only add
deterministic functions of already-decodable data, the stage inverts
exactly for any motion field, block size and frame count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import motion


@dataclass
class TemporalStage:
    """Result of one lifting stage.

    fields_prev[t] / fields_next[t] carry the differential frame t's motion
    toward its left / right neighbour; sides that do not exist are None.
    """

    hp: list
    lp: list
    fields_prev: list
    fields_next: list
    update_applied: bool = True


@dataclass
class TemporalDecomposition:
    """Cascade of stages; stage k+1 transforms the smoothed frames of k."""

    stages: list

    @property
    def levels(self) -> int:
        return len(self.stages)


def effective_levels(frame_count: int, requested: int) -> int:
    """Stages actually performed: recursion stops when < 2 frames remain."""
    if frame_count < 1 or requested < 1:
        raise ValueError("frame_count and requested levels must be >= 1")
    levels = 1
    remaining = frame_count // 2
    while levels < requested and remaining >= 2:
        levels += 1
        remaining //= 2
    return levels


def _predict(prev_frame, next_frame, field_prev, field_next):
    p_prev = motion.compensate(prev_frame, field_prev) if prev_frame is not None else None
    p_next = motion.compensate(next_frame, field_next) if next_frame is not None else None
    if p_prev is None and p_next is None:
        return None
    if p_prev is None:
        return p_next
    if p_next is None:
        return p_prev
    return (p_prev + p_next) >> 1


def forward_stage(frames, block_size=motion.DEFAULT_BLOCK_SIZE,
                  search_range=motion.DEFAULT_SEARCH_RANGE,
                  update=True, search=True) -> TemporalStage:
    """Lift one frame sequence; `search=False` forces all-zero motion."""
    t_count = len(frames)
    if t_count < 1:
        raise ValueError("need at least one frame")
    frames = [np.asarray(f, dtype=np.int64) for f in frames]
    h, w = frames[0].shape

    def field_for(cur, ref):
        if search:
            return motion.estimate(cur, ref, block_size, search_range)
        return motion.zero_field(h, w, block_size, search_range)

    hp, fields_prev, fields_next = [], [], []
    for t in range(0, t_count, 2):
        prev_f = frames[t - 1] if t - 1 >= 0 else None
        next_f = frames[t + 1] if t + 1 < t_count else None
        f_prev = field_for(frames[t], prev_f) if prev_f is not None else None
        f_next = field_for(frames[t], next_f) if next_f is not None else None
        pred = _predict(prev_f, next_f, f_prev, f_next)
        hp.append(frames[t].copy() if pred is None else frames[t] - pred)
        fields_prev.append(f_prev)
        fields_next.append(f_next)

    lp = []
    for k, t in enumerate(range(1, t_count, 2)):
        if not update:
            lp.append(frames[t].copy())
            continue
        a_left = motion.compensate_inverse(hp[k], fields_next[k])
        if k + 1 < len(hp) and fields_prev[k + 1] is not None:
            a_right = motion.compensate_inverse(hp[k + 1], fields_prev[k + 1])
        else:
            a_right = a_left
        lp.append(frames[t] + ((a_left + a_right + 2) >> 2))
    return TemporalStage(hp, lp, fields_prev, fields_next, update)


def inverse_stage(stage: TemporalStage, lp=None) -> list:
    """Reconstruct the frames a stage was built from (bit-exact)."""
    if lp is None:
        lp = stage.lp
    hp = stage.hp
    if len(lp) not in (len(hp), len(hp) - 1):
        raise ValueError("inconsistent differential/smoothed frame counts")

    odd = []
    for k, smooth in enumerate(lp):
        if not stage.update_applied:
            odd.append(smooth.copy())
            continue
        a_left = motion.compensate_inverse(hp[k], stage.fields_next[k])
        if k + 1 < len(hp) and stage.fields_prev[k + 1] is not None:
            a_right = motion.compensate_inverse(hp[k + 1], stage.fields_prev[k + 1])
        else:
            a_right = a_left
        odd.append(smooth - ((a_left + a_right + 2) >> 2))

    frames = []
    for k, diff in enumerate(hp):
        prev_f = odd[k - 1] if k - 1 >= 0 else None
        next_f = odd[k] if k < len(odd) else None
        pred = _predict(prev_f, next_f, stage.fields_prev[k], stage.fields_next[k])
        frames.append(diff.copy() if pred is None else diff + pred)
        if k < len(odd):
            frames.append(odd[k])
    return frames


def forward(frames, levels, block_size=motion.DEFAULT_BLOCK_SIZE,
            search_range=motion.DEFAULT_SEARCH_RANGE,
            update=True, search=True) -> TemporalDecomposition:
    """Cascade forward_stage `effective_levels` times."""
    eff = effective_levels(len(frames), levels)
    stages = []
    current = list(frames)
    for _ in range(eff):
        stage = forward_stage(current, block_size, search_range, update, search)
        stages.append(stage)
        current = stage.lp
    return TemporalDecomposition(stages)


def inverse(decomp: TemporalDecomposition) -> list:
    """Invert a cascade; uses the last stage's stored smoothed frames."""
    frames = decomp.stages[-1].lp
    for stage in reversed(decomp.stages):
        frames = inverse_stage(stage, frames)
    return frames
