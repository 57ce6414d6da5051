"""Block motion estimation and (inverse) compensation.

Frames are tiled into block_size squares anchored at the top-left; edge
blocks are truncated, never padded. A vector (dy, dx) moves a block's read
window inside the reference frame, and candidates that would read outside
the reference are excluded from the search, so (0, 0) is always available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit

DEFAULT_BLOCK_SIZE = 16
DEFAULT_SEARCH_RANGE = 15


def grid_shape(height: int, width: int, block_size: int) -> tuple[int, int]:
    return -(-height // block_size), -(-width // block_size)


@dataclass
class MotionField:
    """Per-block displacement grid for one frame pair.

    vectors has shape (blocks_y, blocks_x, 2) holding (dy, dx) per block.
    """

    block_size: int
    search_range: int
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.int64)
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.search_range < 0:
            raise ValueError("search_range must be >= 0")
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 2:
            raise ValueError("vectors must have shape (blocks_y, blocks_x, 2)")
        if np.abs(self.vectors).max(initial=0) > self.search_range:
            raise ValueError("vector exceeds search range")

    @property
    def blocks_y(self) -> int:
        return self.vectors.shape[0]

    @property
    def blocks_x(self) -> int:
        return self.vectors.shape[1]


def zero_field(height: int, width: int, block_size: int, search_range: int) -> MotionField:
    nby, nbx = grid_shape(height, width, block_size)
    return MotionField(block_size, search_range, np.zeros((nby, nbx, 2), np.int64))


@njit(cache=True, nogil=True)
def _search_blocks(cur, ref, bs, r, dys, dxs):
    h, w = cur.shape
    for by in range(dys.shape[0]):
        y0 = by * bs
        y1 = min(y0 + bs, h)
        for bx in range(dys.shape[1]):
            x0 = bx * bs
            x1 = min(x0 + bs, w)
            best_sad = np.int64(-1)
            best_cost = np.int64(0)
            best_dy = np.int64(0)
            best_dx = np.int64(0)
            for dy in range(-r, r + 1):
                if y0 + dy < 0 or y1 + dy > h:
                    continue
                for dx in range(-r, r + 1):
                    if x0 + dx < 0 or x1 + dx > w:
                        continue
                    sad = np.int64(0)
                    for y in range(y0, y1):
                        if sad > best_sad and best_sad >= 0:
                            break
                        for x in range(x0, x1):
                            diff = cur[y, x] - ref[y + dy, x + dx]
                            sad += diff if diff >= 0 else -diff
                    if sad > best_sad and best_sad >= 0:
                        continue
                    cost = abs(dy) + abs(dx)
                    better = best_sad < 0 or sad < best_sad
                    if not better and sad == best_sad:
                        if cost != best_cost:
                            better = cost < best_cost
                        elif dy != best_dy:
                            better = dy < best_dy
                        else:
                            better = dx < best_dx
                    if better:
                        best_sad = sad
                        best_cost = cost
                        best_dy = np.int64(dy)
                        best_dx = np.int64(dx)
            dys[by, bx] = best_dy
            dxs[by, bx] = best_dx


def estimate(current: np.ndarray, reference: np.ndarray,
             block_size: int = DEFAULT_BLOCK_SIZE,
             search_range: int = DEFAULT_SEARCH_RANGE) -> MotionField:
    """Exhaustive SAD search over all in-bounds candidates.

    Ties break deterministically: smallest SAD, then smallest |dy|+|dx|,
    then smallest dy, then smallest dx.
    """
    current = np.ascontiguousarray(current, dtype=np.int64)
    reference = np.ascontiguousarray(reference, dtype=np.int64)
    if current.shape != reference.shape:
        raise ValueError("current and reference must share a shape")
    h, w = current.shape
    if block_size > h or block_size > w:
        raise ValueError(f"block size {block_size} exceeds frame {h}x{w}")
    if search_range < 0:
        raise ValueError("search_range must be >= 0")
    nby, nbx = grid_shape(h, w, block_size)
    dys = np.zeros((nby, nbx), np.int64)
    dxs = np.zeros((nby, nbx), np.int64)
    _search_blocks(current, reference, block_size, search_range, dys, dxs)
    return MotionField(block_size, search_range, np.stack([dys, dxs], axis=-1))


def compensate(reference: np.ndarray, field: MotionField) -> np.ndarray:
    """Build the motion-compensated prediction of the current frame.

    Every block must read fully inside the reference; a displaced window
    that leaves the frame is an error rather than a silent wrap.
    """
    reference = np.asarray(reference, dtype=np.int64)
    h, w = reference.shape
    bs = field.block_size
    if (field.blocks_y, field.blocks_x) != grid_shape(h, w, bs):
        raise ValueError("motion grid does not match frame geometry")
    out = np.empty_like(reference)
    for by in range(field.blocks_y):
        y0, y1 = by * bs, min(by * bs + bs, h)
        for bx in range(field.blocks_x):
            x0, x1 = bx * bs, min(bx * bs + bs, w)
            dy, dx = field.vectors[by, bx]
            if y0 + dy < 0 or y1 + dy > h or x0 + dx < 0 or x1 + dx > w:
                raise ValueError(f"vector ({dy}, {dx}) reads outside the frame")
            out[y0:y1, x0:x1] = reference[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return out


def compensate_inverse(frame: np.ndarray, field: MotionField) -> np.ndarray:
    """Scatter a frame back along negated vectors (clamped at borders).

    This is the alignment used when a differential frame must be carried
    to its neighbour's coordinate system. Reads are clamped, never
    rejected, so the result is defined for every field; it is the exact
    inverse of compensate only where blocks do not overlap after motion.
    """
    frame = np.asarray(frame, dtype=np.int64)
    h, w = frame.shape
    bs = field.block_size
    if (field.blocks_y, field.blocks_x) != grid_shape(h, w, bs):
        raise ValueError("motion grid does not match frame geometry")
    out = np.empty_like(frame)
    for by in range(field.blocks_y):
        y0, y1 = by * bs, min(by * bs + bs, h)
        for bx in range(field.blocks_x):
            x0, x1 = bx * bs, min(bx * bs + bs, w)
            dy, dx = field.vectors[by, bx]
            ys = np.clip(np.arange(y0, y1) - dy, 0, h - 1)
            xs = np.clip(np.arange(x0, x1) - dx, 0, w - 1)
            out[y0:y1, x0:x1] = frame[np.ix_(ys, xs)]
    return out
