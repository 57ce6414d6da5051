"""Full-search block matching: exact-match recovery, tie-breaking,
compensation semantics and bounds handling."""

import numpy as np
import pytest

from helpers import bounded_random_field

from lc5w import motion


def test_grid_shape_rounds_up():
    assert motion.grid_shape(33, 64, 16) == (3, 4)
    assert motion.grid_shape(1, 1, 2) == (1, 1)
    assert motion.grid_shape(16, 16, 16) == (1, 1)


def test_field_rejects_out_of_range_vectors():
    vec = np.zeros((1, 1, 2), dtype=np.int64)
    vec[0, 0] = (5, 0)
    with pytest.raises(ValueError):
        motion.MotionField(8, 4, vec)


def test_estimate_finds_every_synthesizable_field():
    # build the current frame by compensating a known field, then demand the
    # search reproduces it exactly: a zero-SAD match exists, full search must
    # find one, and any zero-SAD vector predicts the block perfectly
    rng = np.random.default_rng(11)
    for trial in range(10):
        h, w, bs, sr = 24, 40, 8, 3
        ref = rng.integers(0, 256, (h, w)).astype(np.int64)
        truth = bounded_random_field(rng, h, w, bs, sr)
        cur = motion.compensate(ref, truth)
        found = motion.estimate(cur, ref, bs, sr)
        assert np.array_equal(motion.compensate(ref, found), cur)


def test_constant_frames_pick_the_null_vector():
    cur = np.full((16, 16), 9, dtype=np.int64)
    field = motion.estimate(cur, cur, 8, 4)
    assert np.all(field.vectors == 0)  # all SADs tie; shortest vector wins


def test_tie_breaks_prefer_negative_displacement():
    # two perfect matches at dx = -4 and dx = +4: equal SAD and equal
    # |dy|+|dx|, so the lexicographically smaller (dy, dx) must win
    pattern = np.arange(16, dtype=np.int64).reshape(4, 4)
    ref = np.zeros((4, 12), dtype=np.int64)
    ref[:, 0:4] = pattern
    ref[:, 4:8] = 77
    ref[:, 8:12] = pattern
    cur = np.zeros((4, 12), dtype=np.int64)
    cur[:, 4:8] = pattern
    field = motion.estimate(cur, ref, 4, 4)
    assert field.vectors[0, 1].tolist() == [0, -4]


def test_compensate_hand_example():
    frame = np.arange(16, dtype=np.int64).reshape(4, 4)
    vec = np.zeros((2, 2, 2), dtype=np.int64)
    vec[0, 1] = (1, -1)  # block rows 0:2, cols 2:4 reads rows 1:3, cols 1:3
    out = motion.compensate(frame, motion.MotionField(2, 2, vec))
    expected = frame.copy()
    expected[0:2, 2:4] = [[5, 6], [9, 10]]
    assert np.array_equal(out, expected)


def test_compensate_zero_field_is_identity():
    rng = np.random.default_rng(3)
    frame = rng.integers(-100, 100, (9, 5))
    field = motion.zero_field(9, 5, 4, 2)
    assert np.array_equal(motion.compensate(frame, field), frame)
    assert np.array_equal(motion.compensate_inverse(frame, field), frame)


def test_compensate_rejects_out_of_frame_reads():
    vec = np.zeros((1, 1, 2), dtype=np.int64)
    vec[0, 0] = (0, 2)
    field = motion.MotionField(4, 2, vec)
    with pytest.raises(ValueError, match="outside the frame"):
        motion.compensate(np.zeros((4, 4), dtype=np.int64), field)


def test_compensate_inverse_clamps_reads():
    frame = np.array([[1, 2], [3, 4]], dtype=np.int64)
    vec = np.zeros((1, 1, 2), dtype=np.int64)
    vec[0, 0] = (-1, 0)  # inverse shifts the other way and clamps at row 1
    out = motion.compensate_inverse(frame, motion.MotionField(2, 1, vec))
    assert out.tolist() == [[3, 4], [3, 4]]


def test_compensate_inverse_total_for_any_vector():
    rng = np.random.default_rng(4)
    frame = rng.integers(-50, 50, (10, 7))
    for _ in range(25):
        nby, nbx = motion.grid_shape(10, 7, 4)
        vec = rng.integers(-3, 4, (nby, nbx, 2))
        out = motion.compensate_inverse(frame, motion.MotionField(4, 3, vec))
        assert out.shape == frame.shape  # clamping makes every vector legal


def test_estimate_validates_geometry():
    frame = np.zeros((8, 8), dtype=np.int64)
    with pytest.raises(ValueError, match="exceeds frame"):
        motion.estimate(frame, frame, 16, 2)
    with pytest.raises(ValueError):
        motion.estimate(frame, frame, 8, -1)


def test_estimate_is_deterministic():
    rng = np.random.default_rng(5)
    cur = rng.integers(0, 256, (32, 24))
    ref = rng.integers(0, 256, (32, 24))
    a = motion.estimate(cur, ref, 8, 4)
    b = motion.estimate(cur, ref, 8, 4)
    assert np.array_equal(a.vectors, b.vectors)
