import itertools

import numpy as np
import pytest

from mdvsim.isa import ControlState, Opcode, apply_config, cfg
from mdvsim.layout import (
    EngineGeometry,
    LaneGeometry,
    cb_mask_vector,
    flatten,
    lane_enable_vector,
    register_capacity,
)

DEFAULT = EngineGeometry()
LANES = LaneGeometry(total_lanes=8192, cb_count=8)


def state_with(lengths, masked_off=()):
    state = ControlState(dim_count=len(lengths),
                         dim_length=list(lengths) + [1] * (4 - len(lengths)))
    for e in masked_off:
        state = apply_config(state, cfg(Opcode.VUNSETMASK, e))
    return state


def test_geometry_defaults():
    assert DEFAULT.total_lanes == 8192
    assert DEFAULT.cb_count == 8
    assert DEFAULT.lanes_per_cb == 1024


def test_geometry_divisibility():
    with pytest.raises(ValueError):
        EngineGeometry(num_arrays=10, arrays_per_cb=4)


def test_flatten_examples():
    assert flatten(state_with([3, 3, 910]), (0, 1, 2)) == 5
    assert flatten(state_with([8192]), (8191,)) == 8191
    # two top-dimension elements of 4096 lanes each
    assert flatten(state_with([4096, 2]), (1, 0)) == 4096


def test_flatten_out_of_range():
    with pytest.raises(ValueError):
        flatten(state_with([3, 3]), (0, 3))


def test_flatten_matches_loop_nest_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(50):
        dims = int(rng.integers(1, 5))
        lengths = []
        budget = 8192
        for d in range(dims):
            lengths.append(int(rng.integers(1, min(budget, 12) + 1)))
            budget //= max(lengths[-1], 1)
        state = state_with(lengths)
        counter = 0
        # loop nest: highest dimension outermost, dimension 0 innermost
        for idx in itertools.product(*(range(n) for n in reversed(lengths))):
            assert flatten(state, idx) == counter
            counter += 1
        assert counter == state.total_elements()


def test_lane_to_cb():
    assert LANES.lane_to_cb(0) == 0
    assert LANES.lane_to_cb(1023) == 0
    assert LANES.lane_to_cb(1024) == 1
    assert LANES.lane_to_cb(8191) == 7
    with pytest.raises(ValueError):
        LANES.lane_to_cb(8192)


def test_cb_mask_all_enabled():
    assert cb_mask_vector(state_with([8192]), LANES) == 0xFF


def test_cb_mask_masked_half():
    state = state_with([4096, 2], masked_off=[0])
    assert cb_mask_vector(state, LANES) == 0xF0


def test_cb_mask_all_off():
    state = state_with([4096, 2], masked_off=[0, 1])
    assert cb_mask_vector(state, LANES) == 0


def test_cb_mask_monotone_under_masking():
    rng = np.random.default_rng(2)
    for _ in range(30):
        top = int(rng.integers(1, 9))
        state = state_with([int(rng.integers(1, 1025)), top])
        mask = cb_mask_vector(state, LANES)
        for e in rng.permutation(top):
            state = apply_config(state, cfg(Opcode.VUNSETMASK, int(e)))
            new_mask = cb_mask_vector(state, LANES)
            assert new_mask & ~mask == 0  # never sets new bits
            mask = new_mask


def test_lane_enable_partial_shape():
    state = state_with([100])
    enable = lane_enable_vector(state, 8192)
    assert enable[:100].all() and not enable[100:].any()


def test_register_capacity():
    assert register_capacity(32) == 8
    assert register_capacity(8) == 32
    assert register_capacity(64) == 4
    assert register_capacity(16) == 16


def test_register_capacity_monotone():
    widths = [8, 16, 32, 64]
    caps = [register_capacity(w) for w in widths]
    assert caps == sorted(caps, reverse=True)
