"""Lane layout: logical multi-index -> flat SIMD lane -> control-block map.

A register spans every compute-capable SRAM array; each array contributes
one lane per (active) bitline and arrays are grouped four-per-control-block.
Dimension 0 is innermost, so logical indices flatten row-major onto lanes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isa import ControlState, MASK_BITS


@dataclass(frozen=True)
class EngineGeometry:
    num_arrays: int = 32
    bitlines_per_array: int = 256
    wordlines_per_array: int = 256
    arrays_per_cb: int = 4

    def __post_init__(self):
        if self.num_arrays % self.arrays_per_cb:
            raise ValueError(
                f"num_arrays ({self.num_arrays}) must be divisible by "
                f"arrays_per_cb ({self.arrays_per_cb})"
            )

    @property
    def total_lanes(self) -> int:
        return self.num_arrays * self.bitlines_per_array

    @property
    def cb_count(self) -> int:
        return self.num_arrays // self.arrays_per_cb

    @property
    def lanes_per_cb(self) -> int:
        return self.arrays_per_cb * self.bitlines_per_array


@dataclass(frozen=True)
class LaneGeometry:
    """Lane space of one scheme/width combination.

    Bit-parallel style schemes trade bitlines for width, so the lane count
    depends on the compute scheme; the control-block structure does not.
    """

    total_lanes: int
    cb_count: int

    @property
    def lanes_per_cb(self) -> int:
        return self.total_lanes // self.cb_count

    def lane_to_cb(self, lane: int) -> int:
        if not 0 <= lane < self.total_lanes:
            raise ValueError(f"lane {lane} out of range [0, {self.total_lanes})")
        return lane // self.lanes_per_cb


def flatten(state: ControlState, idx: tuple[int, ...]) -> int:
    """Flatten a logical index (highest dimension first) to a lane number.

    ``idx`` carries ``dim_count`` coordinates ordered (w, z, y, x); with one
    dimension it is just (x,).
    """
    shape = state.shape
    if len(idx) != len(shape):
        raise ValueError(f"index {idx} does not match shape {shape}")
    lane = 0
    for pos, coord in enumerate(idx):
        d = len(shape) - 1 - pos
        if not 0 <= coord < shape[d]:
            raise ValueError(f"index {coord} out of range for dimension {d} (length {shape[d]})")
        lane = lane * shape[d] + coord
    return lane


def lane_enable_vector(state: ControlState, total_lanes: int) -> np.ndarray:
    """Boolean per-lane enable from shape membership and the dimension mask."""
    enable = np.zeros(total_lanes, dtype=bool)
    n = state.total_elements()
    enable[:n] = True
    block = state.inner_block()
    top_len = state.dim_length[state.top_dim]
    if not state.mask_is_full():
        for e in range(min(top_len, MASK_BITS)):
            if not state.mask_bit(e):
                enable[e * block : (e + 1) * block] = False
    return enable


def cb_mask_vector(state: ControlState, lanes: LaneGeometry) -> int:
    """Bit c set iff at least one enabled lane maps to control block c."""
    enable = lane_enable_vector(state, lanes.total_lanes)
    mask = 0
    per_cb = lanes.lanes_per_cb
    for cb in range(lanes.cb_count):
        if enable[cb * per_cb : (cb + 1) * per_cb].any():
            mask |= 1 << cb
    return mask


def register_capacity(width_bits: int, wordlines: int = 256) -> int:
    """Registers available at a given element width.

    Each register occupies one wordline per bit of precision, so capacity is
    the wordline budget divided by the kernel width.
    """
    if width_bits <= 0:
        raise ValueError(f"width must be positive, got {width_bits}")
    return wordlines // width_bits
