"""Per-lane address generation for strided and random vector memory accesses.

Strided accesses walk a four-deep loop nest; the per-dimension strides come
from a 2-bit mode field (0 -> 0, 1 -> 1, 2 -> product rule, 3 -> stride CR).
Random accesses draw a base per top-dimension element from a pointer table
and apply the resolved strides to the inner dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isa import ControlState, MAX_DIMS

POINTER_BYTES = 8


class AddressError(Exception):
    pass


@dataclass(frozen=True)
class ResolvedStrides:
    """Element-unit strides after stride-mode resolution."""

    stride: tuple[int, int, int, int]

    def __getitem__(self, i: int) -> int:
        return self.stride[i]


@dataclass(frozen=True)
class AccessPlan:
    """Per-lane (lane, byte address) pairs for the enabled lanes of a shape.

    ``lanes`` and ``addrs`` are parallel arrays in loop-nest order; stores
    with duplicate addresses resolve to the highest lane (last writer).
    ``table_addrs`` carries the pointer-table reads of random accesses.
    """

    lanes: np.ndarray
    addrs: np.ndarray
    elem_bytes: int
    direction: str  # "load" | "store"
    table_addrs: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.lanes)


def resolve_modes(state: ControlState, mode_byte: int, direction: str) -> ResolvedStrides:
    """Resolve the packed 2-bit stride modes against the control registers."""
    crs = state.load_stride_cr if direction == "load" else state.store_stride_cr
    strides = [0] * MAX_DIMS
    for i in range(MAX_DIMS):
        mode = (mode_byte >> (2 * i)) & 0x3
        if mode == 0:
            strides[i] = 0
        elif mode == 1:
            strides[i] = 1
        elif mode == 2:
            # sequential continuation of the dimension below; dimension 0
            # has no lower dimension and degenerates to unit stride
            strides[i] = strides[i - 1] * state.dim_length[i - 1] if i > 0 else 1
        else:
            strides[i] = crs[i]
    return ResolvedStrides(tuple(strides))


def _offset_grid(state: ControlState, strides: ResolvedStrides) -> np.ndarray:
    """Element offsets for the full shape, flattened in lane order."""
    offsets = np.zeros(1, dtype=np.int64)
    for d in range(state.dim_count - 1, -1, -1):
        steps = np.arange(state.dim_length[d], dtype=np.int64) * strides[d]
        offsets = (offsets[:, None] + steps[None, :]).reshape(-1)
    return offsets


def strided_plan(
    state: ControlState, base: int, strides: ResolvedStrides, elem_bytes: int,
    direction: str = "load",
) -> AccessPlan:
    """Addresses of a strided access over the enabled lanes of the shape."""
    offsets = _offset_grid(state, strides)
    addrs = base + offsets * elem_bytes
    lanes = np.arange(state.total_elements(), dtype=np.int64)
    keep = _enabled_lane_filter(state)
    if keep is not None:
        lanes, addrs = lanes[keep], addrs[keep]
    if len(addrs) and addrs.min() < 0:
        raise AddressError(f"strided access reaches negative address {addrs.min()}")
    return AccessPlan(lanes, addrs, elem_bytes, direction)


def random_plan(
    state: ControlState, base_table: int, strides: ResolvedStrides, elem_bytes: int,
    memory, direction: str = "load",
) -> AccessPlan:
    """Addresses of a random access: per-element base plus inner strides.

    The top dimension indexes a table of byte-address pointers starting at
    ``base_table`` (little-endian, 8 bytes each); the inner dimensions use
    the three lowest stride slots.  A one-dimensional shape degenerates to a
    table of per-element pointers.
    """
    top = state.top_dim
    top_len = state.dim_length[top]
    inner = state.copy()
    inner.dim_count = max(top, 1)
    if top == 0:
        inner.dim_length[0] = 1
    offsets = _offset_grid(inner, strides)
    block = state.inner_block()
    lanes_out = []
    addrs_out = []
    tables = []
    for e in state.enabled_top_elements():
        ptr_addr = base_table + e * POINTER_BYTES
        base = memory.read_u64(ptr_addr)
        tables.append(ptr_addr)
        lanes_out.append(np.arange(e * block, (e + 1) * block, dtype=np.int64))
        addrs_out.append(base + offsets * elem_bytes)
    if lanes_out:
        lanes = np.concatenate(lanes_out)
        addrs = np.concatenate(addrs_out)
    else:
        lanes = np.empty(0, dtype=np.int64)
        addrs = np.empty(0, dtype=np.int64)
    if len(addrs) and addrs.min() < 0:
        raise AddressError(f"random access reaches negative address {addrs.min()}")
    return AccessPlan(lanes, addrs, elem_bytes, direction,
                      table_addrs=np.asarray(tables, dtype=np.int64))


def address_range(
    state: ControlState, base: int, strides: ResolvedStrides, elem_bytes: int,
) -> tuple[int, int]:
    """Conservative [low, high) byte interval of a strided access.

    The extent sums length*stride over all dimensions (not length-1), which
    over-approximates by design; negative-stride terms extend the low end.
    """
    low = high = base
    for i in range(MAX_DIMS):
        term = state.dim_length[i] * strides[i] * elem_bytes
        if term >= 0:
            high += term
        else:
            low += term
    return low, max(high, base + elem_bytes)


def _enabled_lane_filter(state: ControlState) -> np.ndarray | None:
    """Boolean filter over shape lanes for the dimension mask, or None."""
    if state.mask_is_full():
        return None
    block = state.inner_block()
    top_len = state.dim_length[state.top_dim]
    keep_top = np.array(
        [state.mask_bit(e) if e < 256 else True for e in range(top_len)], dtype=bool
    )
    return np.repeat(keep_top, block)
