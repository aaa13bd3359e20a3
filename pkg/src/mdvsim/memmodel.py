"""Data-access timing: per-lane address streams coalesced into line requests.

Lane addresses coalesce into unique cache lines through the MSHRs; the line
fetches share the cache port (``mshr_count`` outstanding misses per wave,
one access latency per wave).  Delivery is per control block: each CB's
transpose memory unit fills from its own lines and then pays one wordline
write per bit of element width, in parallel across CBs.  Residency of a
buffer (L2 hit vs. DRAM) is a flat working-set classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .addrgen import AccessPlan
from .layout import LaneGeometry
from .memory import Memory


@dataclass(frozen=True)
class MemoryTimingConfig:
    cache_line_bytes: int = 64
    l2_hit_latency: int = 12
    mshr_count: int = 46
    dram_latency: int = 100
    tmu_fill_cycles: int = 1
    l2_capacity_bytes: int = 256 * 1024


@dataclass
class AccessTiming:
    """Timing of one access: a shared fetch phase plus per-CB delivery."""

    unique_lines: int
    mshr_waves: int
    fetch_cycles: int
    fill_per_cb: dict[int, int]
    bytes_moved: int


def classify_residency(buffer_name: str, memory: Memory, cfg: MemoryTimingConfig) -> str:
    """A buffer whose working set fits the regular cache half hits in L2."""
    buf = memory.buffers.get(buffer_name)
    if buf is None:
        raise KeyError(f"unregistered buffer {buffer_name!r}")
    if buf.residency is not None:
        return buf.residency
    return "l2_hit" if buf.size <= cfg.l2_capacity_bytes else "dram"


def _line_set(addrs: np.ndarray, elem_bytes: int, line_bytes: int) -> np.ndarray:
    first = addrs // line_bytes
    last = (addrs + elem_bytes - 1) // line_bytes
    return np.unique(np.concatenate([first, last]))


def access_time(
    plan: AccessPlan,
    cfg: MemoryTimingConfig,
    lanes: LaneGeometry,
    width_bits: int,
    memory: Memory,
) -> AccessTiming:
    """Cycle cost of one vector memory access.

    The fetch phase serializes MSHR waves over the union of unique lines
    (plus any pointer-table reads); each involved CB then needs one TMU fill
    cycle per line of its own slice and ``width_bits`` transpose write-back
    cycles, concurrently across CBs.
    """
    fill_per_cb: dict[int, int] = {}
    all_lines = []
    cb_ids = plan.lanes // lanes.lanes_per_cb
    for cb in np.unique(cb_ids):
        addrs = plan.addrs[cb_ids == cb]
        lines = _line_set(addrs, plan.elem_bytes, cfg.cache_line_bytes)
        all_lines.append(lines)
        fill_per_cb[int(cb)] = len(lines) * cfg.tmu_fill_cycles + width_bits
    if plan.table_addrs is not None and len(plan.table_addrs):
        all_lines.append(_line_set(plan.table_addrs, 8, cfg.cache_line_bytes))
    union = np.unique(np.concatenate(all_lines)) if all_lines else np.empty(0, np.int64)
    nlines = len(union)
    waves = math.ceil(nlines / cfg.mshr_count)
    latency = cfg.l2_hit_latency
    if nlines:
        for line in (union[0], union[-1]):
            buf = memory.buffer_at(int(line) * cfg.cache_line_bytes)
            if buf is not None and classify_residency(buf.name, memory, cfg) == "dram":
                latency = cfg.dram_latency
                break
    return AccessTiming(
        unique_lines=nlines,
        mshr_waves=waves,
        fetch_cycles=waves * latency,
        fill_per_cb=fill_per_cb,
        bytes_moved=nlines * cfg.cache_line_bytes,
    )
