"""Lowering of multi-dimensional accesses to a 1D long-vector baseline.

A one-dimensional vector ISA has no multi-dimensional shapes: each access
whose flat lane image is not a single 1D run is rebuilt per top-dimension
segment as {mask window config, partial 1D access, unpack/pack move}, plus
scalar address computation charged to the core.  Replicated (stride-0)
segments skip the move: a masked stride-0 access places the value directly,
so no repositioning is needed.  Under a fully enabled mask the group count
is the static ceil(total_lanes / segment_length) of an unrolled segment
loop, with groups beyond the live shape executing as no-ops; masked shapes
emit only the live segments (dynamic predication).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .addrgen import resolve_modes
from .isa import (
    MASK_BITS,
    ControlState,
    Opcode,
    OpClass,
    ProgramItem,
    ScalarMarker,
    VectorInstruction,
    apply_config,
    cfg,
)
from .memory import Memory


class LoweringError(Exception):
    pass


@dataclass
class AccessLowering:
    opcode: str
    identity: bool
    real_groups: int = 0
    noop_groups: int = 0


@dataclass
class LoweringReport:
    accesses: list[AccessLowering] = field(default_factory=list)

    @property
    def real_groups(self) -> int:
        return sum(a.real_groups for a in self.accesses)

    def real_groups_for(self, opcode: Opcode) -> int:
        return sum(a.real_groups for a in self.accesses if a.opcode == opcode.value)


def _inner_run(state: ControlState, strides) -> int | None:
    """Stride of the flat inner-block walk if it is a single 1D run."""
    block = state.inner_block()
    if block == 1:
        return 0
    offsets = np.zeros(1, dtype=np.int64)
    for d in range(state.top_dim - 1, -1, -1):
        steps = np.arange(state.dim_length[d], dtype=np.int64) * strides[d]
        offsets = (offsets[:, None] + steps[None, :]).reshape(-1)
    diffs = np.diff(offsets)
    if (diffs == diffs[0]).all():
        return int(diffs[0])
    return None


def _whole_run(state: ControlState, strides) -> bool:
    """True when the access is a single 1D walk over all enabled lanes."""
    if not state.mask_is_full():
        return False
    if state.dim_count == 1:
        return True
    d_inner = _inner_run(state, strides)
    if d_inner is None:
        return False
    top = state.top_dim
    if state.dim_length[top] == 1:
        return True
    # the top-dimension step must continue the inner run exactly
    return strides[top] == d_inner * state.inner_block()


def _segment_mode_byte(state: ControlState, mode0: int, d_inner: int) -> int:
    """Stride modes of one lowered segment access.

    Dimension 0 keeps the original pattern, middle dimensions continue it
    sequentially (mode 2), and the top dimension contributes nothing: the
    mask window alone selects the segment.
    """
    if d_inner == 0:
        return 0
    b = mode0
    for d in range(1, state.top_dim):
        b |= 2 << (2 * d)
    return b


def lower_rvv1d(
    trace: list[ProgramItem],
    total_lanes: int,
    memory: Memory,
    scalars_per_segment: int = 4,
) -> tuple[list[ProgramItem], LoweringReport]:
    """Rewrite a multi-dimensional trace for the 1D baseline.

    Pure 1D accesses pass through unchanged; everything else expands per
    segment.  Raises LoweringError when an inner block is not a single run
    (such patterns need a hand-written 1D formulation).
    """
    state = ControlState()
    report = LoweringReport()
    out: list[ProgramItem] = []
    next_vreg = 1 + max(
        (max(item.registers(), default=0) for item in trace
         if isinstance(item, VectorInstruction)),
        default=0,
    )
    mask_dirty = False

    def restore_mask(before_dimc: bool = False):
        nonlocal mask_dirty
        if not mask_dirty:
            return
        mask_dirty = False
        if before_dimc:
            return  # the incoming dimension-count config resets the mask anyway
        out.append(cfg(Opcode.VSETDIMC, state.dim_count))
        top_len = min(state.dim_length[state.top_dim], MASK_BITS)
        for e in range(top_len):
            if not state.mask_bit(e):
                out.append(cfg(Opcode.VUNSETMASK, e))

    for item in trace:
        if isinstance(item, ScalarMarker):
            out.append(item)
            continue
        insn = item
        if insn.op_class is OpClass.CONFIG:
            restore_mask(before_dimc=insn.opcode is Opcode.VSETDIMC)
            state = apply_config(state, insn)
            out.append(insn)
            continue
        if not insn.is_memory:
            restore_mask()
            out.append(insn)
            continue

        direction = "store" if insn.is_store else "load"
        strides = resolve_modes(state, insn.mode_byte or 0, direction)
        if not insn.is_random and _whole_run(state, strides):
            restore_mask()
            out.append(insn)
            report.accesses.append(AccessLowering(insn.opcode.value, identity=True))
            continue
        d_inner = _inner_run(state, strides)
        if d_inner is None:
            raise LoweringError(
                f"{insn.opcode.value} inner block is not a 1D run; "
                "provide a dedicated 1D formulation"
            )
        mode0 = insn.modes()[0]
        if state.dim_length[0] > 1 and d_inner != strides[0]:
            raise LoweringError("inner run is not driven by dimension 0")
        if state.dim_length[0] == 1 and d_inner != 0:
            raise LoweringError("degenerate dimension 0 with a strided inner run")

        top = state.top_dim
        top_len = state.dim_length[top]
        if top_len > MASK_BITS:
            raise LoweringError(f"top dimension {top_len} exceeds the mask window range")
        block = state.inner_block()
        eb = insn.dtype.width_bytes
        # a register-bounded segment loop (shape fills all full segments and a
        # partial one would remain) runs one extra, empty segment; a
        # data-bounded loop does not
        overhang = (
            state.mask_is_full()
            and top_len == total_lanes // block
            and total_lanes % block != 0
            and top_len < MASK_BITS
        )
        groups = top_len + (1 if overhang else 0)
        acc = AccessLowering(insn.opcode.value, identity=False)
        seg_modes = _segment_mode_byte(state, mode0, d_inner)
        for j in range(groups):
            live = j < top_len and state.mask_bit(j)
            if not live:
                if j < top_len:
                    continue  # masked-off segments vanish under predication
            if live:
                if insn.is_random:
                    seg_base = memory.read_u64(insn.base + j * 8)
                else:
                    seg_base = insn.base + j * strides[top] * eb
                acc.real_groups += 1
            else:
                seg_base = 0 if insn.is_random else insn.base
                acc.noop_groups += 1
            out.append(ScalarMarker(scalars_per_segment))
            out.append(cfg(Opcode.VSETMASKW, j))
            mask_dirty = True
            # after the core resolves the segment base, the partial access is
            # always a plain strided one
            seg_op = Opcode.VSLD if insn.is_load else Opcode.VSST
            if d_inner == 0:
                # replication is position-independent: the masked stride-0
                # access places the value without an unpack move
                out.append(
                    VectorInstruction(
                        seg_op, dtype=insn.dtype,
                        dest=insn.dest if insn.is_load else None,
                        sources=insn.sources if insn.is_store else (),
                        base=seg_base, mode_byte=0,
                    )
                )
            elif insn.is_load:
                scratch = next_vreg
                next_vreg += 1
                out.append(VectorInstruction(seg_op, dtype=insn.dtype, dest=scratch,
                                             base=seg_base, mode_byte=seg_modes))
                out.append(VectorInstruction(Opcode.VCPY, dtype=insn.dtype,
                                             dest=insn.dest, sources=(scratch,)))
            else:
                scratch = next_vreg
                next_vreg += 1
                out.append(VectorInstruction(Opcode.VCPY, dtype=insn.dtype,
                                             dest=scratch, sources=insn.sources))
                out.append(VectorInstruction(seg_op, dtype=insn.dtype,
                                             sources=(scratch,), base=seg_base,
                                             mode_byte=seg_modes))
        report.accesses.append(acc)
    restore_mask()
    return out, report
