"""Bit-accurate functional semantics of the vector instruction set.

Registers hold per-lane bit patterns (uint64); each operation interprets
them at its data type.  Integer arithmetic wraps modulo 2^width, floats use
host IEEE arithmetic at the declared precision.  Lane writes are gated by a
per-lane enable combining shape membership, the dimension mask, and the tag
latch set by compare operations.
"""

from __future__ import annotations

import numpy as np

from . import addrgen
from .isa import (
    COMPARE_OPS,
    IMM_SHIFT_OPS,
    REG_SHIFT_OPS,
    ControlState,
    DataType,
    Opcode,
    OpClass,
    ProgramItem,
    ScalarMarker,
    VectorInstruction,
)
from .layout import lane_enable_vector
from .memory import Memory

_U64_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


class ExecError(Exception):
    pass


def _width_mask(n: int) -> np.uint64:
    return _U64_ONES if n == 64 else np.uint64((1 << n) - 1)


def _as_signed(bits: np.ndarray, n: int) -> np.ndarray:
    """Two's-complement interpretation of width-n patterns, as int64."""
    if n == 64:
        return bits.view(np.int64)
    sign = np.uint64(1 << (n - 1))
    ext = (bits ^ sign).astype(np.int64) - np.int64(1 << (n - 1))
    return ext


def _from_signed(vals: np.ndarray, n: int) -> np.ndarray:
    return vals.astype(np.uint64) & _width_mask(n)


def _as_float(bits: np.ndarray, dtype: DataType) -> np.ndarray:
    if dtype.width_bits == 16:
        return bits.astype(np.uint16).view(np.float16)
    return bits.astype(np.uint32).view(np.float32)


def _from_float(vals: np.ndarray, dtype: DataType) -> np.ndarray:
    if dtype.width_bits == 16:
        return vals.astype(np.float16).view(np.uint16).astype(np.uint64)
    return vals.astype(np.float32).view(np.uint32).astype(np.uint64)


def interpret(bits: np.ndarray, dtype: DataType) -> np.ndarray:
    """Numeric view of register bit patterns (for verification/goldens)."""
    if dtype.is_float:
        return _as_float(bits, dtype)
    if dtype.is_signed:
        return _as_signed(bits, dtype.width_bits)
    return bits & _width_mask(dtype.width_bits)


def to_bits(values: np.ndarray, dtype: DataType) -> np.ndarray:
    if dtype.is_float:
        return _from_float(values, dtype)
    return values.astype(np.int64).astype(np.uint64) & _width_mask(dtype.width_bits)


def _shift_left(a: np.ndarray, amount: np.ndarray, n: int) -> np.ndarray:
    amt = amount % np.uint64(n)
    return (a << amt) & _width_mask(n)


def _shift_right(a: np.ndarray, amount: np.ndarray, n: int, signed: bool) -> np.ndarray:
    amt = amount % np.uint64(n)
    if signed:
        return _from_signed(_as_signed(a, n) >> amt.astype(np.int64), n)
    return (a & _width_mask(n)) >> amt


def _rotate(a: np.ndarray, amount: np.ndarray, n: int, left: bool) -> np.ndarray:
    amt = (amount % np.uint64(n)).astype(np.uint64)
    if not left:
        amt = (np.uint64(n) - amt) % np.uint64(n)
    a = a & _width_mask(n)
    hi = (a << amt) & _width_mask(n)
    back = (np.uint64(n) - amt) % np.uint64(n)  # keep shift count < n
    lo = np.where(amt == 0, np.uint64(0), a >> back)
    return hi | lo


def exec_binary(op: Opcode, dtype: DataType, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lane-wise binary arithmetic on bit patterns."""
    n = dtype.width_bits
    if dtype.is_float and op is not Opcode.VXOR:
        fa, fb = _as_float(a, dtype), _as_float(b, dtype)
        if op is Opcode.VADD:
            return _from_float(fa + fb, dtype)
        if op is Opcode.VSUB:
            return _from_float(fa - fb, dtype)
        if op is Opcode.VMUL:
            return _from_float(fa * fb, dtype)
        if op is Opcode.VMIN:
            return _from_float(np.minimum(fa, fb), dtype)
        if op is Opcode.VMAX:
            return _from_float(np.maximum(fa, fb), dtype)
        raise ExecError(f"unsupported float op {op.value}")
    mask = _width_mask(n)
    if op is Opcode.VADD:
        return (a + b) & mask
    if op is Opcode.VSUB:
        return (a - b) & mask
    if op is Opcode.VMUL:
        return (a * b) & mask
    if op is Opcode.VXOR:
        return (a ^ b) & mask
    if op in (Opcode.VMIN, Opcode.VMAX):
        if dtype.is_signed:
            ia, ib = _as_signed(a, n), _as_signed(b, n)
        else:
            ia, ib = a & mask, b & mask
        pick_a = ia <= ib if op is Opcode.VMIN else ia >= ib
        return np.where(pick_a, a & mask, b & mask)
    raise ExecError(f"not a binary arithmetic op: {op.value}")


def exec_compare(op: Opcode, dtype: DataType, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-lane comparison producing the tag bits."""
    if dtype.is_float:
        x, y = _as_float(a, dtype), _as_float(b, dtype)
    elif dtype.is_signed:
        x, y = _as_signed(a, dtype.width_bits), _as_signed(b, dtype.width_bits)
    else:
        m = _width_mask(dtype.width_bits)
        x, y = a & m, b & m
    if op is Opcode.VGT:
        return x > y
    if op is Opcode.VGTE:
        return x >= y
    if op is Opcode.VLT:
        return x < y
    if op is Opcode.VLTE:
        return x <= y
    if op is Opcode.VEQ:
        return x == y
    return x != y


def exec_convert(dst_t: DataType, src_t: DataType, bits: np.ndarray) -> np.ndarray:
    """Per-lane conversion: widen by signedness, truncate, or round (ties to
    even) across the int/float boundary."""
    if src_t.is_float and dst_t.is_float:
        return _from_float(_as_float(bits, src_t), dst_t)
    if src_t.is_float:
        f = _as_float(bits, src_t).astype(np.float64)
        rounded = np.where(np.isfinite(f), np.rint(f), 0.0)
        return _from_signed(rounded.astype(np.int64), dst_t.width_bits)
    if dst_t.is_float:
        if src_t.is_signed:
            vals = _as_signed(bits, src_t.width_bits)
        else:
            vals = (bits & _width_mask(src_t.width_bits)).astype(np.float64)
        return _from_float(np.asarray(vals, dtype=np.float64), dst_t)
    if src_t.is_signed:
        return _from_signed(_as_signed(bits, src_t.width_bits), dst_t.width_bits)
    return bits & _width_mask(src_t.width_bits) & _width_mask(dst_t.width_bits)


class FunctionalMachine:
    """Sequential interpreter for vector programs: the golden value model.

    Timing never flows through here; the engine drives the same machine to
    guarantee the final memory image is independent of the cycle model.
    """

    def __init__(self, memory: Memory | None = None, total_lanes: int = 8192,
                 wordlines: int = 256):
        self.memory = memory if memory is not None else Memory()
        self.total_lanes = total_lanes
        self.wordlines = wordlines
        self.state = ControlState()
        self.registers: dict[int, np.ndarray] = {}
        self.tag = np.ones(total_lanes, dtype=bool)
        self.tag_enabled = False

    def reg(self, rid: int) -> np.ndarray:
        if rid not in self.registers:
            self.registers[rid] = np.zeros(self.total_lanes, dtype=np.uint64)
        return self.registers[rid]

    def lane_enable(self, include_tag: bool = True) -> np.ndarray:
        enable = lane_enable_vector(self.state, self.total_lanes)
        if include_tag and self.tag_enabled:
            enable &= self.tag
        return enable

    def plan_for(self, insn: VectorInstruction) -> addrgen.AccessPlan:
        direction = "store" if insn.is_store else "load"
        strides = addrgen.resolve_modes(self.state, insn.mode_byte or 0, direction)
        eb = insn.dtype.width_bytes
        if insn.is_random:
            return addrgen.random_plan(self.state, insn.base, strides, eb,
                                       self.memory, direction)
        return addrgen.strided_plan(self.state, insn.base, strides, eb, direction)

    def step(self, item: ProgramItem) -> addrgen.AccessPlan | None:
        """Execute one program item; returns the access plan of memory ops."""
        if isinstance(item, ScalarMarker):
            return None
        insn = item
        cls = insn.op_class
        if cls is OpClass.CONFIG:
            from .isa import apply_config

            self.state = apply_config(self.state, insn)
            if insn.opcode in (Opcode.VSETDIMC, Opcode.VSETWIDTH):
                # reconfiguration invalidates the tag latch
                self.tag_enabled = False
                self.tag[:] = True
            return None
        if cls is OpClass.MEMORY:
            plan = self.plan_for(insn)
            self._exec_memory(insn, plan)
            return plan
        if insn.opcode in COMPARE_OPS:
            self._exec_compare(insn)
        elif cls is OpClass.MOVE:
            self._exec_move(insn)
        else:
            self._exec_arith(insn)
        return None

    def run(self, items: list[ProgramItem]):
        for item in items:
            self.step(item)

    def _merge(self, dest: int, result: np.ndarray, enable: np.ndarray | None = None):
        if enable is None:
            enable = self.lane_enable()
        dst = self.reg(dest)
        dst[enable] = result[enable]

    def _exec_arith(self, insn: VectorInstruction):
        op, dtype = insn.opcode, insn.dtype
        n = dtype.width_bits
        if op is Opcode.VSETDUP:
            value = np.uint64(insn.imm % (1 << 64)) & _width_mask(n)
            self._merge(insn.dest, np.full(self.total_lanes, value, dtype=np.uint64))
            return
        a = self.reg(insn.sources[0])
        if op in IMM_SHIFT_OPS:
            amt = np.uint64(insn.imm % n)
            if op is Opcode.VSHIL:
                res = _shift_left(a, amt, n)
            elif op is Opcode.VSHIR:
                res = _shift_right(a, amt, n, dtype.is_signed)
            else:
                res = _rotate(a, np.full(self.total_lanes, amt, dtype=np.uint64), n,
                              left=op is Opcode.VROTIL)
            self._merge(insn.dest, res)
            return
        b = self.reg(insn.sources[1])
        if op in REG_SHIFT_OPS:
            amt = b & _width_mask(n)
            if op is Opcode.VSHRL:
                res = _shift_left(a, amt, n)
            else:
                res = _shift_right(a, amt, n, dtype.is_signed)
        else:
            res = exec_binary(op, dtype, a, b)
        self._merge(insn.dest, res)

    def _exec_compare(self, insn: VectorInstruction):
        a = self.reg(insn.sources[0])
        b = self.reg(insn.sources[1])
        result = exec_compare(insn.opcode, insn.dtype, a, b)
        # a compare overwrites the tag on the lanes it executes on (shape and
        # dimension mask, not the previous tag) and arms predication
        active = self.lane_enable(include_tag=False)
        self.tag[active] = result[active]
        self.tag_enabled = True

    def _exec_move(self, insn: VectorInstruction):
        src = self.reg(insn.sources[0])
        if insn.opcode is Opcode.VCPY:
            self._merge(insn.dest, src & _width_mask(insn.dtype.width_bits))
        else:
            self._merge(insn.dest, exec_convert(insn.dtype, insn.dtype2, src))

    def _exec_memory(self, insn: VectorInstruction, plan: addrgen.AccessPlan):
        enable = self.lane_enable()
        keep = enable[plan.lanes]
        lanes = plan.lanes[keep]
        addrs = plan.addrs[keep]
        eb = plan.elem_bytes
        if insn.is_load:
            values = self.memory.read_elems(addrs, eb)
            dst = self.reg(insn.dest)
            dst[lanes] = values
        else:
            src = self.reg(insn.sources[0])
            values = src[lanes] & _width_mask(insn.dtype.width_bits)
            self.memory.write_elems(addrs, values, eb)
