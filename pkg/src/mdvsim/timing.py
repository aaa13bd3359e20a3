"""Compute-latency models for the four in-SRAM computing schemes.

Bit-serial (bs) is the reference: ops cost O(n)..O(n^2) cycles at full lane
count.  Bit-parallel (bp) lays elements horizontally: 1/n the lanes, 1/n the
latency.  Bit-hybrid (bh) splits elements into p-bit segments: 1/p lanes and
latency.  Associative computing (ac) gets constant-time bitwise ops but pays
8n+2 per addition and multiplies via repeated addition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .isa import (
    COMPARE_OPS,
    IMM_SHIFT_OPS,
    REG_SHIFT_OPS,
    DataType,
    Opcode,
)

SCHEMES = ("bs", "bp", "bh", "ac")

INT_WIDTHS = (8, 16, 32, 64)

# ops that a bit-serial engine finishes in one pass per bit
_LINEAR_OPS = (
    {Opcode.VCPY, Opcode.VCVT, Opcode.VSETDUP, Opcode.VADD, Opcode.VXOR}
    | IMM_SHIFT_OPS
    | COMPARE_OPS
)
_DOUBLE_OPS = {Opcode.VSUB, Opcode.VMIN, Opcode.VMAX}


class TimingError(Exception):
    pass


def bs_latency(op: Opcode, n: int) -> int:
    """Bit-serial integer latency in cycles for an n-bit operation."""
    if n not in INT_WIDTHS:
        raise TimingError(f"unsupported width {n}")
    if op in _LINEAR_OPS:
        return n
    if op in _DOUBLE_OPS:
        return 2 * n
    if op is Opcode.VMUL:
        return n * n + 5 * n
    if op in REG_SHIFT_OPS:
        return n * math.ceil(math.log2(n))
    raise TimingError(f"{op.value} has no compute latency")


def bp_latency(op: Opcode, n: int) -> int:
    return max(1, math.ceil(bs_latency(op, n) / n))


def bp_lanes(n: int, bitlines: int = 256) -> int:
    if bitlines % n:
        raise TimingError(f"width {n} does not divide {bitlines} bitlines")
    return bitlines // n


def bh_latency(op: Opcode, n: int, p: int = 4) -> int:
    if n % p:
        raise TimingError(f"segment width {p} does not divide {n}")
    return max(1, math.ceil(bs_latency(op, n) / p))


def bh_lanes(n: int, p: int = 4, bitlines: int = 256) -> int:
    if n % p:
        raise TimingError(f"segment width {p} does not divide {n}")
    return bitlines // p


def ac_latency(op: Opcode, n: int, bitwise_cycles: int = 2) -> int:
    """Associative-computing latency: additions via 8n+2 search/update
    passes; bitwise ops in a constant pair of passes; multiplication
    decomposed into n conditional additions."""
    if n not in INT_WIDTHS:
        raise TimingError(f"unsupported width {n}")
    if op in (Opcode.VADD, Opcode.VSUB):
        return 8 * n + 2
    if op is Opcode.VMUL:
        return n * (8 * n + 2)
    if op in (Opcode.VMIN, Opcode.VMAX):
        return (8 * n + 2) + n
    if op in REG_SHIFT_OPS:
        return math.ceil(math.log2(n)) * (bitwise_cycles + n)
    if op in _LINEAR_OPS:
        return bitwise_cycles
    raise TimingError(f"{op.value} has no compute latency")


def _fp_params(width: int) -> tuple[int, int]:
    """(mantissa bits, exponent bits) without the hidden bit."""
    return (10, 5) if width == 16 else (23, 8)


def fp_add_latency(n: int) -> int:
    # exponent subtract, variable-shift normalize, mantissa add, renormalize
    return 4 * n + n * math.ceil(math.log2(n))


def fp_mul_latency(n: int) -> int:
    m, e = _fp_params(n)
    return m * m + 5 * m + 3 * e


def fp_latency(op: Opcode, n: int) -> int:
    """Bit-serial floating-point latency estimates (configurable)."""
    if op is Opcode.VMUL:
        return fp_mul_latency(n)
    if op in (Opcode.VADD, Opcode.VSUB, Opcode.VMIN, Opcode.VMAX) or op in COMPARE_OPS:
        return fp_add_latency(n)
    # copies, converts, duplications, shifts act on raw bit slices
    return n


@dataclass(frozen=True)
class SchemeModel:
    """Latency and lane model of one in-SRAM computing scheme.

    ``overrides`` maps (opcode, width) -> cycles and takes precedence over
    the formulas; floating-point entries are estimates by default.
    """

    scheme: str = "bs"
    bitlines_per_array: int = 256
    segment_bits: int = 4  # bh only
    ac_bitwise_cycles: int = 2
    ac_lanes_per_array: int | None = None  # defaults to full bitline count
    overrides: dict[tuple[str, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise TimingError(f"unknown scheme {self.scheme!r}")

    def lanes_per_array(self, width_bits: int) -> int:
        if self.scheme == "bp":
            return bp_lanes(width_bits, self.bitlines_per_array)
        if self.scheme == "bh":
            return bh_lanes(width_bits, self.segment_bits, self.bitlines_per_array)
        if self.scheme == "ac" and self.ac_lanes_per_array is not None:
            return self.ac_lanes_per_array
        return self.bitlines_per_array

    def latency(self, op: Opcode, dtype: DataType) -> int:
        n = dtype.width_bits
        key = (op.value, n)
        if key in self.overrides:
            return self.overrides[key]
        if dtype.is_float:
            base = fp_latency(op, n)
            if self.scheme == "bp":
                return max(1, math.ceil(base / n))
            if self.scheme == "bh":
                return max(1, math.ceil(base / self.segment_bits))
            if self.scheme == "ac":
                # float add/mul decompose into integer passes of similar cost
                return base * 4
            return base
        if self.scheme == "bp":
            return bp_latency(op, n)
        if self.scheme == "bh":
            return bh_latency(op, n, self.segment_bits)
        if self.scheme == "ac":
            return ac_latency(op, n, self.ac_bitwise_cycles)
        return bs_latency(op, n)
