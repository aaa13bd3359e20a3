"""Instruction set definition: data types, opcodes, control registers, decode.

The vector engine executes a small long-vector instruction set with four
instruction classes: config (control-register setters), move, memory access,
and arithmetic.  Programs are plain text, one instruction per line, which
keeps traces diff-friendly at desk scale.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

MAX_DIMS = 4
MASK_BITS = 256
DEFAULT_TOTAL_LANES = 8192


class Kind(enum.Enum):
    UINT = "uint"
    SINT = "sint"
    FLOAT = "float"


@dataclass(frozen=True)
class DataType:
    suffix: str
    kind: Kind
    width_bits: int

    @property
    def width_bytes(self) -> int:
        return self.width_bits // 8

    @property
    def is_float(self) -> bool:
        return self.kind is Kind.FLOAT

    @property
    def is_signed(self) -> bool:
        return self.kind is Kind.SINT

    def __str__(self) -> str:
        return self.suffix


# Canonical suffixes: b/w/dw/qw are signed 8/16/32/64-bit integers, hf/f the
# 16/32-bit floats.  Unsigned integer variants carry a "u" prefix so that the
# suffix <-> (kind, width) map stays bijective.
DTYPES = {
    "b": DataType("b", Kind.SINT, 8),
    "w": DataType("w", Kind.SINT, 16),
    "dw": DataType("dw", Kind.SINT, 32),
    "qw": DataType("qw", Kind.SINT, 64),
    "ub": DataType("ub", Kind.UINT, 8),
    "uw": DataType("uw", Kind.UINT, 16),
    "udw": DataType("udw", Kind.UINT, 32),
    "uqw": DataType("uqw", Kind.UINT, 64),
    "hf": DataType("hf", Kind.FLOAT, 16),
    "f": DataType("f", Kind.FLOAT, 32),
}

INT_WIDTHS = (8, 16, 32, 64)
FLOAT_WIDTHS = (16, 32)


class OpClass(enum.Enum):
    CONFIG = "config"
    MOVE = "move"
    MEMORY = "memory"
    ARITH = "arith"


class Opcode(enum.Enum):
    # config
    VSETDIMC = "vsetdimc"
    VSETDIML = "vsetdiml"
    VSETMASK = "vsetmask"
    VUNSETMASK = "vunsetmask"
    VSETMASKW = "vsetmaskw"  # mask window: enable exactly one top-dim element
    VSETWIDTH = "vsetwidth"
    VSETLDSTR = "vsetldstr"
    VSETSTSTR = "vsetststr"
    # move
    VCVT = "vcvt"
    VCPY = "vcpy"
    # memory
    VSLD = "vsld"
    VRLD = "vrld"
    VSST = "vsst"
    VRST = "vrst"
    # arithmetic
    VSETDUP = "vsetdup"
    VSHIL = "vshil"
    VSHIR = "vshir"
    VROTIL = "vrotil"
    VROTIR = "vrotir"
    VSHRL = "vshrl"
    VSHRR = "vshrr"
    VADD = "vadd"
    VSUB = "vsub"
    VMUL = "vmul"
    VMIN = "vmin"
    VMAX = "vmax"
    VXOR = "vxor"
    VGT = "vgt"
    VGTE = "vgte"
    VLT = "vlt"
    VLTE = "vlte"
    VEQ = "veq"
    VNEQ = "vneq"

    @property
    def op_class(self) -> OpClass:
        return _OP_CLASS[self]


_CONFIG_OPS = {
    Opcode.VSETDIMC,
    Opcode.VSETDIML,
    Opcode.VSETMASK,
    Opcode.VUNSETMASK,
    Opcode.VSETMASKW,
    Opcode.VSETWIDTH,
    Opcode.VSETLDSTR,
    Opcode.VSETSTSTR,
}
_MOVE_OPS = {Opcode.VCVT, Opcode.VCPY}
_MEMORY_OPS = {Opcode.VSLD, Opcode.VRLD, Opcode.VSST, Opcode.VRST}
_LOAD_OPS = {Opcode.VSLD, Opcode.VRLD}
_STORE_OPS = {Opcode.VSST, Opcode.VRST}
_RANDOM_OPS = {Opcode.VRLD, Opcode.VRST}
COMPARE_OPS = {Opcode.VGT, Opcode.VGTE, Opcode.VLT, Opcode.VLTE, Opcode.VEQ, Opcode.VNEQ}
IMM_SHIFT_OPS = {Opcode.VSHIL, Opcode.VSHIR, Opcode.VROTIL, Opcode.VROTIR}
REG_SHIFT_OPS = {Opcode.VSHRL, Opcode.VSHRR}
BINARY_ARITH_OPS = {Opcode.VADD, Opcode.VSUB, Opcode.VMUL, Opcode.VMIN, Opcode.VMAX, Opcode.VXOR}

_OP_CLASS = {}
for _op in Opcode:
    if _op in _CONFIG_OPS:
        _OP_CLASS[_op] = OpClass.CONFIG
    elif _op in _MOVE_OPS:
        _OP_CLASS[_op] = OpClass.MOVE
    elif _op in _MEMORY_OPS:
        _OP_CLASS[_op] = OpClass.MEMORY
    else:
        _OP_CLASS[_op] = OpClass.ARITH


class IsaError(Exception):
    pass


class DecodeError(IsaError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class VectorInstruction:
    """One decoded vector instruction.

    ``dest``/``sources`` are vector register ids.  ``base`` is a byte address
    used by memory ops (for random accesses it points at the pointer table),
    ``mode_byte`` packs four 2-bit stride modes (dimension 0 in the low bits),
    ``imm`` is the scalar immediate of config/arith ops (for float dtypes the
    value is the raw bit pattern), and config ops use (``cr_index``, ``imm``).
    """

    opcode: Opcode
    dtype: DataType | None = None
    dtype2: DataType | None = None  # vcvt source type
    dest: int | None = None
    sources: tuple[int, ...] = ()
    base: int | None = None
    mode_byte: int | None = None
    imm: int | None = None
    cr_index: int | None = None

    @property
    def op_class(self) -> OpClass:
        return self.opcode.op_class

    @property
    def is_memory(self) -> bool:
        return self.opcode in _MEMORY_OPS

    @property
    def is_load(self) -> bool:
        return self.opcode in _LOAD_OPS

    @property
    def is_store(self) -> bool:
        return self.opcode in _STORE_OPS

    @property
    def is_random(self) -> bool:
        return self.opcode in _RANDOM_OPS

    def modes(self) -> tuple[int, int, int, int]:
        b = self.mode_byte or 0
        return tuple((b >> (2 * i)) & 0x3 for i in range(MAX_DIMS))

    def registers(self) -> tuple[int, ...]:
        regs = () if self.dest is None else (self.dest,)
        return regs + self.sources


@dataclass(frozen=True)
class ScalarMarker:
    """Run of interleaved scalar instructions charged to the core model.

    ``load_addr`` optionally records a scalar load address so the core's
    write buffer can detect dependences on pending vector stores.
    """

    count: int
    load_addr: int | None = None


ProgramItem = VectorInstruction | ScalarMarker


@dataclass
class ControlState:
    """Controller-held configuration: the control-register file."""

    dim_count: int = 1
    dim_length: list[int] = field(default_factory=lambda: [1] * MAX_DIMS)
    load_stride_cr: list[int] = field(default_factory=lambda: [0] * MAX_DIMS)
    store_stride_cr: list[int] = field(default_factory=lambda: [0] * MAX_DIMS)
    dim_mask: int = (1 << MASK_BITS) - 1  # bit i: top-dim element i enabled
    kernel_width_bits: int = 32

    def copy(self) -> "ControlState":
        return ControlState(
            dim_count=self.dim_count,
            dim_length=list(self.dim_length),
            load_stride_cr=list(self.load_stride_cr),
            store_stride_cr=list(self.store_stride_cr),
            dim_mask=self.dim_mask,
            kernel_width_bits=self.kernel_width_bits,
        )

    @property
    def top_dim(self) -> int:
        return self.dim_count - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.dim_length[: self.dim_count])

    def total_elements(self) -> int:
        n = 1
        for length in self.shape:
            n *= length
        return n

    def inner_block(self) -> int:
        """Lanes per top-dimension element."""
        n = 1
        for length in self.dim_length[: self.top_dim]:
            n *= length
        return n

    def mask_bit(self, element: int) -> bool:
        return bool((self.dim_mask >> element) & 1)

    def enabled_top_elements(self) -> list[int]:
        top_len = self.dim_length[self.top_dim]
        return [e for e in range(top_len) if e >= MASK_BITS or self.mask_bit(e)]

    def mask_is_full(self) -> bool:
        top_len = min(self.dim_length[self.top_dim], MASK_BITS)
        want = (1 << top_len) - 1
        return (self.dim_mask & want) == want


def mode_byte(*modes: int) -> int:
    """Pack per-dimension stride modes (dim 0 first) into one byte."""
    if len(modes) > MAX_DIMS:
        raise IsaError(f"at most {MAX_DIMS} stride modes, got {len(modes)}")
    b = 0
    for i, m in enumerate(modes):
        if not 0 <= m <= 3:
            raise IsaError(f"stride mode must be 0..3, got {m}")
        b |= m << (2 * i)
    return b


def apply_config(state: ControlState, insn: VectorInstruction) -> ControlState:
    """Return the control state after a config instruction.

    ``vsetdimc`` re-arms the dimension mask (all enabled) and resets the
    lengths of now-inactive dimensions to 1.
    """
    if insn.op_class is not OpClass.CONFIG:
        raise IsaError(f"{insn.opcode.value} is not a config opcode")
    new = state.copy()
    op = insn.opcode
    if op is Opcode.VSETDIMC:
        n = insn.imm
        if not 1 <= n <= MAX_DIMS:
            raise IsaError(f"dimension count must be 1..{MAX_DIMS}, got {n}")
        new.dim_count = n
        for i in range(n, MAX_DIMS):
            new.dim_length[i] = 1
        new.dim_mask = (1 << MASK_BITS) - 1
    elif op is Opcode.VSETDIML:
        i = insn.cr_index
        if not 0 <= i < MAX_DIMS:
            raise IsaError(f"dim index out of range: {i}")
        if insn.imm < 1:
            raise IsaError(f"dim length must be positive, got {insn.imm}")
        new.dim_length[i] = insn.imm
    elif op is Opcode.VSETMASK:
        i = insn.imm
        if not 0 <= i < MASK_BITS:
            raise IsaError(f"mask index out of range: {i}")
        new.dim_mask |= 1 << i
    elif op is Opcode.VUNSETMASK:
        i = insn.imm
        if not 0 <= i < MASK_BITS:
            raise IsaError(f"mask index out of range: {i}")
        new.dim_mask &= ~(1 << i)
    elif op is Opcode.VSETMASKW:
        i = insn.imm
        if not 0 <= i < MASK_BITS:
            raise IsaError(f"mask index out of range: {i}")
        new.dim_mask = 1 << i
    elif op is Opcode.VSETWIDTH:
        if insn.imm not in INT_WIDTHS:
            raise IsaError(f"register width must be one of {INT_WIDTHS}, got {insn.imm}")
        new.kernel_width_bits = insn.imm
    elif op in (Opcode.VSETLDSTR, Opcode.VSETSTSTR):
        i = insn.cr_index
        if not 0 <= i < MAX_DIMS:
            raise IsaError(f"dim index out of range: {i}")
        target = new.load_stride_cr if op is Opcode.VSETLDSTR else new.store_stride_cr
        target[i] = insn.imm
    return new


def validate_instruction(
    state: ControlState, insn: VectorInstruction, total_lanes: int = DEFAULT_TOTAL_LANES,
    wordlines: int = 256,
) -> str | None:
    """Check an instruction against the current control state.

    Returns a violation description, or None when the instruction is fine.
    Never raises: validation runs on untrusted traces.
    """
    if insn.op_class is OpClass.CONFIG:
        return None
    if state.total_elements() > total_lanes:
        return (
            f"lane budget exceeded: shape {state.shape} has "
            f"{state.total_elements()} elements > {total_lanes} lanes"
        )
    if not state.mask_is_full() and state.dim_length[state.top_dim] > MASK_BITS:
        return (
            f"top dimension length {state.dim_length[state.top_dim]} exceeds the "
            f"{MASK_BITS}-bit dimension mask while masking is in effect"
        )
    width = state.kernel_width_bits
    if insn.opcode is Opcode.VCVT:
        if max(insn.dtype.width_bits, insn.dtype2.width_bits) > width:
            return (
                f"width mismatch: vcvt {insn.dtype2}->{insn.dtype} does not fit "
                f"kernel width {width}"
            )
    elif insn.dtype is not None and insn.dtype.width_bits != width:
        return (
            f"width mismatch: {insn.opcode.value}.{insn.dtype} vs kernel width {width}"
        )
    capacity = wordlines // width
    for reg in insn.registers():
        if not 0 <= reg < capacity:
            return f"register v{reg} out of range (capacity {capacity} at width {width})"
    return None


# --- textual program format -------------------------------------------------
#
#   <opcode>[.<suffix>[.<src suffix>]] [vDst] [vSrc...] [scalars] [modes=a,b,c,d]
#   scalar <count> [load=<addr>]
#   # comment
#
# Byte addresses in hex.  Immediates are integers (bit patterns for floats).

_ARITY = {
    Opcode.VSETDIMC: ("imm",),
    Opcode.VSETDIML: ("cr", "imm"),
    Opcode.VSETMASK: ("imm",),
    Opcode.VUNSETMASK: ("imm",),
    Opcode.VSETMASKW: ("imm",),
    Opcode.VSETWIDTH: ("imm",),
    Opcode.VSETLDSTR: ("cr", "imm"),
    Opcode.VSETSTSTR: ("cr", "imm"),
    Opcode.VCVT: ("vd", "vs"),
    Opcode.VCPY: ("vd", "vs"),
    Opcode.VSLD: ("vd", "base"),
    Opcode.VRLD: ("vd", "base"),
    Opcode.VSST: ("vs", "base"),
    Opcode.VRST: ("vs", "base"),
    Opcode.VSETDUP: ("vd", "imm"),
    Opcode.VSHIL: ("vd", "vs", "imm"),
    Opcode.VSHIR: ("vd", "vs", "imm"),
    Opcode.VROTIL: ("vd", "vs", "imm"),
    Opcode.VROTIR: ("vd", "vs", "imm"),
    Opcode.VSHRL: ("vd", "vs", "vs"),
    Opcode.VSHRR: ("vd", "vs", "vs"),
    Opcode.VADD: ("vd", "vs", "vs"),
    Opcode.VSUB: ("vd", "vs", "vs"),
    Opcode.VMUL: ("vd", "vs", "vs"),
    Opcode.VMIN: ("vd", "vs", "vs"),
    Opcode.VMAX: ("vd", "vs", "vs"),
    Opcode.VXOR: ("vd", "vs", "vs"),
    Opcode.VGT: ("vs", "vs"),
    Opcode.VGTE: ("vs", "vs"),
    Opcode.VLT: ("vs", "vs"),
    Opcode.VLTE: ("vs", "vs"),
    Opcode.VEQ: ("vs", "vs"),
    Opcode.VNEQ: ("vs", "vs"),
}

_OPCODES_BY_NAME = {op.value: op for op in Opcode}


def _parse_int(tok: str, line_no: int) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise DecodeError(f"bad integer {tok!r}", line_no) from None


def _parse_reg(tok: str, line_no: int) -> int:
    if not tok.startswith("v") or not tok[1:].isdigit():
        raise DecodeError(f"expected register like v3, got {tok!r}", line_no)
    return int(tok[1:])


def decode_line(line: str, line_no: int = 0) -> ProgramItem | None:
    """Decode one trace line; returns None for blanks and comments."""
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    toks = text.split()
    head = toks[0]
    if head == "scalar":
        if len(toks) < 2:
            raise DecodeError("scalar marker needs a count", line_no)
        count = _parse_int(toks[1], line_no)
        if count < 0:
            raise DecodeError(f"scalar count must be >= 0, got {count}", line_no)
        load_addr = None
        for extra in toks[2:]:
            if extra.startswith("load="):
                load_addr = _parse_int(extra[5:], line_no)
            else:
                raise DecodeError(f"unexpected token {extra!r}", line_no)
        return ScalarMarker(count, load_addr)

    parts = head.split(".")
    name = parts[0]
    op = _OPCODES_BY_NAME.get(name)
    if op is None:
        raise DecodeError(f"unknown opcode {name!r}", line_no)
    dtype = dtype2 = None
    if op.op_class is OpClass.CONFIG:
        if len(parts) != 1:
            raise DecodeError(f"config op {name} takes no data type suffix", line_no)
    elif op is Opcode.VCVT:
        if len(parts) != 3:
            raise DecodeError("vcvt needs destination and source suffixes", line_no)
        try:
            dtype, dtype2 = DTYPES[parts[1]], DTYPES[parts[2]]
        except KeyError as exc:
            raise DecodeError(f"unknown data type suffix {exc.args[0]!r}", line_no) from None
    else:
        if len(parts) != 2:
            raise DecodeError(f"{name} needs exactly one data type suffix", line_no)
        dtype = DTYPES.get(parts[1])
        if dtype is None:
            raise DecodeError(f"unknown data type suffix {parts[1]!r}", line_no)

    mode = None
    rest = []
    for tok in toks[1:]:
        if tok.startswith("modes="):
            try:
                mode = mode_byte(*(int(m) for m in tok[6:].split(",")))
            except (ValueError, IsaError):
                raise DecodeError(f"bad stride modes {tok!r}", line_no) from None
        else:
            rest.append(tok)

    spec = _ARITY[op]
    if len(rest) != len(spec):
        raise DecodeError(
            f"{name} expects {len(spec)} operand(s), got {len(rest)}", line_no
        )
    dest = None
    sources: list[int] = []
    base = imm = cr_index = None
    for slot, tok in zip(spec, rest):
        if slot == "vd":
            dest = _parse_reg(tok, line_no)
        elif slot == "vs":
            sources.append(_parse_reg(tok, line_no))
        elif slot == "base":
            base = _parse_int(tok, line_no)
        elif slot == "imm":
            imm = _parse_int(tok, line_no)
        elif slot == "cr":
            cr_index = _parse_int(tok, line_no)
    if op.op_class is OpClass.MEMORY:
        if mode is None:
            raise DecodeError(f"{name} requires modes=", line_no)
    elif mode is not None:
        raise DecodeError(f"{name} takes no stride modes", line_no)
    return VectorInstruction(
        opcode=op,
        dtype=dtype,
        dtype2=dtype2,
        dest=dest,
        sources=tuple(sources),
        base=base,
        mode_byte=mode,
        imm=imm,
        cr_index=cr_index,
    )


def decode_program(text: str) -> list[ProgramItem]:
    """Decode a whole trace; raises DecodeError with the offending line."""
    items = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        item = decode_line(line, line_no)
        if item is not None:
            items.append(item)
    return items


def encode_item(item: ProgramItem) -> str:
    """Render a program item in the textual format (inverse of decode)."""
    if isinstance(item, ScalarMarker):
        s = f"scalar {item.count}"
        if item.load_addr is not None:
            s += f" load={_hex(item.load_addr)}"
        return s
    insn = item
    op = insn.opcode
    head = op.value
    if op is Opcode.VCVT:
        head += f".{insn.dtype}.{insn.dtype2}"
    elif insn.dtype is not None:
        head += f".{insn.dtype}"
    out = [head]
    spec = _ARITY[op]
    srcs = list(insn.sources)
    for slot in spec:
        if slot == "vd":
            out.append(f"v{insn.dest}")
        elif slot == "vs":
            out.append(f"v{srcs.pop(0)}")
        elif slot == "base":
            out.append(_hex(insn.base))
        elif slot == "imm":
            out.append(str(insn.imm))
        elif slot == "cr":
            out.append(str(insn.cr_index))
    if insn.mode_byte is not None:
        out.append("modes=" + ",".join(str(m) for m in insn.modes()))
    return " ".join(out)


def encode_program(items: list[ProgramItem]) -> str:
    return "\n".join(encode_item(item) for item in items) + "\n"


def _hex(value: int) -> str:
    return f"-0x{-value:x}" if value < 0 else f"0x{value:x}"


# convenience constructors used by kernel builders and tests

def cfg(op: Opcode, *args: int) -> VectorInstruction:
    spec = _ARITY[op]
    kwargs = {}
    for slot, val in zip(spec, args):
        kwargs["cr_index" if slot == "cr" else "imm"] = val
    return VectorInstruction(opcode=op, **kwargs)


def arith(op: Opcode, dtype: DataType, dest: int, *sources: int, imm: int | None = None) -> VectorInstruction:
    return VectorInstruction(op, dtype=dtype, dest=dest, sources=tuple(sources), imm=imm)


def load(op: Opcode, dtype: DataType, dest: int, base: int, *modes: int) -> VectorInstruction:
    return VectorInstruction(op, dtype=dtype, dest=dest, base=base, mode_byte=mode_byte(*modes))


def store(op: Opcode, dtype: DataType, src: int, base: int, *modes: int) -> VectorInstruction:
    return VectorInstruction(op, dtype=dtype, sources=(src,), base=base, mode_byte=mode_byte(*modes))
