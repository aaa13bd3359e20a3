"""Kernel library: data-parallel reference kernels in two ISA flavors.

Each builder allocates and fills the modeled memory, computes a scalar
golden result, and emits virtual-register traces for the multi-dimensional
flavor (``mve``) and the 1D long-vector baseline (``rvv1d``).  Both flavors
target the same engine so differences isolate ISA expressiveness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import MachineConfig
from .isa import (
    DTYPES,
    DataType,
    Opcode,
    ProgramItem,
    ScalarMarker,
    arith,
    cfg,
    load,
    store,
)
from .lowering import LoweringReport, lower_rvv1d
from .memory import Memory

POINTER_BYTES = 8


class KernelBuildError(Exception):
    pass


@dataclass
class KernelInstance:
    """One prepared kernel run: memory image, traces, and golden outputs."""

    name: str
    memory: Memory
    width_bits: int
    spill_base: int
    golden: dict[str, np.ndarray]
    observe: Callable[[Memory], dict[str, np.ndarray]]
    traces: dict[str, list[ProgramItem]]
    lowering: LoweringReport | None = None
    meta: dict = field(default_factory=dict)

    def trace(self, isa: str) -> list[ProgramItem]:
        if isa not in self.traces:
            raise KernelBuildError(f"unknown isa {isa!r} (have {sorted(self.traces)})")
        return self.traces[isa]


@dataclass(frozen=True)
class KernelDef:
    name: str
    builder: Callable
    dims: int
    defaults: dict


def _finish(
    name: str, mem: Memory, dtype: DataType, golden, observe, mve, rvv_base,
    machine: MachineConfig, meta: dict, rvv_scalars: int = 4,
) -> KernelInstance:
    lanes = machine.total_lanes(dtype.width_bits)
    spill = mem.alloc("spill", 8 * lanes * dtype.width_bytes, residency="l2_hit")
    rvv, report = lower_rvv1d(rvv_base, lanes, mem, scalars_per_segment=rvv_scalars)
    return KernelInstance(
        name=name,
        memory=mem,
        width_bits=dtype.width_bits,
        spill_base=spill.base,
        golden=golden,
        observe=observe,
        traces={"mve": mve, "rvv1d": rvv},
        lowering=report,
        meta=meta,
    )


# --- transpose ---------------------------------------------------------------


def build_transpose(machine: MachineConfig, seed: int = 0, m: int = 64, n: int = 49,
                    dtype: str = "dw") -> KernelInstance:
    dt = DTYPES[dtype]
    eb = dt.width_bytes
    lanes = machine.total_lanes(dt.width_bits)
    cols_per_iter = lanes // m
    if cols_per_iter == 0:
        raise KernelBuildError(f"transpose infeasible: m={m} exceeds {lanes} lanes")
    mem = Memory(machine.memory_bytes)
    rng = np.random.default_rng(seed)
    a = rng.integers(-(2**31), 2**31, size=(m, n), dtype=np.int64).astype(np.int32)
    a_buf = mem.alloc("a", a.nbytes)
    mem.write_array(a_buf.base, a)
    out_buf = mem.alloc("out", n * m * eb)

    trace: list[ProgramItem] = [
        cfg(Opcode.VSETDIMC, 2),
        cfg(Opcode.VSETDIML, 0, m),
        cfg(Opcode.VSETDIML, 1, cols_per_iter),
        cfg(Opcode.VSETLDSTR, 0, n),
        cfg(Opcode.VSETSTSTR, 1, m),
    ]
    vreg = 0
    cur = cols_per_iter
    iterations = 0
    for i in range(0, n, cols_per_iter):
        g = min(cols_per_iter, n - i)
        if g != cur:
            trace.append(cfg(Opcode.VSETDIML, 1, g))
            cur = g
        trace.append(ScalarMarker(2))
        v = vreg
        vreg += 1
        trace.append(load(Opcode.VSLD, dt, v, a_buf.base + i * eb, 3, 1))
        trace.append(store(Opcode.VSST, dt, v, out_buf.base + i * m * eb, 1, 3))
        iterations += 1

    golden = {"out": np.ascontiguousarray(a.T)}

    def observe(memory: Memory) -> dict[str, np.ndarray]:
        return {"out": memory.read_array(out_buf.base, n * m, np.int32).reshape(n, m)}

    return _finish("transpose", mem, dt, golden, observe, trace, trace, machine,
                   meta={"iterations": iterations, "m": m, "n": n})


# --- reduction ---------------------------------------------------------------


def build_reduction(machine: MachineConfig, seed: int = 0, n: int = 30000,
                    dtype: str = "dw") -> KernelInstance:
    dt = DTYPES[dtype]
    eb = dt.width_bytes
    lanes = machine.total_lanes(dt.width_bits)
    mem = Memory(machine.memory_bytes)
    rng = np.random.default_rng(seed)
    x = rng.integers(-(2**31), 2**31, size=n, dtype=np.int64).astype(np.int32)
    x_buf = mem.alloc("x", x.nbytes)
    mem.write_array(x_buf.base, x)
    tmp_buf = mem.alloc("tmp", lanes * eb)
    out_buf = mem.alloc("out", lanes * eb)

    trace: list[ProgramItem] = [
        cfg(Opcode.VSETDIMC, 1),
        cfg(Opcode.VSETDIML, 0, lanes),
    ]
    acc, next_vreg = 0, 1
    trace.append(arith(Opcode.VSETDUP, dt, acc, imm=0))
    cur_len = lanes
    for off in range(0, n, lanes):
        chunk = min(lanes, n - off)
        if chunk != cur_len:
            trace.append(cfg(Opcode.VSETDIML, 0, chunk))
            cur_len = chunk
        trace.append(ScalarMarker(2))
        t = next_vreg
        next_vreg += 1
        trace.append(load(Opcode.VSLD, dt, t, x_buf.base + off * eb, 1))
        trace.append(arith(Opcode.VADD, dt, acc, acc, t))

    # vertical halving: mask off the low half, store the high half, reload it
    # at half length, and add the halves
    m = lanes
    steps = 0
    while m > 256:
        half = m // 2
        trace.append(cfg(Opcode.VSETDIMC, 2))
        trace.append(cfg(Opcode.VSETDIML, 0, half))
        trace.append(cfg(Opcode.VSETDIML, 1, 2))
        trace.append(cfg(Opcode.VUNSETMASK, 0))
        trace.append(ScalarMarker(2))
        trace.append(store(Opcode.VSST, dt, acc, tmp_buf.base, 1, 2))
        trace.append(cfg(Opcode.VSETDIMC, 1))
        trace.append(cfg(Opcode.VSETDIML, 0, half))
        trace.append(ScalarMarker(2))
        t = next_vreg
        next_vreg += 1
        trace.append(load(Opcode.VSLD, dt, t, tmp_buf.base + half * eb, 1))
        trace.append(arith(Opcode.VADD, dt, acc, acc, t))
        m = half
        steps += 1

    trace.append(cfg(Opcode.VSETDIMC, 1))
    trace.append(cfg(Opcode.VSETDIML, 0, m))
    trace.append(store(Opcode.VSST, dt, acc, out_buf.base, 1))
    # the tail reduction of the remaining partials runs on the scalar core and
    # reads the freshly stored values
    trace.append(ScalarMarker(m, load_addr=out_buf.base))

    total = np.uint64(int(x.astype(np.int64).sum()) % (1 << 32))
    golden = {"sum": np.array([total], dtype=np.uint64)}
    partials = m

    def observe(memory: Memory) -> dict[str, np.ndarray]:
        vals = memory.read_array(out_buf.base, partials, np.int32)
        got = np.uint64(int(vals.astype(np.int64).sum()) % (1 << 32))
        return {"sum": np.array([got], dtype=np.uint64)}

    return _finish("reduction", mem, dt, golden, observe, trace, trace, machine,
                   meta={"halving_steps": steps, "partials": partials, "n": n})


# --- h2v2 upsample -----------------------------------------------------------


def build_upsample(machine: MachineConfig, seed: int = 0, rows: int = 32,
                   cols: int = 32) -> KernelInstance:
    dt = DTYPES["ub"]
    lanes = machine.total_lanes(dt.width_bits)
    rows_per_iter = lanes // (2 * cols)
    rows_per_iter_1d = lanes // cols
    if rows_per_iter == 0:
        raise KernelBuildError(f"upsample infeasible: 2*cols={2*cols} exceeds {lanes} lanes")
    mem = Memory(machine.memory_bytes)
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(rows, cols), dtype=np.int64).astype(np.uint8)

    # rows live at scattered addresses, reached through pointer tables
    in_region = mem.alloc("in_rows", rows * cols)
    in_perm = rng.permutation(rows)
    in_ptrs = np.array([in_region.base + int(in_perm[r]) * cols for r in range(rows)],
                       dtype=np.uint64)
    for r in range(rows):
        mem.write_array(int(in_ptrs[r]), img[r])
    out_region = mem.alloc("out_rows", 2 * rows * 2 * cols)
    out_perm = rng.permutation(2 * rows)
    out_ptrs = np.array(
        [out_region.base + int(out_perm[q]) * 2 * cols for q in range(2 * rows)],
        dtype=np.uint64,
    )

    in_tbl = mem.alloc("in_ptr_table", rows * POINTER_BYTES)
    mem.write_array(in_tbl.base, in_ptrs)
    t_even = mem.alloc("out_even_table", rows * POINTER_BYTES)
    mem.write_array(t_even.base, out_ptrs[0::2])
    t_odd = mem.alloc("out_odd_table", rows * POINTER_BYTES)
    mem.write_array(t_odd.base, out_ptrs[1::2])
    # column-offset variants for the 1D flavor's stride-2 stores
    t_even1 = mem.alloc("out_even1_table", rows * POINTER_BYTES)
    mem.write_array(t_even1.base, out_ptrs[0::2] + np.uint64(1))
    t_odd1 = mem.alloc("out_odd1_table", rows * POINTER_BYTES)
    mem.write_array(t_odd1.base, out_ptrs[1::2] + np.uint64(1))

    # multi-dimensional flavor: one random load replicates each pixel twice
    # horizontally; two random stores duplicate the row vertically
    mve: list[ProgramItem] = [
        cfg(Opcode.VSETDIMC, 3),
        cfg(Opcode.VSETDIML, 0, 2),
        cfg(Opcode.VSETDIML, 1, cols),
        cfg(Opcode.VSETDIML, 2, rows_per_iter),
    ]
    vreg = 0
    cur = rows_per_iter
    for r0 in range(0, rows, rows_per_iter):
        rb = min(rows_per_iter, rows - r0)
        if rb != cur:
            mve.append(cfg(Opcode.VSETDIML, 2, rb))
            cur = rb
        mve.append(ScalarMarker(3))
        v = vreg
        vreg += 1
        mve.append(load(Opcode.VRLD, dt, v, in_tbl.base + r0 * POINTER_BYTES, 0, 1))
        mve.append(store(Opcode.VRST, dt, v, t_even.base + r0 * POINTER_BYTES, 1, 2))
        mve.append(store(Opcode.VRST, dt, v, t_odd.base + r0 * POINTER_BYTES, 1, 2))

    # 1D-friendly formulation: plain row loads, doubling through four
    # stride-2 stores (this is what the baseline lowering expands)
    rvv_base: list[ProgramItem] = [
        cfg(Opcode.VSETDIMC, 2),
        cfg(Opcode.VSETDIML, 0, cols),
        cfg(Opcode.VSETDIML, 1, rows_per_iter_1d),
        cfg(Opcode.VSETSTSTR, 0, 2),
    ]
    vreg = 0
    cur = rows_per_iter_1d
    for r0 in range(0, rows, rows_per_iter_1d):
        rb = min(rows_per_iter_1d, rows - r0)
        if rb != cur:
            rvv_base.append(cfg(Opcode.VSETDIML, 1, rb))
            cur = rb
        rvv_base.append(ScalarMarker(3))
        v = vreg
        vreg += 1
        rvv_base.append(load(Opcode.VRLD, dt, v, in_tbl.base + r0 * POINTER_BYTES, 1))
        for tbl in (t_even, t_even1, t_odd, t_odd1):
            rvv_base.append(store(Opcode.VRST, dt, v, tbl.base + r0 * POINTER_BYTES, 3))

    expected = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
    golden = {"out": expected}

    def observe(memory: Memory) -> dict[str, np.ndarray]:
        out = np.zeros((2 * rows, 2 * cols), dtype=np.uint8)
        for q in range(2 * rows):
            out[q] = memory.read_array(int(out_ptrs[q]), 2 * cols, np.uint8)
        return {"out": out}

    return _finish("upsample", mem, dt, golden, observe, mve, rvv_base, machine,
                   meta={"rows": rows, "cols": cols})


# --- replicated GEMM ---------------------------------------------------------


def build_gemm(machine: MachineConfig, seed: int = 0, nr: int = 32, k: int = 16,
               mc: int = 128, dtype: str = "dw") -> KernelInstance:
    dt = DTYPES[dtype]
    eb = dt.width_bytes
    lanes = machine.total_lanes(dt.width_bits)
    rows_per_iter = lanes // mc
    if rows_per_iter == 0:
        raise KernelBuildError(f"gemm infeasible: mc={mc} exceeds {lanes} lanes")
    mem = Memory(machine.memory_bytes)
    rng = np.random.default_rng(seed)
    if dt.is_float:
        a = rng.uniform(-2.0, 2.0, size=(nr, k)).astype(np.float32)
        b = rng.uniform(-2.0, 2.0, size=(k, mc)).astype(np.float32)
    else:
        a = rng.integers(-100, 100, size=(nr, k), dtype=np.int64).astype(np.int32)
        b = rng.integers(-100, 100, size=(k, mc), dtype=np.int64).astype(np.int32)
    a_buf = mem.alloc("a", a.nbytes)
    mem.write_array(a_buf.base, a)
    b_buf = mem.alloc("b", b.nbytes)
    mem.write_array(b_buf.base, b)
    out_buf = mem.alloc("out", nr * mc * eb)

    trace: list[ProgramItem] = [
        cfg(Opcode.VSETDIMC, 2),
        cfg(Opcode.VSETDIML, 0, mc),
        cfg(Opcode.VSETDIML, 1, rows_per_iter),
        cfg(Opcode.VSETLDSTR, 1, k),
    ]
    next_vreg = 0
    cur = rows_per_iter
    for n0 in range(0, nr, rows_per_iter):
        rb = min(rows_per_iter, nr - n0)
        if rb != cur:
            trace.append(cfg(Opcode.VSETDIML, 1, rb))
            cur = rb
        acc = next_vreg
        next_vreg += 1
        trace.append(arith(Opcode.VSETDUP, dt, acc, imm=0))
        for kk in range(k):
            trace.append(ScalarMarker(2))
            in_v, wt_v, prod = next_vreg, next_vreg + 1, next_vreg + 2
            next_vreg += 3
            trace.append(load(Opcode.VSLD, dt, in_v,
                              a_buf.base + (n0 * k + kk) * eb, 0, 3))
            trace.append(load(Opcode.VSLD, dt, wt_v, b_buf.base + kk * mc * eb, 1, 0))
            trace.append(arith(Opcode.VMUL, dt, prod, in_v, wt_v))
            trace.append(arith(Opcode.VADD, dt, acc, acc, prod))
        trace.append(store(Opcode.VSST, dt, acc, out_buf.base + n0 * mc * eb, 1, 2))

    if dt.is_float:
        acc = np.zeros((nr, mc), dtype=np.float32)
        for kk in range(k):
            acc = acc + a[:, kk : kk + 1] * b[kk : kk + 1, :]
        golden = {"out": acc}

        def observe(memory: Memory) -> dict[str, np.ndarray]:
            return {"out": memory.read_array(out_buf.base, nr * mc, np.float32).reshape(nr, mc)}

    else:
        ref = (a.astype(np.int64) @ b.astype(np.int64)) % (1 << 32)
        golden = {"out": ref.astype(np.uint32)}

        def observe(memory: Memory) -> dict[str, np.ndarray]:
            got = memory.read_array(out_buf.base, nr * mc, np.uint32).reshape(nr, mc)
            return {"out": got}

    return _finish("gemm", mem, dt, golden, observe, trace, trace, machine,
                   meta={"nr": nr, "k": k, "mc": mc,
                         "iterations": math.ceil(nr / rows_per_iter),
                         "segments": math.ceil(lanes / mc)})


# --- sparse matrix x dense matrix --------------------------------------------


def build_spmm(machine: MachineConfig, seed: int = 0, nr: int = 48, k: int = 48,
               mc: int = 64, density: float = 0.08,
               identity: bool = False) -> KernelInstance:
    dt = DTYPES["dw"]
    eb = dt.width_bytes
    lanes = machine.total_lanes(dt.width_bits)
    rows_per_iter = lanes // mc
    if rows_per_iter == 0:
        raise KernelBuildError(f"spmm infeasible: mc={mc} exceeds {lanes} lanes")
    rows_per_iter = min(rows_per_iter, 256)  # dimension mask bounds the block
    mem = Memory(machine.memory_bytes)
    rng = np.random.default_rng(seed)
    if identity:
        if nr != k:
            raise KernelBuildError("identity spmm needs nr == k")
        dense = np.eye(nr, dtype=np.int32)
    else:
        dense = rng.integers(-50, 50, size=(nr, k), dtype=np.int64).astype(np.int32)
        dense[rng.random((nr, k)) >= density] = 0
    b = rng.integers(-50, 50, size=(k, mc), dtype=np.int64).astype(np.int32)

    # CSR arrays live in modeled memory; the core walks them to build the
    # per-step pointer tables (charged as scalar work)
    nz_rows, nz_cols = np.nonzero(dense)
    values = dense[nz_rows, nz_cols].astype(np.int32)
    col_idx = nz_cols.astype(np.int32)
    row_ptr = np.zeros(nr + 1, dtype=np.int32)
    for r in nz_rows:
        row_ptr[r + 1] += 1
    row_ptr = np.cumsum(row_ptr).astype(np.int32)

    val_buf = mem.alloc("csr_values", max(values.nbytes, 4))
    if len(values):
        mem.write_array(val_buf.base, values)
    ci_buf = mem.alloc("csr_colidx", max(col_idx.nbytes, 4))
    if len(col_idx):
        mem.write_array(ci_buf.base, col_idx)
    rp_buf = mem.alloc("csr_rowptr", row_ptr.nbytes)
    mem.write_array(rp_buf.base, row_ptr)
    b_buf = mem.alloc("b", b.nbytes)
    mem.write_array(b_buf.base, b)
    out_buf = mem.alloc("out", nr * mc * eb)

    # first pass: the core walks the CSR structure and lays out one pointer
    # table per (block, step, operand) in a scratch region
    blocks = []
    n_tables = 0
    for n0 in range(0, nr, rows_per_iter):
        rb = min(rows_per_iter, nr - n0)
        nnz = row_ptr[n0 + 1 : n0 + rb + 1] - row_ptr[n0 : n0 + rb]
        max_nnz = int(nnz.max()) if rb else 0
        blocks.append((n0, rb, nnz, max_nnz))
        n_tables += 2 * max_nnz
    tbl_region = mem.alloc("ptr_tables", max(n_tables * rows_per_iter * POINTER_BYTES, 8))
    tbl_cursor = tbl_region.base

    def place_table(ptrs: np.ndarray) -> int:
        nonlocal tbl_cursor
        base = tbl_cursor
        mem.write_array(base, ptrs)
        tbl_cursor += ptrs.nbytes
        return base

    trace: list[ProgramItem] = [
        cfg(Opcode.VSETDIML, 0, mc),
    ]
    next_vreg = 0
    for n0, rb, nnz, max_nnz in blocks:
        if max_nnz == 0:
            continue  # empty rows contribute nothing; output stays zero
        trace.append(cfg(Opcode.VSETDIMC, 2))
        trace.append(cfg(Opcode.VSETDIML, 1, rb))
        acc = next_vreg
        next_vreg += 1
        trace.append(arith(Opcode.VSETDUP, dt, acc, imm=0))
        for t in range(max_nnz):
            for y in range(rb):
                if nnz[y] == t:
                    trace.append(cfg(Opcode.VUNSETMASK, y))
            live = int((nnz > t).sum())
            val_ptrs = np.zeros(rb, dtype=np.uint64)
            row_ptrs = np.zeros(rb, dtype=np.uint64)
            for y in range(rb):
                if nnz[y] > t:
                    at = int(row_ptr[n0 + y]) + t
                    val_ptrs[y] = val_buf.base + at * 4
                    row_ptrs[y] = b_buf.base + int(col_idx[at]) * mc * eb
            trace.append(ScalarMarker(2 * live))
            val_v, row_v, prod = next_vreg, next_vreg + 1, next_vreg + 2
            next_vreg += 3
            trace.append(load(Opcode.VRLD, dt, val_v, place_table(val_ptrs), 0))
            trace.append(load(Opcode.VRLD, dt, row_v, place_table(row_ptrs), 1))
            trace.append(arith(Opcode.VMUL, dt, prod, val_v, row_v))
            trace.append(arith(Opcode.VADD, dt, acc, acc, prod))
        trace.append(cfg(Opcode.VSETDIMC, 2))  # drop the exhaustion mask
        trace.append(store(Opcode.VSST, dt, acc, out_buf.base + n0 * mc * eb, 1, 2))

    ref = (dense.astype(np.int64) @ b.astype(np.int64)) % (1 << 32)
    golden = {"out": ref.astype(np.uint32)}

    def observe(memory: Memory) -> dict[str, np.ndarray]:
        got = memory.read_array(out_buf.base, nr * mc, np.uint32).reshape(nr, mc)
        return {"out": got}

    return _finish("spmm", mem, dt, golden, observe, trace, trace, machine,
                   meta={"nr": nr, "k": k, "mc": mc, "nnz": int(len(values))})


def build_gemm_f32(machine: MachineConfig, seed: int = 0, nr: int = 64, k: int = 8,
                   mc: int = 128) -> KernelInstance:
    inst = build_gemm(machine, seed=seed, nr=nr, k=k, mc=mc, dtype="f")
    inst.name = "gemm_f32"
    return inst


# default sizes fill the register across all schemes' lane counts while
# keeping dimension 0 within the smallest (bit-parallel) lane budget
KERNELS: dict[str, KernelDef] = {
    "transpose": KernelDef("transpose", build_transpose, 2, {"m": 128, "n": 64}),
    "reduction": KernelDef("reduction", build_reduction, 1, {"n": 30000}),
    "upsample": KernelDef("upsample", build_upsample, 3, {"rows": 128, "cols": 32}),
    "gemm": KernelDef("gemm", build_gemm, 2, {"nr": 64, "k": 16, "mc": 128}),
    "gemm_f32": KernelDef("gemm_f32", build_gemm_f32, 2, {"nr": 64, "k": 8, "mc": 128}),
    "spmm": KernelDef("spmm", build_spmm, 2,
                      {"nr": 128, "k": 48, "mc": 64, "density": 0.08, "identity": False}),
}


def build_kernel(name: str, machine: MachineConfig, seed: int = 0, **params) -> KernelInstance:
    if name not in KERNELS:
        raise KernelBuildError(f"unknown kernel {name!r} (have {sorted(KERNELS)})")
    kdef = KERNELS[name]
    args = dict(kdef.defaults)
    for key, value in params.items():
        if value is None:
            continue
        if key not in kdef.defaults:
            raise KernelBuildError(f"kernel {name!r} takes no parameter {key!r}")
        args[key] = value
    return kdef.builder(machine, seed=seed, **args)
