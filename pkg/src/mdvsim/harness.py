"""End-to-end kernel runs: build, compile, simulate, verify against golden."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import MachineConfig, machine_for_scheme
from .engine import SimEngine, SimStats
from .kernels import KernelInstance, build_kernel
from .vcompile import CompileReport, compile_trace

FLOAT_ULP_TOLERANCE = 2


@dataclass
class Mismatch:
    buffer: str
    index: tuple
    expected: object
    actual: object

    def __str__(self) -> str:
        return (f"{self.buffer}{list(self.index)}: expected {self.expected}, "
                f"got {self.actual}")


@dataclass
class RunResult:
    kernel: str
    isa: str
    scheme: str
    seed: int
    stats: SimStats
    compile_report: CompileReport
    instance: KernelInstance
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def ulp_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Units-in-last-place distance between same-shape float arrays."""
    if a.dtype == np.float32:
        ia = a.view(np.int32).astype(np.int64)
        ib = b.view(np.int32).astype(np.int64)
        span = np.int64(1) << 31
    elif a.dtype == np.float16:
        ia = a.view(np.int16).astype(np.int64)
        ib = b.view(np.int16).astype(np.int64)
        span = np.int64(1) << 15
    else:
        raise TypeError(f"expected float16/float32, got {a.dtype}")
    # map sign-magnitude float ordering onto a monotone integer lattice
    la = np.where(ia < 0, -(ia + span), ia)
    lb = np.where(ib < 0, -(ib + span), ib)
    return np.abs(la - lb)


def compare_outputs(golden: dict[str, np.ndarray], observed: dict[str, np.ndarray],
                    max_mismatches: int = 5) -> list[Mismatch]:
    """First differing elements per buffer; floats compare within 2 ulp."""
    out: list[Mismatch] = []
    for name, want in golden.items():
        got = observed[name]
        if want.dtype.kind == "f":
            bad = ulp_distance(got.astype(want.dtype), want) > FLOAT_ULP_TOLERANCE
        else:
            bad = got.astype(want.dtype) != want
        if bad.any():
            for idx in np.argwhere(bad)[:max_mismatches]:
                key = tuple(int(i) for i in idx)
                out.append(Mismatch(name, key, want[key], got[key]))
    return out


def run_kernel(
    kernel: str,
    isa: str = "mve",
    scheme: str = "bs",
    seed: int = 0,
    machine: MachineConfig | None = None,
    verify: bool = True,
    **params,
) -> RunResult:
    cfg = machine_for_scheme(scheme, machine)
    inst = build_kernel(kernel, cfg, seed=seed, **params)
    capacity = cfg.register_capacity(inst.width_bits)
    program, report = compile_trace(
        inst.trace(isa),
        capacity,
        inst.spill_base,
        cfg.total_lanes(inst.width_bits),
    )
    engine = SimEngine(cfg, memory=inst.memory, width_bits=inst.width_bits)
    stats = engine.run(program)
    mismatches = []
    if verify:
        mismatches = compare_outputs(inst.golden, inst.observe(inst.memory))
    return RunResult(kernel, isa, scheme, seed, stats, report, inst, mismatches)
