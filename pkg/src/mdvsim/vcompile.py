"""Kernel-trace compiler: widest-width detection, list scheduling, and
greedy register allocation with live-range splitting.

Traces use unbounded virtual register ids.  Accumulators and masked merges
may redefine a virtual register; a live range spans first definition to last
use.  The register file is narrow (wordlines / kernel width), so allocation
spills whole registers to a scratch buffer, picking the victim whose next
use is furthest away.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .isa import (
    COMPARE_OPS,
    ControlState,
    DTYPES,
    Opcode,
    OpClass,
    ProgramItem,
    ScalarMarker,
    VectorInstruction,
    apply_config,
    cfg,
    load,
    store,
)

UNSIGNED_BY_WIDTH = {8: DTYPES["ub"], 16: DTYPES["uw"], 32: DTYPES["udw"], 64: DTYPES["uqw"]}


class CompileError(Exception):
    pass


@dataclass
class LiveRange:
    vreg: int
    start: int  # first definition
    end: int  # last use or redefinition
    width_bits: int
    uses: list[int] = field(default_factory=list)


@dataclass
class CompileReport:
    width_bits: int = 32
    spills: int = 0
    fills: int = 0
    scheduled: bool = False


def detect_width(trace: list[ProgramItem]) -> int | None:
    """Widest register width used by the trace, or None if it has no typed ops."""
    width = None
    for item in trace:
        if isinstance(item, VectorInstruction) and item.dtype is not None:
            w = item.dtype.width_bits
            if item.dtype2 is not None:
                w = max(w, item.dtype2.width_bits)
            width = w if width is None else max(width, w)
    return width


def inject_width(trace: list[ProgramItem]) -> tuple[list[ProgramItem], int | None]:
    """Prepend the width config detected by liveness over the whole trace."""
    width = detect_width(trace)
    if width is None:
        return list(trace), None
    out = [cfg(Opcode.VSETWIDTH, width)]
    out.extend(item for item in trace
               if not (isinstance(item, VectorInstruction) and item.opcode is Opcode.VSETWIDTH))
    return out, width


def live_ranges(trace: list[ProgramItem]) -> dict[int, LiveRange]:
    ranges: dict[int, LiveRange] = {}
    for i, item in enumerate(trace):
        if not isinstance(item, VectorInstruction):
            continue
        width = item.dtype.width_bits if item.dtype else 0
        for src in item.sources:
            r = ranges.get(src)
            if r is None:
                raise CompileError(f"instruction {i} uses v{src} before definition")
            r.end = max(r.end, i)
            r.uses.append(i)
        if item.dest is not None:
            r = ranges.get(item.dest)
            if r is None:
                ranges[item.dest] = LiveRange(item.dest, i, i, width, uses=[])
            else:
                # redefinition (accumulator / masked merge) extends the range
                r.end = max(r.end, i)
                r.uses.append(i)
    return ranges


# --- scheduling -------------------------------------------------------------


def _build_deps(trace: list[ProgramItem]) -> tuple[list[set[int]], list[set[int]]]:
    """Dependence edges: true/anti/output register deps, a total order on
    memory accesses, and barrier edges around config ops and scalar markers."""
    n = len(trace)
    preds: list[set[int]] = [set() for _ in range(n)]
    succs: list[set[int]] = [set() for _ in range(n)]

    def edge(a: int, b: int):
        if a != b:
            succs[a].add(b)
            preds[b].add(a)

    last_def: dict[int, int] = {}
    last_uses: dict[int, list[int]] = {}
    last_mem: int | None = None
    last_barrier: int | None = None
    for i, item in enumerate(trace):
        is_barrier = isinstance(item, ScalarMarker) or (
            isinstance(item, VectorInstruction) and item.op_class is OpClass.CONFIG
        )
        if is_barrier:
            # configs and scalar runs pin every op on both sides, and chain
            # with the previous barrier
            for j in range(last_barrier if last_barrier is not None else 0, i):
                edge(j, i)
            last_barrier = i
            continue
        if last_barrier is not None:
            edge(last_barrier, i)
        insn = item
        for src in insn.sources:
            if src in last_def:
                edge(last_def[src], i)  # true dependence
            last_uses.setdefault(src, []).append(i)
        if insn.dest is not None:
            for j in last_uses.get(insn.dest, []):
                edge(j, i)  # anti dependence
            if insn.dest in last_def:
                edge(last_def[insn.dest], i)  # output dependence
            last_def[insn.dest] = i
            last_uses[insn.dest] = []
        if insn.is_memory:
            if last_mem is not None:
                edge(last_mem, i)  # memory accesses stay ordered
            last_mem = i
    return preds, succs


def schedule(trace: list[ProgramItem], capacity: int) -> list[ProgramItem]:
    """Bottom-up list schedule that prefers keeping live registers within
    capacity, then shorter live ranges, then original order."""
    n = len(trace)
    if n == 0:
        return []
    preds, succs = _build_deps(trace)
    remaining_succs = [len(s) for s in succs]
    ready = [i for i in range(n) if remaining_succs[i] == 0]
    live: set[int] = set()  # vregs live below the cut
    order: list[int] = []
    scheduled = [False] * n

    def live_delta(i: int) -> int:
        item = trace[i]
        if not isinstance(item, VectorInstruction):
            return 0
        delta = 0
        if item.dest is not None and item.dest in live and item.dest not in item.sources:
            delta -= 1
        for src in set(item.sources):
            if src not in live:
                delta += 1
        return delta

    while ready:
        best = None
        best_key = None
        for i in ready:
            delta = live_delta(i)
            over = 1 if len(live) + delta > capacity else 0
            key = (over, delta, -i)
            if best_key is None or key < best_key:
                best, best_key = i, key
        ready.remove(best)
        scheduled[best] = True
        order.append(best)
        item = trace[best]
        if isinstance(item, VectorInstruction):
            if item.dest is not None:
                live.discard(item.dest)
            for src in item.sources:
                live.add(src)
        for p in preds[best]:
            remaining_succs[p] -= 1
            if remaining_succs[p] == 0:
                ready.append(p)
    if len(order) != n:
        raise CompileError("dependence cycle in trace")
    order.reverse()
    return [trace[i] for i in order]


# --- allocation -------------------------------------------------------------


class _ConfigTracker:
    """Shape/mask/width state mirror, used to rebuild config after a spill."""

    def __init__(self):
        self.state = ControlState()
        self.tag_live = False

    def feed(self, item: ProgramItem):
        if not isinstance(item, VectorInstruction):
            return
        if item.op_class is OpClass.CONFIG:
            self.state = apply_config(self.state, item)
            if item.opcode in (Opcode.VSETDIMC, Opcode.VSETWIDTH):
                self.tag_live = False
        elif item.opcode in COMPARE_OPS:
            self.tag_live = True

    def restore_items(self) -> list[VectorInstruction]:
        s = self.state
        out = [cfg(Opcode.VSETDIMC, s.dim_count)]
        for d in range(s.dim_count):
            out.append(cfg(Opcode.VSETDIML, d, s.dim_length[d]))
        top_len = min(s.dim_length[s.top_dim], 256)
        cleared = [e for e in range(top_len) if not s.mask_bit(e)]
        if cleared:
            enabled = [e for e in range(top_len) if s.mask_bit(e)]
            if len(enabled) == 1:
                out.append(cfg(Opcode.VSETMASKW, enabled[0]))
            else:
                out.extend(cfg(Opcode.VUNSETMASK, e) for e in cleared)
        return out


def allocate(
    trace: list[ProgramItem],
    capacity: int,
    spill_base: int,
    total_lanes: int,
    width_bits: int,
) -> tuple[list[ProgramItem], CompileReport]:
    """Map virtual registers onto ``capacity`` physical registers.

    When pressure exceeds capacity the assigned register whose next use is
    furthest away is spilled: the full register is stored to a scratch slot
    and reloaded right before its next use.  Spill code temporarily switches
    to a flat one-dimensional shape and restores the tracked configuration.
    """
    if capacity < 2:
        raise CompileError(f"cannot allocate binary ops with capacity {capacity}")
    ranges = live_ranges(trace)
    spill_dtype = UNSIGNED_BY_WIDTH[width_bits]
    slot_bytes = total_lanes * spill_dtype.width_bytes
    report = CompileReport(width_bits=width_bits)

    assignment: dict[int, int] = {}  # vreg -> preg
    free = list(range(capacity - 1, -1, -1))
    slots: dict[int, int] = {}  # vreg -> spill slot base
    dirty: dict[int, bool] = {}
    next_slot = 0
    tracker = _ConfigTracker()
    out: list[ProgramItem] = []

    def next_use(vreg: int, after: int) -> int:
        r = ranges[vreg]
        for u in r.uses:
            if u > after:
                return u
        return 1 << 60 if r.end > after else 1 << 61  # dead regs are best victims

    def spill_code(vreg: int, fill: bool) -> list[ProgramItem]:
        nonlocal next_slot
        if tracker.tag_live:
            raise CompileError("cannot spill while tag predication is live")
        if vreg not in slots:
            slots[vreg] = spill_base + next_slot * slot_bytes
            next_slot += 1
        seq: list[ProgramItem] = [
            cfg(Opcode.VSETDIMC, 1),
            cfg(Opcode.VSETDIML, 0, total_lanes),
        ]
        preg = assignment[vreg]
        if fill:
            seq.append(load(Opcode.VSLD, spill_dtype, preg, slots[vreg], 1))
        else:
            seq.append(store(Opcode.VSST, spill_dtype, preg, slots[vreg], 1))
        seq.extend(tracker.restore_items())
        return seq

    def take_preg(for_vreg: int, at: int, in_use: set[int]) -> list[ProgramItem]:
        """Assign a physical register, spilling a victim if needed."""
        inserted: list[ProgramItem] = []
        if not free:
            candidates = [v for v in assignment if v not in in_use]
            if not candidates:
                raise CompileError(f"instruction {at}: too many live operands")
            victim = max(candidates, key=lambda v: (next_use(v, at), -v))
            if dirty.get(victim, False) and next_use(victim, at) < (1 << 60):
                inserted.extend(spill_code(victim, fill=False))
                report.spills += 1
                dirty[victim] = False
            elif next_use(victim, at) < (1 << 60) and victim not in slots:
                # clean only if an up-to-date slot copy exists
                inserted.extend(spill_code(victim, fill=False))
                report.spills += 1
            free.append(assignment.pop(victim))
        assignment[for_vreg] = free.pop()
        return inserted

    for i, item in enumerate(trace):
        if not isinstance(item, VectorInstruction) or item.op_class is OpClass.CONFIG:
            out.append(item)
            tracker.feed(item)
            continue
        insn = item
        in_use = set(insn.sources)
        if insn.dest is not None:
            in_use.add(insn.dest)
        # fills for spilled sources (and merged destinations)
        needs = list(insn.sources)
        if insn.dest is not None and insn.dest in slots and insn.dest not in assignment:
            if ranges[insn.dest].start < i:
                needs.append(insn.dest)
        for vreg in needs:
            if vreg in assignment:
                continue
            if vreg not in slots:
                raise CompileError(f"instruction {i}: v{vreg} neither assigned nor spilled")
            out.extend(take_preg(vreg, i, in_use))
            out.extend(spill_code(vreg, fill=True))
            report.fills += 1
            dirty[vreg] = False
        if insn.dest is not None and insn.dest not in assignment:
            out.extend(take_preg(insn.dest, i, in_use))
        if insn.dest is not None:
            dirty[insn.dest] = True
        renamed = VectorInstruction(
            opcode=insn.opcode,
            dtype=insn.dtype,
            dtype2=insn.dtype2,
            dest=assignment[insn.dest] if insn.dest is not None else None,
            sources=tuple(assignment[s] for s in insn.sources),
            base=insn.base,
            mode_byte=insn.mode_byte,
            imm=insn.imm,
            cr_index=insn.cr_index,
        )
        out.append(renamed)
        tracker.feed(renamed)
        # release registers whose range ended
        for vreg in list(assignment):
            if ranges[vreg].end <= i:
                free.append(assignment.pop(vreg))
                free.sort(reverse=True)
    return out, report


def compile_trace(
    trace: list[ProgramItem],
    capacity: int,
    spill_base: int,
    total_lanes: int,
    do_schedule: bool = True,
) -> tuple[list[ProgramItem], CompileReport]:
    """Full pipeline: width injection, scheduling, allocation."""
    with_width, width = inject_width(trace)
    if width is None:
        return with_width, CompileReport(width_bits=0)
    ordered = schedule(with_width, capacity) if do_schedule else with_width
    program, report = allocate(ordered, capacity, spill_base, total_lanes, width)
    report.scheduled = do_schedule
    return program, report
