"""Controller and core-issue model: queueing, masking, barriers, accounting.

The scalar core issues vector instructions in program order into the
controller's instruction queue.  Each control block (CB) walks the queue at
its own pace, skipping entries whose CB bit is masked off; an entry retires
once every CB named in its issue mask has acknowledged it.  Vector memory
accesses are mutually exclusive: while one is incomplete anywhere, no CB may
begin another, and within one access the per-CB portions share the single
cache port.  Functional state is advanced by the sequential value machine at
issue time, so timing can never alter computed values.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import addrgen
from .config import MachineConfig
from .funcexec import FunctionalMachine
from .isa import (
    ControlState,
    Opcode,
    OpClass,
    ProgramItem,
    ScalarMarker,
    VectorInstruction,
    apply_config,
    validate_instruction,
)
from .layout import LaneGeometry, cb_mask_vector
from .memmodel import access_time
from .memory import Memory


class EngineError(Exception):
    pass


class ValidationFailure(EngineError):
    pass


class EngineDeadlock(EngineError):
    def __init__(self, message: str, queue_snapshot: list):
        super().__init__(f"{message}; queue snapshot: {queue_snapshot}")
        self.queue_snapshot = queue_snapshot


@dataclass
class EntryRecord:
    """Bookkeeping for one issued queue entry (for stats and invariants)."""

    index: int
    insn: VectorInstruction
    cb_mask: int
    enqueue_time: int
    completion_time: int = 0
    cb_intervals: list = field(default_factory=list)  # (cb, start, end, kind)


@dataclass
class SimStats:
    makespan: int = 0
    cb_idle: dict[int, int] = field(default_factory=dict)
    cb_compute: dict[int, int] = field(default_factory=dict)
    cb_mem: dict[int, int] = field(default_factory=dict)
    vinsts: dict[str, int] = field(
        default_factory=lambda: {"config": 0, "memory": 0, "move": 0, "arith": 0}
    )
    sinsts: int = 0
    bytes_moved: int = 0

    @property
    def cycles_idle(self) -> int:
        return sum(self.cb_idle.values())

    @property
    def cycles_compute(self) -> int:
        return sum(self.cb_compute.values())

    @property
    def cycles_mem(self) -> int:
        return sum(self.cb_mem.values())

    @property
    def vinsts_total(self) -> int:
        return sum(self.vinsts.values())

    @property
    def utilization(self) -> float:
        """Mean busy fraction over CBs: the share of time a CB has work."""
        if self.makespan == 0 or not self.cb_idle:
            return 0.0
        cbs = len(self.cb_idle)
        busy = self.cycles_compute + self.cycles_mem
        return busy / (cbs * self.makespan)

    @property
    def compute_fraction(self) -> float:
        if self.makespan == 0 or not self.cb_idle:
            return 0.0
        return self.cycles_compute / (len(self.cb_idle) * self.makespan)


class SimEngine:
    """One simulation instance: owns its value machine and cycle state."""

    def __init__(self, machine: MachineConfig, memory: Memory | None = None,
                 width_bits: int | None = None):
        self.machine = machine
        self.memory = memory if memory is not None else Memory(machine.memory_bytes)
        self.width_bits = width_bits if width_bits is not None else 32
        self.lanes: LaneGeometry = machine.lane_geometry(self.width_bits)
        self.func = FunctionalMachine(
            memory=self.memory,
            total_lanes=self.lanes.total_lanes,
            wordlines=machine.geometry.wordlines_per_array,
        )
        self.stats = SimStats()
        self.records: list[EntryRecord] = []
        # clocks
        self.core_time = 0
        self.cb_free = [0] * self.lanes.cb_count
        self.mem_cursor = 0
        self._inflight: list[int] = []  # completion-time heap
        self._pending_stores: list[tuple[int, int, int]] = []  # (lo, hi, completion)
        self._index = 0
        self._busy_compute = [0] * self.lanes.cb_count
        self._busy_mem = [0] * self.lanes.cb_count
        self._last_completion = 0

    # -- program-level API ---------------------------------------------------

    @staticmethod
    def program_width(program: list[ProgramItem]) -> int | None:
        for item in program:
            if isinstance(item, VectorInstruction) and item.opcode is Opcode.VSETWIDTH:
                return item.imm
        return None

    @classmethod
    def for_program(cls, machine: MachineConfig, program: list[ProgramItem],
                    memory: Memory | None = None) -> "SimEngine":
        width = cls.program_width(program) or 32
        return cls(machine, memory=memory, width_bits=width)

    def validate(self, program: list[ProgramItem]):
        state = ControlState()
        for i, item in enumerate(program):
            if isinstance(item, ScalarMarker):
                continue
            if item.op_class is OpClass.CONFIG:
                state = apply_config(state, item)
                continue
            violation = validate_instruction(
                state, item, total_lanes=self.lanes.total_lanes,
                wordlines=self.machine.geometry.wordlines_per_array,
            )
            if violation:
                raise ValidationFailure(f"instruction {i}: {violation}")

    def run(self, program: list[ProgramItem]) -> SimStats:
        self.validate(program)
        if self.machine.core.inflight_cap < 1:
            raise EngineDeadlock("instruction queue has no capacity", [])
        for item in program:
            self.issue_step(item)
        self.finish()
        return self.stats

    # -- issue-side stepping ---------------------------------------------------

    def issue_step(self, item: ProgramItem) -> list[EntryRecord]:
        """Advance the core over one program item; returns entries issued."""
        if isinstance(item, ScalarMarker):
            self._issue_scalar(item)
            return []
        if item.op_class is OpClass.CONFIG:
            self.core_time += self.machine.core.vector_issue_latency
            self.stats.vinsts["config"] += 1
            self.func.step(item)
            return []
        return [self._issue_vector(item)]

    def memory_barrier(self, at_time: int) -> int:
        """Earliest time a new vector memory access may begin anywhere."""
        return max(at_time, self.mem_cursor)

    def finish(self):
        makespan = max(self.core_time, self._last_completion)
        self.stats.makespan = makespan
        for cb in range(self.lanes.cb_count):
            self.stats.cb_compute[cb] = self._busy_compute[cb]
            self.stats.cb_mem[cb] = self._busy_mem[cb]
            self.stats.cb_idle[cb] = makespan - self._busy_compute[cb] - self._busy_mem[cb]

    # -- internals -------------------------------------------------------------

    def _issue_scalar(self, marker: ScalarMarker):
        if marker.load_addr is not None:
            # scalar load vs. pending vector stores: the write buffer holds the
            # conservative address range of each incomplete store
            for lo, hi, completion in self._pending_stores:
                if lo <= marker.load_addr < hi and completion > self.core_time:
                    self.core_time = completion
        self.core_time += self.machine.core.scalar_cycles(marker.count)
        self.stats.sinsts += marker.count

    def _wait_for_slot(self):
        cap = self.machine.core.inflight_cap
        while self._inflight and self._inflight[0] <= self.core_time:
            heapq.heappop(self._inflight)
        if len(self._inflight) >= cap:
            self.core_time = max(self.core_time, self._inflight[0])
            while self._inflight and self._inflight[0] <= self.core_time:
                heapq.heappop(self._inflight)

    def _issue_vector(self, insn: VectorInstruction) -> EntryRecord:
        self._wait_for_slot()
        self.core_time += self.machine.core.vector_issue_latency
        enqueue_time = self.core_time
        state_before = self.func.state
        cb_mask = cb_mask_vector(state_before, self.lanes)
        rec = EntryRecord(self._index, insn, cb_mask, enqueue_time)
        self._index += 1

        cls = insn.op_class
        self.stats.vinsts[cls.value] += 1
        plan = self.func.step(insn)  # functional effects happen in program order

        if cls is OpClass.MEMORY:
            self._schedule_memory(rec, insn, plan, state_before)
        else:
            self._schedule_compute(rec, insn)
        if not rec.cb_intervals:
            rec.completion_time = enqueue_time  # fully masked: immediate no-op
        heapq.heappush(self._inflight, rec.completion_time)
        self._last_completion = max(self._last_completion, rec.completion_time)
        self.records.append(rec)
        return rec

    def _latency_dtype(self, insn: VectorInstruction):
        if insn.dtype2 is not None and insn.dtype2.width_bits > insn.dtype.width_bits:
            return insn.dtype2
        return insn.dtype

    def _schedule_compute(self, rec: EntryRecord, insn: VectorInstruction):
        lat = self.machine.scheme.latency(insn.opcode, self._latency_dtype(insn))
        completion = rec.enqueue_time
        for cb in range(self.lanes.cb_count):
            if not (rec.cb_mask >> cb) & 1:
                continue
            start = max(rec.enqueue_time, self.cb_free[cb])
            end = start + lat
            rec.cb_intervals.append((cb, start, end, "compute"))
            self.cb_free[cb] = end
            self._busy_compute[cb] += end - start
            completion = max(completion, end)
        rec.completion_time = completion

    def _schedule_memory(self, rec: EntryRecord, insn: VectorInstruction,
                         plan: addrgen.AccessPlan, state: ControlState):
        timing = access_time(plan, self.machine.mem, self.lanes,
                             insn.dtype.width_bits, self.memory)
        self.stats.bytes_moved += timing.bytes_moved
        start_fetch = self.memory_barrier(rec.enqueue_time)
        fetch_done = start_fetch + timing.fetch_cycles
        completion = rec.enqueue_time
        for cb in sorted(timing.fill_per_cb):
            # a CB spends the shared fetch phase plus its own TMU fill and
            # transpose write-back on the access (counted as data access)
            start = max(start_fetch, self.cb_free[cb])
            end = max(fetch_done, self.cb_free[cb]) + timing.fill_per_cb[cb]
            rec.cb_intervals.append((cb, start, end, "mem"))
            self.cb_free[cb] = end
            self._busy_mem[cb] += end - start
            completion = max(completion, end)
        if rec.cb_intervals:
            self.mem_cursor = completion
        rec.completion_time = completion
        if insn.is_store:
            lo, hi = self._store_range(insn, plan, state)
            self._pending_stores.append((lo, hi, rec.completion_time))

    def _store_range(self, insn: VectorInstruction, plan: addrgen.AccessPlan,
                     state: ControlState) -> tuple[int, int]:
        if insn.is_random:
            if len(plan.addrs) == 0:
                return (0, 0)
            return (int(plan.addrs.min()), int(plan.addrs.max()) + plan.elem_bytes)
        strides = addrgen.resolve_modes(state, insn.mode_byte or 0, "store")
        return addrgen.address_range(state, insn.base, strides, insn.dtype.width_bytes)


def run_program(machine: MachineConfig, program: list[ProgramItem],
                memory: Memory | None = None) -> tuple[SimStats, SimEngine]:
    engine = SimEngine.for_program(machine, program, memory=memory)
    stats = engine.run(program)
    return stats, engine
