"""Modeled byte-addressable memory with named buffer allocation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MemoryError_(Exception):
    pass


@dataclass
class Buffer:
    name: str
    base: int
    size: int
    residency: str | None = None  # optional override: "l2_hit" | "dram"

    @property
    def end(self) -> int:
        return self.base + self.size


class Memory:
    """Flat little-endian memory image.

    Kernel builders allocate named buffers; the data-access timing model uses
    the buffer registry to classify residency.  Reads and writes are bounds
    checked against the modeled size.
    """

    def __init__(self, size: int = 16 * 1024 * 1024):
        self.size = size
        self.data = np.zeros(size, dtype=np.uint8)
        self.buffers: dict[str, Buffer] = {}
        self._cursor = 64  # keep address 0 unallocated

    def alloc(self, name: str, size: int, align: int = 64, residency: str | None = None) -> Buffer:
        if name in self.buffers:
            raise MemoryError_(f"buffer {name!r} already allocated")
        base = (self._cursor + align - 1) // align * align
        if base + size > self.size:
            raise MemoryError_(
                f"out of modeled memory allocating {name!r} ({size} bytes at {base:#x})"
            )
        self._cursor = base + size
        buf = Buffer(name, base, size, residency)
        self.buffers[name] = buf
        return buf

    def buffer_at(self, addr: int) -> Buffer | None:
        for buf in self.buffers.values():
            if buf.base <= addr < buf.end:
                return buf
        return None

    def _check(self, addrs: np.ndarray, elem_bytes: int):
        if len(addrs) == 0:
            return
        lo = int(addrs.min())
        hi = int(addrs.max()) + elem_bytes
        if lo < 0 or hi > self.size:
            raise MemoryError_(
                f"access [{lo:#x}, {hi:#x}) outside modeled memory of {self.size} bytes"
            )

    def read_elems(self, addrs: np.ndarray, elem_bytes: int) -> np.ndarray:
        """Gather little-endian elements as uint64 bit patterns."""
        self._check(addrs, elem_bytes)
        idx = addrs[:, None] + np.arange(elem_bytes, dtype=np.int64)[None, :]
        raw = self.data[idx].astype(np.uint64)
        shifts = (8 * np.arange(elem_bytes, dtype=np.uint64))[None, :]
        return (raw << shifts).sum(axis=1, dtype=np.uint64)

    def write_elems(self, addrs: np.ndarray, values: np.ndarray, elem_bytes: int):
        """Scatter little-endian elements; duplicate addresses: last lane wins
        (numpy fancy assignment stores the last occurrence)."""
        self._check(addrs, elem_bytes)
        idx = addrs[:, None] + np.arange(elem_bytes, dtype=np.int64)[None, :]
        shifts = (8 * np.arange(elem_bytes, dtype=np.uint64))[None, :]
        payload = ((values[:, None] >> shifts) & np.uint64(0xFF)).astype(np.uint8)
        self.data[idx.reshape(-1)] = payload.reshape(-1)

    def read_u64(self, addr: int) -> int:
        return int(self.read_elems(np.array([addr], dtype=np.int64), 8)[0])

    def write_u64(self, addr: int, value: int):
        self.write_elems(
            np.array([addr], dtype=np.int64),
            np.array([value % (1 << 64)], dtype=np.uint64),
            8,
        )

    def write_array(self, base: int, values: np.ndarray):
        """Store a numpy array verbatim (its own dtype, little-endian)."""
        raw = np.ascontiguousarray(values).view(np.uint8).reshape(-1)
        if base < 0 or base + len(raw) > self.size:
            raise MemoryError_(f"array write at {base:#x} ({len(raw)} bytes) out of range")
        self.data[base : base + len(raw)] = raw

    def read_array(self, base: int, count: int, dtype) -> np.ndarray:
        nbytes = count * np.dtype(dtype).itemsize
        if base < 0 or base + nbytes > self.size:
            raise MemoryError_(f"array read at {base:#x} ({nbytes} bytes) out of range")
        return self.data[base : base + nbytes].view(dtype).copy()
