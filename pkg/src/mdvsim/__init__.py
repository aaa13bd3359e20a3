"""Functional and cycle-approximate simulator for a multi-dimensional
long-vector ISA executing on an in-SRAM compute engine."""

from .config import CoreModel, MachineConfig, machine_for_scheme, parse_config_text
from .engine import SimEngine, SimStats, run_program
from .funcexec import FunctionalMachine
from .harness import run_kernel
from .isa import ControlState, DataType, DTYPES, Opcode, VectorInstruction, decode_program
from .kernels import KERNELS, build_kernel
from .layout import EngineGeometry, LaneGeometry
from .memory import Memory

__all__ = [
    "ControlState",
    "CoreModel",
    "DataType",
    "DTYPES",
    "EngineGeometry",
    "FunctionalMachine",
    "KERNELS",
    "LaneGeometry",
    "MachineConfig",
    "Memory",
    "Opcode",
    "SimEngine",
    "SimStats",
    "VectorInstruction",
    "build_kernel",
    "decode_program",
    "machine_for_scheme",
    "parse_config_text",
    "run_kernel",
    "run_program",
]
