"""Machine configuration: geometry, scheme, timing, and core issue model.

Everything is overridable from a flat ``key=value`` config file; command
line flags take precedence over file entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .layout import EngineGeometry, LaneGeometry
from .memmodel import MemoryTimingConfig
from .timing import SCHEMES, SchemeModel


@dataclass(frozen=True)
class CoreModel:
    """In-order issue abstraction of the scalar core.

    Vector instructions leave the core every ``vector_issue_latency`` cycles;
    runs of scalar instructions cost ``count * scalar_cpi / issue_width``
    cycles and overlap in-cache execution.  ``queue_capacity`` models the
    controller's instruction queue; ``rob_entries`` additionally caps
    in-flight vector work.
    """

    issue_width: int = 4
    rob_entries: int = 128
    vector_issue_latency: int = 4
    scalar_cpi: float = 1.0
    queue_capacity: int = 128

    @property
    def inflight_cap(self) -> int:
        return min(self.rob_entries, self.queue_capacity)

    def scalar_cycles(self, count: int) -> int:
        import math

        return math.ceil(count * self.scalar_cpi / self.issue_width)


@dataclass(frozen=True)
class MachineConfig:
    geometry: EngineGeometry = field(default_factory=EngineGeometry)
    scheme: SchemeModel = field(default_factory=SchemeModel)
    mem: MemoryTimingConfig = field(default_factory=MemoryTimingConfig)
    core: CoreModel = field(default_factory=CoreModel)
    memory_bytes: int = 16 * 1024 * 1024

    def lane_geometry(self, width_bits: int) -> LaneGeometry:
        lanes_per_array = self.scheme.lanes_per_array(width_bits)
        return LaneGeometry(
            total_lanes=self.geometry.num_arrays * lanes_per_array,
            cb_count=self.geometry.cb_count,
        )

    def total_lanes(self, width_bits: int) -> int:
        return self.lane_geometry(width_bits).total_lanes

    def register_capacity(self, width_bits: int) -> int:
        return self.geometry.wordlines_per_array // width_bits


_GEOMETRY_KEYS = {f.name for f in fields(EngineGeometry)}
_MEM_KEYS = {f.name for f in fields(MemoryTimingConfig)}
_CORE_KEYS = {f.name for f in fields(CoreModel)}
_SCHEME_KEYS = {"scheme", "segment_bits", "ac_bitwise_cycles", "ac_lanes_per_array"}


class ConfigError(Exception):
    pass


def parse_config_text(text: str, base: MachineConfig | None = None) -> MachineConfig:
    """Parse ``key=value`` lines (# comments allowed) into a MachineConfig."""
    cfg = base if base is not None else MachineConfig()
    entries: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    return apply_overrides(cfg, entries)


def apply_overrides(cfg: MachineConfig, entries: dict[str, str]) -> MachineConfig:
    geometry = dict()
    mem = dict()
    core = dict()
    scheme = dict()
    overrides = dict(cfg.scheme.overrides)
    memory_bytes = cfg.memory_bytes
    for key, value in entries.items():
        if key in _GEOMETRY_KEYS:
            geometry[key] = int(value, 0)
        elif key in _MEM_KEYS:
            mem[key] = int(value, 0)
        elif key in _CORE_KEYS:
            core[key] = float(value) if key == "scalar_cpi" else int(value, 0)
        elif key == "scheme":
            scheme["scheme"] = value
            if value not in SCHEMES:
                raise ConfigError(f"unknown scheme {value!r} (expected one of {SCHEMES})")
        elif key in _SCHEME_KEYS:
            scheme[key] = int(value, 0)
        elif key == "memory_bytes":
            memory_bytes = int(value, 0)
        elif key.startswith("latency."):
            # latency.<scheme>.<opcode>.<width>=cycles overrides one entry
            parts = key.split(".")
            if len(parts) != 4:
                raise ConfigError(f"bad latency override key {key!r}")
            _, scheme_name, opname, width = parts
            if scheme_name == cfg.scheme.scheme or scheme_name == scheme.get("scheme"):
                overrides[(opname, int(width))] = int(value, 0)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    new_geom = replace(cfg.geometry, **geometry) if geometry else cfg.geometry
    scheme.setdefault("bitlines_per_array", new_geom.bitlines_per_array)
    new_scheme = replace(cfg.scheme, overrides=overrides, **scheme)
    new_mem = replace(cfg.mem, **mem) if mem else cfg.mem
    new_core = replace(cfg.core, **core) if core else cfg.core
    return MachineConfig(
        geometry=new_geom,
        scheme=new_scheme,
        mem=new_mem,
        core=new_core,
        memory_bytes=memory_bytes,
    )


def machine_for_scheme(scheme: str, base: MachineConfig | None = None) -> MachineConfig:
    cfg = base if base is not None else MachineConfig()
    return apply_overrides(cfg, {"scheme": scheme})
