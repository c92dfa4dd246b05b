"""Hardware configurations and an analytical roofline estimator.

The estimator stands in for a cycle-level accelerator simulator. It keeps
the same interface (per-kernel latency, energy, utilization, TOPS) while
every constant comes from the hardware catalog, so it can be recalibrated
without code changes.

Roofline used by :func:`estimate_kernel`::

    compute_time = mac_ops / (mac_arrays * lanes * clock * utilization)
    dram_bytes   = max(0, footprint - sram_mb * 2**20)
    mem_time     = dram_bytes / bandwidth
    delay        = max(compute_time, mem_time)
    energy       = mac_ops * e_mac + min(footprint, sram) * e_sram
                   + dram_bytes * e_offchip + leakage * delay

For 3D-stacked configs the spill traffic is served by the stacked memory
die: it moves at ``stack_bandwidth`` and costs on-chip (SRAM) energy.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .carbon_model import DieSpec, FabProfile, YieldModel, embodied_carbon_die
from .errors import ConfigError, InfeasibleError
from .workload import Kernel

BYTES_PER_MB = 2 ** 20


@dataclass(frozen=True)
class AcceleratorConfig:
    id: str
    mac_arrays: int
    lanes_per_array: int
    sram_mb: float
    clock_hz: float
    leakage_power: float  # W, fixed part
    energy_per_mac: float  # J
    energy_per_sram_byte: float  # J
    energy_per_dram_byte: float  # J
    dram_bandwidth: float  # bytes/s
    base_area: float  # cm^2
    area_per_mac_array: float  # cm^2
    area_per_sram_mb: float  # cm^2
    fab_node: str = "7nm"
    integration: str = "2D"
    die_split: tuple[float, ...] | None = None  # per-die areas of a 3D stack
    stack_bandwidth: float = 0.0  # bytes/s, 3D only
    utilization_ai: float = 1.0
    utilization_xr: float = 1.0
    leakage_per_mac_array: float = 0.0  # W
    leakage_per_sram_mb: float = 0.0  # W
    bonding_yield: float = 1.0

    def __post_init__(self):
        if self.mac_arrays < 1 or self.lanes_per_array < 1:
            raise ConfigError(f"{self.id}: mac_arrays and lanes_per_array must be >= 1")
        positive = ("clock_hz", "energy_per_mac", "energy_per_sram_byte", "energy_per_dram_byte", "base_area")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{self.id}: {name} must be > 0")
        non_negative = ("sram_mb", "leakage_power", "dram_bandwidth", "area_per_mac_array",
                        "area_per_sram_mb", "stack_bandwidth", "leakage_per_mac_array", "leakage_per_sram_mb")
        for name in non_negative:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{self.id}: {name} must be >= 0")
        for name in ("utilization_ai", "utilization_xr", "bonding_yield"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"{self.id}: {name} must lie in (0, 1]")
        if self.integration not in ("2D", "3D"):
            raise ConfigError(f"{self.id}: integration must be 2D or 3D, got {self.integration!r}")
        if self.integration == "2D" and self.die_split is not None:
            raise ConfigError(f"{self.id}: die_split is only meaningful for 3D configs")
        if self.integration == "3D":
            if self.stack_bandwidth < self.dram_bandwidth or self.stack_bandwidth <= 0:
                raise ConfigError(f"{self.id}: 3D stack_bandwidth must be positive and >= dram_bandwidth")
            if self.die_split is not None:
                if len(self.die_split) < 2 or any(a <= 0 for a in self.die_split):
                    raise ConfigError(f"{self.id}: a 3D stack needs >= 2 dies of positive area")
                if not math.isclose(sum(self.die_split), self.logic_area + self.memory_area, rel_tol=1e-9):
                    raise ConfigError(
                        f"{self.id}: die split {self.die_split} does not sum to the "
                        f"logic+memory area {self.logic_area + self.memory_area:g} cm^2"
                    )

    @property
    def logic_area(self) -> float:
        return self.base_area + self.mac_arrays * self.area_per_mac_array

    @property
    def memory_area(self) -> float:
        return self.sram_mb * self.area_per_sram_mb

    @property
    def total_leakage(self) -> float:
        return (self.leakage_power + self.mac_arrays * self.leakage_per_mac_array
                + self.sram_mb * self.leakage_per_sram_mb)

    @property
    def peak_macs_per_s(self) -> float:
        return self.mac_arrays * self.lanes_per_array * self.clock_hz

    def utilization_for(self, category: str) -> float:
        return self.utilization_ai if category == "AI" else self.utilization_xr


@dataclass(frozen=True)
class PerfEnergyResult:
    delay: float  # s
    energy: float  # J
    utilization: float
    tops: float
    dram_bytes: float = 0.0
    leakage_energy: float = 0.0


def estimate_kernel(cfg: AcceleratorConfig, k: Kernel) -> PerfEnergyResult:
    util = cfg.utilization_for(k.category)
    compute_time = k.mac_ops / (cfg.peak_macs_per_s * util)
    sram_bytes = cfg.sram_mb * BYTES_PER_MB
    footprint = k.footprint_bytes
    spill = max(0.0, footprint - sram_bytes)

    if cfg.integration == "3D":
        bandwidth, e_spill = cfg.stack_bandwidth, cfg.energy_per_sram_byte
    else:
        bandwidth, e_spill = cfg.dram_bandwidth, cfg.energy_per_dram_byte
    if spill > 0 and bandwidth <= 0:
        raise InfeasibleError(f"{cfg.id}: kernel {k.id} spills {spill:g} bytes but bandwidth is zero")
    mem_time = spill / bandwidth if spill > 0 else 0.0

    delay = max(compute_time, mem_time)
    leakage_energy = cfg.total_leakage * delay
    energy = (k.mac_ops * cfg.energy_per_mac + min(footprint, sram_bytes) * cfg.energy_per_sram_byte
              + spill * e_spill + leakage_energy)
    achieved = k.mac_ops / (cfg.peak_macs_per_s * delay)
    return PerfEnergyResult(
        delay=delay,
        energy=energy,
        utilization=achieved,
        tops=2.0 * k.mac_ops / delay / 1e12,
        dram_bytes=spill,
        leakage_energy=leakage_energy,
    )


def config_area(cfg: AcceleratorConfig) -> tuple[float, tuple[float, ...]]:
    """Total silicon area and the per-die breakdown."""
    total = cfg.logic_area + cfg.memory_area
    if cfg.integration == "2D":
        return total, (total,)
    if cfg.die_split is not None:
        return total, tuple(cfg.die_split)
    return total, (cfg.logic_area, cfg.memory_area)


def config_embodied(cfg: AcceleratorConfig, fab: FabProfile, model: YieldModel) -> float:
    """Embodied carbon over all dies; through-silicon vias are not charged."""
    _, dies = config_area(cfg)
    carbon = math.fsum(embodied_carbon_die(DieSpec(a, fab), model) for a in dies if a > 0)
    return carbon / cfg.bonding_yield


def enumerate_design_space(template: AcceleratorConfig, mac_range: Sequence[int],
                           sram_range: Sequence[float]) -> list[AcceleratorConfig]:
    """Cartesian grid of MAC-array counts and SRAM capacities around ``template``."""
    if not mac_range or not sram_range:
        raise ConfigError("design-space ranges must be non-empty")
    return [
        dataclasses.replace(template, id=f"{template.id}_K{k}_M{m:g}", mac_arrays=int(k), sram_mb=float(m))
        for k in mac_range
        for m in sram_range
    ]


@dataclass(frozen=True)
class StackLayout:
    """One stacked variant: compute in thousands of MACs, SRAM in MB."""

    kilo_macs: float
    sram_mb: float
    die_split: tuple[float, ...] | None = None
    dies: int = 2

    @property
    def label(self) -> str:
        prefix = "3D" if self.dies > 1 else "2D"
        return f"{prefix}_{self.kilo_macs:g}K_{self.sram_mb:g}M"

    @classmethod
    def parse(cls, text: str) -> StackLayout:
        """Parse labels like ``2K_4M`` or ``3D_2K_16M`` (a ``2D_`` prefix means a single die)."""
        parts = text.strip().split("_")
        dies = 2
        if parts[0] in ("2D", "3D"):
            dies = 1 if parts[0] == "2D" else 2
            parts = parts[1:]
        if len(parts) != 2 or not parts[0].endswith("K") or not parts[1].endswith("M"):
            raise ConfigError(f"cannot parse stack layout {text!r}; expected e.g. 2K_4M")
        try:
            return cls(float(parts[0][:-1]), float(parts[1][:-1]), dies=dies)
        except ValueError:
            raise ConfigError(f"cannot parse stack layout {text!r}") from None


def stack3d_variants(base: AcceleratorConfig, layouts: Iterable[StackLayout],
                     stack_bandwidth: float | None = None) -> list[AcceleratorConfig]:
    """Derive stacked (or, for single-die layouts, planar) variants of ``base``."""
    out = []
    for layout in layouts:
        arrays = layout.kilo_macs * 1024 / base.lanes_per_array
        if arrays < 1 or not float(arrays).is_integer():
            raise ConfigError(
                f"{layout.label}: {layout.kilo_macs:g}K MACs is not a whole number of "
                f"{base.lanes_per_array}-lane arrays"
            )
        arrays = int(arrays)
        if layout.dies <= 1:
            if arrays == base.mac_arrays and layout.sram_mb == base.sram_mb and base.integration == "2D":
                out.append(base)
            else:
                out.append(dataclasses.replace(base, id=layout.label, mac_arrays=arrays,
                                               sram_mb=layout.sram_mb, integration="2D", die_split=None))
            continue
        bw = stack_bandwidth if stack_bandwidth is not None else base.stack_bandwidth
        out.append(dataclasses.replace(
            base, id=layout.label, mac_arrays=arrays, sram_mb=layout.sram_mb,
            integration="3D", die_split=layout.die_split, stack_bandwidth=bw,
        ))
    return out


@dataclass(frozen=True)
class CpuConfig:
    """Big.LITTLE CPU cluster on an SoC. Cores power on gold-first."""

    total_cores: int
    gold_cores: int
    silver_cores: int
    gold_core_area: float  # cm^2 per core
    silver_core_area: float
    gold_core_power: float  # W per active core
    silver_core_power: float
    base_area: float  # rest of the SoC, cm^2
    base_power: float = 0.0
    fab_node: str = "7nm"

    def __post_init__(self):
        if self.gold_cores + self.silver_cores != self.total_cores:
            raise ConfigError("gold_cores + silver_cores must equal total_cores")
        if self.gold_cores < 0 or self.silver_cores < 0 or self.total_cores < 1:
            raise ConfigError("core counts must be non-negative with at least one core")
        for name in ("gold_core_area", "silver_core_area", "gold_core_power", "silver_core_power",
                     "base_area", "base_power"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @property
    def core_classes(self) -> tuple[str, ...]:
        return ("gold",) * self.gold_cores + ("silver",) * self.silver_cores

    def core_areas(self) -> list[float]:
        return [self.gold_core_area if c == "gold" else self.silver_core_area for c in self.core_classes]

    def core_powers(self) -> list[float]:
        return [self.gold_core_power if c == "gold" else self.silver_core_power for c in self.core_classes]

    def core_mask(self, active: int) -> list[int]:
        if not 0 <= active <= self.total_cores:
            raise ConfigError(f"active cores must lie in 0..{self.total_cores}, got {active}")
        return [1] * active + [0] * (self.total_cores - active)

    @property
    def cpu_area(self) -> float:
        return sum(self.core_areas())

    @property
    def soc_area(self) -> float:
        return self.base_area + self.cpu_area


# -- catalog file ----------------------------------------------------------------

_INT_FIELDS = {"mac_arrays", "lanes_per_array"}
_STR_FIELDS = {"id", "fab_node", "integration"}


def catalog_columns() -> list[str]:
    return [f.name for f in dataclasses.fields(AcceleratorConfig)]


def parse_die_split(text: str) -> tuple[float, ...] | None:
    text = text.strip()
    if not text:
        return None
    try:
        return tuple(float(part) for part in text.split("+"))
    except ValueError:
        raise ConfigError(f"die split must look like 'areaA+areaB', got {text!r}") from None


def load_hardware_catalog(path: str | Path) -> dict[str, AcceleratorConfig]:
    path = Path(path)
    columns = catalog_columns()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    configs: dict[str, AcceleratorConfig] = {}
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if list(header) != columns:
            missing = [c for c in columns if c not in header]
            extra = [c for c in header if c not in columns]
            raise ConfigError(f"{path}: header must be exactly {columns}; missing {missing}, unexpected {extra}")
        for lineno, row in enumerate(reader, start=2):
            kwargs = {}
            for name in columns:
                raw = (row[name] or "").strip()
                if name in _STR_FIELDS:
                    kwargs[name] = raw
                elif name == "die_split":
                    kwargs[name] = parse_die_split(raw)
                else:
                    try:
                        value = float(raw)
                    except ValueError:
                        raise ConfigError(f"{path} row {lineno} column {name}: not a number: {raw!r}") from None
                    if name in _INT_FIELDS:
                        if not value.is_integer():
                            raise ConfigError(f"{path} row {lineno} column {name}: must be an integer")
                        value = int(value)
                    kwargs[name] = value
            if kwargs["id"] in configs:
                raise ConfigError(f"{path} row {lineno}: duplicate config id {kwargs['id']!r}")
            try:
                configs[kwargs["id"]] = AcceleratorConfig(**kwargs)
            except ConfigError as exc:
                raise ConfigError(f"{path} row {lineno}: {exc}") from None
    return configs


def resolve_fab(cfg_node: str, fabs: Mapping[str, FabProfile]) -> FabProfile:
    try:
        return fabs[cfg_node]
    except KeyError:
        raise ConfigError(f"unknown fab node {cfg_node!r}; known: {sorted(fabs)}") from None
