"""Embodied and operational carbon of hardware.

Units are fixed throughout the package: gCO2e, cm^2, kWh (fab and grid
intensities), joules (device energy), seconds.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .errors import ConfigError, InfeasibleError, UsageError

SECONDS_PER_DAY = 86400.0
DAYS_PER_YEAR = 365.0
JOULES_PER_KWH = 3.6e6

FAB_KEYS = (
    "ci_fab_g_per_kwh",
    "epa_kwh_per_cm2",
    "mpa_g_per_cm2",
    "gpa_g_per_cm2",
    "defect_density_per_cm2",
    "wafer_diameter_cm",
)


@dataclass(frozen=True)
class FabProfile:
    """Manufacturing parameters of one process node at one fab."""

    node_label: str
    ci_fab: float  # gCO2e / kWh of the fab grid
    epa: float  # kWh / cm^2
    mpa: float  # gCO2e / cm^2
    gpa: float  # gCO2e / cm^2
    defect_density: float = 0.0  # defects / cm^2
    wafer_diameter: float = 30.0  # cm

    def __post_init__(self):
        for name in ("ci_fab", "epa", "mpa", "gpa", "defect_density", "wafer_diameter"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"fab profile {self.node_label!r}: {name} must be >= 0, got {value}")

    def with_grid(self, ci_fab: float) -> FabProfile:
        """Same node manufactured on a different electricity grid."""
        return FabProfile(
            self.node_label, ci_fab, self.epa, self.mpa, self.gpa,
            self.defect_density, self.wafer_diameter,
        )


@dataclass(frozen=True)
class FixedYield:
    y: float = 0.85

    def __post_init__(self):
        if not 0.0 < self.y <= 1.0:
            raise ConfigError(f"fixed yield must lie in (0, 1], got {self.y}")


@dataclass(frozen=True)
class MurphyYield:
    """Murphy's model; reads the defect density from the fab profile."""


YieldVariant = Union[FixedYield, MurphyYield]


@dataclass(frozen=True)
class YieldModel:
    variant: YieldVariant = FixedYield()
    die_placement_correction: bool = False


@dataclass(frozen=True)
class DieSpec:
    """A logical die of ``area`` cm^2, optionally split into equal chiplets."""

    area: float
    fab: FabProfile
    die_count: int = 1

    def __post_init__(self):
        if not self.area > 0:
            raise ConfigError(f"die area must be > 0, got {self.area}")
        if self.die_count < 1:
            raise ConfigError(f"die_count must be >= 1, got {self.die_count}")


@dataclass(frozen=True)
class UsePhaseProfile:
    ci_use: float  # gCO2e / kWh
    lifetime_s: float
    idle_s: float = 0.0
    daily_active_hours: float | None = None

    def __post_init__(self):
        if self.ci_use < 0:
            raise ConfigError(f"ci_use must be >= 0, got {self.ci_use}")
        if not 0 <= self.idle_s < self.lifetime_s:
            raise ConfigError(
                f"idle time must satisfy 0 <= idle < lifetime, got idle={self.idle_s}, lifetime={self.lifetime_s}"
            )
        if self.daily_active_hours is not None:
            days = self.lifetime_s / SECONDS_PER_DAY
            expected = self.daily_active_hours * 3600.0 * days
            if not math.isclose(self.active_s, expected, rel_tol=1e-9, abs_tol=1e-6):
                raise ConfigError(
                    f"lifetime - idle = {self.active_s} s is inconsistent with "
                    f"{self.daily_active_hours} h/day over {days:g} days ({expected} s)"
                )

    @property
    def active_s(self) -> float:
        return self.lifetime_s - self.idle_s

    @classmethod
    def from_daily_use(cls, ci_use: float, years: float, daily_active_hours: float) -> UsePhaseProfile:
        lifetime = years * DAYS_PER_YEAR * SECONDS_PER_DAY
        active = years * DAYS_PER_YEAR * daily_active_hours * 3600.0
        return cls(ci_use, lifetime, lifetime - active, daily_active_hours)


def carbon_per_area(fab: FabProfile) -> float:
    """gCO2e per cm^2 of manufactured silicon, before yield."""
    return fab.ci_fab * fab.epa + fab.mpa + fab.gpa


def murphy_yield(area: float, defect_density: float) -> float:
    x = area * defect_density
    if x == 0.0:
        return 1.0
    # expm1 keeps the small-x limit accurate
    return (-math.expm1(-x) / x) ** 2


def die_yield(model: YieldModel, area: float, fab: FabProfile) -> float:
    if not area > 0:
        raise UsageError(f"die area must be > 0, got {area}")
    variant = model.variant
    if isinstance(variant, FixedYield):
        return variant.y
    if fab.defect_density <= 0:
        raise ConfigError(
            f"Murphy yield needs a positive defect density; fab {fab.node_label!r} has {fab.defect_density}"
        )
    return murphy_yield(area, fab.defect_density)


def gross_dies_per_wafer(area: float, wafer_diameter: float) -> int:
    """Whole dies of ``area`` that fit on a round wafer, edge loss included."""
    d = wafer_diameter
    return max(0, math.floor(math.pi * (d / 2.0) ** 2 / area - math.pi * d / math.sqrt(2.0 * area)))


def _single_die_carbon(area: float, fab: FabProfile, model: YieldModel) -> float:
    y = die_yield(model, area, fab)
    if not model.die_placement_correction:
        return carbon_per_area(fab) * area / y
    # the whole wafer is paid for and shared among its good dies
    dies = gross_dies_per_wafer(area, fab.wafer_diameter)
    if dies == 0:
        raise ConfigError(f"a {area} cm^2 die does not fit on a {fab.wafer_diameter} cm wafer")
    wafer_area = math.pi * (fab.wafer_diameter / 2.0) ** 2
    return carbon_per_area(fab) * wafer_area / (dies * y)


def embodied_carbon_die(die: DieSpec, model: YieldModel, chiplet_multiplier: float | None = None) -> float:
    """Embodied carbon of one logical die (gCO2e).

    With ``die_count > 1`` the area is split into equal chiplets, each with
    its own yield. ``chiplet_multiplier`` instead scales the monolithic
    estimate by a fixed factor (e.g. 0.59) for catalog studies.
    """
    if chiplet_multiplier is not None and die.die_count > 1:
        return chiplet_multiplier * _single_die_carbon(die.area, die.fab, model)
    part = die.area / die.die_count
    return die.die_count * _single_die_carbon(part, die.fab, model)


def embodied_carbon_system(components: Sequence[float], online_mask: Sequence[int]) -> float:
    """Dot product of per-component embodied carbon with an online/offline mask."""
    if len(components) != len(online_mask):
        raise UsageError(
            f"component vector has {len(components)} entries but mask has {len(online_mask)}"
        )
    for bit in online_mask:
        if bit not in (0, 1):
            raise UsageError(f"online mask entries must be 0 or 1, got {bit!r}")
    return math.fsum(c for c, bit in zip(components, online_mask) if bit)


def amortize_embodied(c_overall: float, total_task_delay: float, use: UsePhaseProfile) -> float:
    """Share of ``c_overall`` charged to work that keeps the device busy for ``total_task_delay`` s."""
    if total_task_delay < 0:
        raise UsageError(f"task delay must be >= 0, got {total_task_delay}")
    active = use.active_s
    if total_task_delay > active:
        raise InfeasibleError(
            f"workload needs {total_task_delay:g} s but the device is only active for {active:g} s"
        )
    return c_overall * total_task_delay / active


def operational_carbon(ci_use: float, total_energy_kwh: float) -> float:
    if ci_use < 0 or total_energy_kwh < 0:
        raise UsageError("carbon intensity and energy must be >= 0")
    return ci_use * total_energy_kwh


def joules_to_kwh(joules: float) -> float:
    return joules / JOULES_PER_KWH


# -- configuration files -----------------------------------------------------

def _read_ini(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parser


def _float_key(section: configparser.SectionProxy, key: str, path: Path, default: float | None = None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"{path} [{section.name}]: missing key {key}")
        return default
    raw = section[key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{path} [{section.name}] {key}: not a number: {raw!r}") from None


def load_fab_profiles(path: str | Path) -> dict[str, FabProfile]:
    """Read ``[node]`` sections of a fab table. ``grid.*`` sections are skipped."""
    path = Path(path)
    parser = _read_ini(path)
    profiles = {}
    for name in parser.sections():
        if name.startswith("grid."):
            continue
        sec = parser[name]
        unknown = set(sec) - set(FAB_KEYS)
        if unknown:
            raise ConfigError(f"{path} [{name}]: unknown keys {sorted(unknown)}")
        profiles[name] = FabProfile(
            node_label=name,
            ci_fab=_float_key(sec, "ci_fab_g_per_kwh", path),
            epa=_float_key(sec, "epa_kwh_per_cm2", path),
            mpa=_float_key(sec, "mpa_g_per_cm2", path),
            gpa=_float_key(sec, "gpa_g_per_cm2", path),
            defect_density=_float_key(sec, "defect_density_per_cm2", path, 0.0),
            wafer_diameter=_float_key(sec, "wafer_diameter_cm", path, 30.0),
        )
    return profiles


def load_grid_intensities(path: str | Path) -> dict[str, float]:
    """Read ``[grid.<label>]`` sections (key ``ci_g_per_kwh``) of a fab table."""
    path = Path(path)
    parser = _read_ini(path)
    grids = {}
    for name in parser.sections():
        if name.startswith("grid."):
            grids[name[len("grid."):]] = _float_key(parser[name], "ci_g_per_kwh", path)
    return grids
