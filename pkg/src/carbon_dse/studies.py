"""Case studies built on the carbon, hardware and metric models."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from . import carbon_model as cm
from .errors import ConfigError, UsageError
from .hw_model import AcceleratorConfig, CpuConfig, config_embodied, estimate_kernel, resolve_fab
from .metrics import EMBODIED_ONLY, EvaluationRecord, MetricKind, compute_metric
from .optimizer import ConstraintSet, QosBound, feasible
from .workload import Kernel

TLP_TOLERANCE = 1e-9
TIE_RTOL = 1e-12


# -- retrospective catalog ---------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    name: str
    vendor: str
    tdp: float  # W
    perf_score: float  # benchmark units, higher is better
    die_areas: tuple[float, ...]  # cm^2; several entries = chiplets
    node: str
    grid: str = ""

    def __post_init__(self):
        if not self.tdp > 0 or not self.perf_score > 0:
            raise ConfigError(f"{self.name}: tdp and perf_score must be > 0")
        if not self.die_areas or any(a <= 0 for a in self.die_areas):
            raise ConfigError(f"{self.name}: die areas must be positive")

    @property
    def is_chiplet(self) -> bool:
        return len(self.die_areas) > 1


@dataclass(frozen=True)
class YieldPolicy:
    """Monolithic dies use ``monolithic``; chiplet parts either scale the
    monolithic-equivalent estimate by ``chiplet_multiplier`` or, when that is
    None, charge each die with ``chiplet`` yield."""

    monolithic: cm.YieldModel = cm.YieldModel(cm.FixedYield(0.80))
    chiplet_multiplier: float | None = 0.59
    chiplet: cm.YieldModel | None = None


def catalog_embodied(entry: CatalogEntry, fab: cm.FabProfile, policy: YieldPolicy) -> float:
    total_area = math.fsum(entry.die_areas)
    if not entry.is_chiplet:
        return cm.embodied_carbon_die(cm.DieSpec(total_area, fab), policy.monolithic)
    if policy.chiplet_multiplier is not None:
        return policy.chiplet_multiplier * cm.embodied_carbon_die(cm.DieSpec(total_area, fab), policy.monolithic)
    model = policy.chiplet or policy.monolithic
    return math.fsum(cm.embodied_carbon_die(cm.DieSpec(a, fab), model) for a in entry.die_areas)


@dataclass(frozen=True)
class CatalogResult:
    records: tuple[EvaluationRecord, ...]
    values: Mapping[str, Mapping[MetricKind, float]]
    optima: Mapping[MetricKind, str]

    @property
    def disagreement(self) -> bool:
        """True when the metrics do not agree on a single best entry."""
        return len(set(self.optima.values())) > 1


def catalog_metrics(entries: Sequence[CatalogEntry], fabs: Mapping[str, cm.FabProfile],
                    policy: YieldPolicy = YieldPolicy(), grids: Mapping[str, float] | None = None,
                    use: cm.UsePhaseProfile | None = None) -> CatalogResult:
    """Metric table for shipped parts, one unit of benchmark work per part.

    Energy per unit of work is TDP / score and delay is 1 / score. The
    embodied-only metrics use the whole embodied footprint, as in the
    published definitions; tCDP uses the share amortized over ``use``.
    """
    if not entries:
        raise UsageError("catalog is empty")
    use = use or cm.UsePhaseProfile.from_daily_use(ci_use=380.0, years=4.0, daily_active_hours=24.0)
    records = []
    for entry in entries:
        if entry.node not in fabs:
            raise ConfigError(f"{entry.name}: unknown node {entry.node!r}")
        fab = fabs[entry.node]
        if entry.grid:
            if grids is None or entry.grid not in grids:
                raise ConfigError(f"{entry.name}: unknown fab grid {entry.grid!r}")
            fab = fab.with_grid(grids[entry.grid])
        delay = 1.0 / entry.perf_score
        energy = entry.tdp / entry.perf_score
        c_overall = catalog_embodied(entry, fab, policy)
        records.append(EvaluationRecord(
            config_id=entry.name, cluster="catalog", total_delay=delay, total_energy=energy,
            c_operational=cm.operational_carbon(use.ci_use, cm.joules_to_kwh(energy)),
            c_embodied_amortized=cm.amortize_embodied(c_overall, delay, use),
            c_embodied_overall=c_overall,
        ))
    values = {}
    for r in records:
        values[r.config_id] = {kind: _catalog_metric(kind, r) for kind in MetricKind}
    optima = {}
    for kind in MetricKind:
        optima[kind] = min(records, key=lambda r: (values[r.config_id][kind], r.config_id)).config_id
    return CatalogResult(tuple(records), values, optima)


def _catalog_metric(kind: MetricKind, rec: EvaluationRecord) -> float:
    basis = "overall" if kind in EMBODIED_ONLY else "amortized"
    return compute_metric(kind, rec, basis)


def load_catalog(path: str | Path) -> list[CatalogEntry]:
    path = Path(path)
    columns = ("name", "vendor", "tdp", "perf_score", "die_areas", "node", "grid")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    entries = []
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                entries.append(CatalogEntry(
                    name=row["name"].strip(), vendor=row["vendor"].strip(),
                    tdp=float(row["tdp"]), perf_score=float(row["perf_score"]),
                    die_areas=tuple(float(a) for a in row["die_areas"].split("+")),
                    node=row["node"].strip(), grid=(row["grid"] or "").strip(),
                ))
            except ValueError as exc:
                raise ConfigError(f"{path} row {lineno}: {exc}") from None
    return entries


# -- lifetime in inferences ----------------------------------------------------------

@dataclass(frozen=True)
class LifetimePoint:
    """Per-inference cost of one config plus its whole embodied carbon."""

    config_id: str
    delay: float  # s per inference
    energy: float  # J per inference
    c_embodied: float  # gCO2e

    def tcdp(self, n: float, ci_use: float) -> float:
        """Carbon-delay product when the device's whole active life is ``n`` inferences."""
        c_op = ci_use * cm.joules_to_kwh(n * self.energy)
        return (self.c_embodied + c_op) * (n * self.delay)

    def tcdp_per_inference(self, n: float, ci_use: float) -> float:
        """tCDP(n) / n, affine in n."""
        return (self.c_embodied + ci_use * cm.joules_to_kwh(n * self.energy)) * self.delay


@dataclass(frozen=True)
class Crossover:
    first: str
    second: str
    n_star: int | None  # smallest whole inference count after which the ranking has flipped
    winner_before: str | None = None
    winner_after: str | None = None


@dataclass(frozen=True)
class LifetimeResult:
    counts: tuple[float, ...]
    curves: Mapping[str, tuple[float, ...]]
    crossovers: tuple[Crossover, ...]


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def _pair_crossover(a: LifetimePoint, b: LifetimePoint, counts: Sequence[float], ci_use: float) -> Crossover:
    def gap(n):
        return a.tcdp_per_inference(n, ci_use) - b.tcdp_per_inference(n, ci_use)

    signs = [_sign(gap(n)) for n in counts]
    start_sign = signs[0]
    if all(s == start_sign for s in signs):
        return Crossover(a.config_id, b.config_id, None)
    idx = next(i for i, s in enumerate(signs) if s != start_sign)
    if start_sign == 0:
        # tied at the first count, then separated: the flip happens right there
        n_star = math.ceil(counts[0])
        after = signs[idx]
        return Crossover(a.config_id, b.config_id, n_star, None, a.config_id if after < 0 else b.config_id)
    lo, hi = math.floor(counts[idx - 1]), math.ceil(counts[idx])
    # invariant: sign(gap(lo)) == start_sign, sign(gap(hi)) != start_sign
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _sign(gap(mid)) == start_sign:
            lo = mid
        else:
            hi = mid
    before = a.config_id if start_sign < 0 else b.config_id
    after = b.config_id if before == a.config_id else a.config_id
    return Crossover(a.config_id, b.config_id, hi, before, after)


def lifetime_crossover(points: Sequence[LifetimePoint], ci_use: float,
                       counts: Sequence[float]) -> LifetimeResult:
    """tCDP curves over lifetimes measured in inferences, and pairwise ranking flips."""
    if len(points) < 2:
        raise UsageError("need at least two configs")
    counts = tuple(float(n) for n in counts)
    if not counts or any(n <= 0 for n in counts) or any(b <= a for a, b in zip(counts, counts[1:])):
        raise UsageError("inference counts must be positive and strictly increasing")
    curves = {p.config_id: tuple(p.tcdp(n, ci_use) for n in counts) for p in points}
    crossovers = tuple(_pair_crossover(a, b, counts, ci_use) for a, b in itertools.combinations(points, 2))
    return LifetimeResult(counts, curves, crossovers)


def lifetime_points(configs: Sequence[AcceleratorConfig], kernels: Sequence[Kernel],
                    fabs: Mapping[str, cm.FabProfile], yield_model: cm.YieldModel) -> list[LifetimePoint]:
    """One inference = one call of every kernel in ``kernels``."""
    out = []
    for cfg in configs:
        results = [estimate_kernel(cfg, k) for k in kernels]
        out.append(LifetimePoint(
            cfg.id,
            delay=math.fsum(r.delay for r in results),
            energy=math.fsum(r.energy for r in results),
            c_embodied=config_embodied(cfg, resolve_fab(cfg.fab_node, fabs), yield_model),
        ))
    return out


# -- replacement frequency -------------------------------------------------------------

@dataclass(frozen=True)
class LifetimePlan:
    daily_hours: float
    power_w: float
    embodied_g: float
    ci_use: float  # gCO2e / kWh
    horizon_years: int = 10
    annual_efficiency_gain: float = 1.21
    replacement_period: int = 1

    def __post_init__(self):
        if self.annual_efficiency_gain < 1:
            raise ConfigError("annual efficiency gain must be >= 1")
        if self.horizon_years < 1:
            raise ConfigError("horizon must be at least one year")
        if not 1 <= self.replacement_period <= self.horizon_years:
            raise ConfigError("replacement period must lie in 1..horizon")
        if not 0 <= self.daily_hours <= 24:
            raise ConfigError("daily hours must lie in [0, 24]")
        for name in ("power_w", "embodied_g", "ci_use"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class HorizonCarbon:
    period: int
    devices: int
    operational: float
    embodied: float

    @property
    def total(self) -> float:
        return self.operational + self.embodied


def horizon_carbon(plan: LifetimePlan, period: int | None = None) -> HorizonCarbon:
    """Carbon over the analysis horizon when hardware is replaced every ``period`` years.

    Generation g starts in year g*period and is ``gain**(g*period)`` times more
    energy efficient than the first. Each purchased device carries its full
    embodied carbon, including a final one that is retired early by the horizon.
    """
    period = plan.replacement_period if period is None else period
    if not 1 <= period <= plan.horizon_years:
        raise UsageError(f"period must lie in 1..{plan.horizon_years}")
    devices = math.ceil(plan.horizon_years / period)
    base_kwh = plan.power_w * plan.daily_hours * cm.DAYS_PER_YEAR / 1000.0
    operational = []
    for g in range(devices):
        start = g * period
        years = min(period, plan.horizon_years - start)
        operational.append(plan.ci_use * base_kwh / plan.annual_efficiency_gain ** start * years)
    return HorizonCarbon(period, devices, math.fsum(operational), devices * plan.embodied_g)


@dataclass(frozen=True)
class ReplacementResult:
    daily_hours: float
    per_period: tuple[HorizonCarbon, ...]
    optimal_period: int
    degenerate: bool = False

    def normalized(self) -> dict[int, float]:
        """Totals relative to the shortest candidate period (1 year when present)."""
        ref = self.per_period[0].total
        return {h.period: (h.total / ref if ref else float("nan")) for h in self.per_period}

    def savings(self, other_period: int) -> float:
        """Fractional carbon saved by the optimal period relative to ``other_period``."""
        totals = {h.period: h.total for h in self.per_period}
        return 1.0 - totals[self.optimal_period] / totals[other_period]


def replacement_study(plan: LifetimePlan, periods: Sequence[int] | None = None) -> ReplacementResult:
    """Horizon carbon per candidate replacement period; ties go to the longer period."""
    periods = sorted(set(periods or range(1, min(5, plan.horizon_years) + 1)))
    per_period = tuple(horizon_carbon(plan, p) for p in periods)
    lowest = min(h.total for h in per_period)
    # totals equal up to rounding count as ties
    tied = [h for h in per_period if h.total <= lowest or math.isclose(h.total, lowest, rel_tol=TIE_RTOL)]
    best = max(tied, key=lambda h: h.period)
    degenerate = plan.daily_hours == 0 or plan.power_w == 0 or plan.ci_use == 0
    return ReplacementResult(plan.daily_hours, per_period, best.period, degenerate)


# -- thread-level parallelism ----------------------------------------------------------

@dataclass(frozen=True)
class TlpBreakdown:
    """``c[i]`` is the fraction of time exactly ``i`` cores are busy."""

    c: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        object.__setattr__(self, "c", c)
        if len(c) < 2:
            raise ConfigError("a TLP breakdown needs c0 and at least c1")
        if any(x < 0 or not math.isfinite(x) for x in c):
            raise ConfigError("TLP fractions must be finite and >= 0")
        total = math.fsum(c)
        if abs(total - 1.0) > TLP_TOLERANCE:
            raise ConfigError(f"TLP fractions sum to {total!r}, not 1 (tolerance {TLP_TOLERANCE:g})")
        if c[0] >= 1.0:
            raise ConfigError("c0 = 1: the cores are never active")

    @property
    def cores(self) -> int:
        return len(self.c) - 1


def tlp(breakdown: TlpBreakdown) -> float:
    """Mean number of busy cores over the time at least one core is busy.

    Evaluated in exact rational arithmetic and rounded once.
    """
    c = [Fraction(x) for x in breakdown.c]
    if c[0] == 1:
        raise UsageError("c0 = 1: TLP undefined")
    busy = sum((ci * i for i, ci in enumerate(c)), Fraction(0))
    return float(busy / (1 - c[0]))


def load_tlp(path: str | Path) -> dict[str, TlpBreakdown]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    out = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "app_id" or header[1:] != [f"c{i}" for i in range(len(header) - 1)]:
            raise ConfigError(f"{path}: header must be app_id,c0,c1,...,cn")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row[0].strip()] = TlpBreakdown(tuple(float(x) for x in row[1:]))
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"{path} row {lineno} ({row[0]}): {exc}") from None
    return out


def load_fps_by_cores(path: str | Path) -> dict[str, dict[int, float]]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    table: dict[str, dict[int, float]] = {}
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"app_id", "cores", "fps"}:
            raise ConfigError(f"{path}: header must be app_id,cores,fps")
        for lineno, row in enumerate(reader, start=2):
            try:
                cores, fps = int(row["cores"]), float(row["fps"])
            except ValueError as exc:
                raise ConfigError(f"{path} row {lineno}: {exc}") from None
            if cores < 1 or not fps > 0:
                raise ConfigError(f"{path} row {lineno}: cores must be >= 1 and fps > 0")
            table.setdefault(row["app_id"].strip(), {})[cores] = fps
    return table


# -- core-count provisioning -----------------------------------------------------------

@dataclass(frozen=True)
class CoreOption:
    app: str
    cores: int
    fps: float
    power_w: float
    c_embodied_overall: float
    record: EvaluationRecord
    tcdp: float
    feasible: bool
    lifetime_carbon: float


@dataclass(frozen=True)
class AppProvisioning:
    app: str
    options: tuple[CoreOption, ...]
    optimal_cores: int | None
    embodied_savings: float | None  # vs. all cores enabled
    total_savings: float | None


@dataclass(frozen=True)
class ProvisioningResult:
    apps: tuple[AppProvisioning, ...]
    joint_cores: int | None
    joint_embodied_savings: float | None
    infeasible_apps: tuple[str, ...] = ()


def cpu_components(cpu: CpuConfig, fab: cm.FabProfile, yield_model: cm.YieldModel) -> list[float]:
    """Embodied carbon of [rest of SoC, core 1, ..., core n] in power-on order."""
    parts = [cm.embodied_carbon_die(cm.DieSpec(cpu.base_area, fab), yield_model)] if cpu.base_area > 0 else [0.0]
    parts += [cm.embodied_carbon_die(cm.DieSpec(a, fab), yield_model) for a in cpu.core_areas()]
    return parts


def cpu_power(cpu: CpuConfig, cores: int, parallelism: float) -> float:
    """SoC power with ``cores`` enabled: cores fill up in order, each busy up to ``parallelism``."""
    powers = cpu.core_powers()[:cores]
    busy = min(parallelism, cores)
    return cpu.base_power + math.fsum(p * min(1.0, max(0.0, busy - i)) for i, p in enumerate(powers))


def provisioning_study(cpu: CpuConfig, fps_table: Mapping[str, Mapping[int, float]],
                       tlps: Mapping[str, float], fab: cm.FabProfile, yield_model: cm.YieldModel,
                       use: cm.UsePhaseProfile, qos_fps: float = 60.0,
                       power_cap_w: float | None = None,
                       core_counts: Sequence[int] | None = None) -> ProvisioningResult:
    """Per-app core count minimizing tCDP per frame without breaking the frame-rate floor."""
    counts = sorted(core_counts or range(1, cpu.total_cores + 1))
    components = cpu_components(cpu, fab, yield_model)
    full_mask = [1] * len(components)
    c_full = cm.embodied_carbon_system(components, full_mask)
    apps = []
    for app in sorted(fps_table):
        fps_by = fps_table[app]
        missing = [k for k in counts if k not in fps_by]
        if missing:
            raise ConfigError(f"app {app!r}: no fps measurement for core counts {missing}")
        parallelism = tlps.get(app, float(cpu.total_cores))
        constraints = ConstraintSet(
            qos=(QosBound(app, min_fps=qos_fps),),
            power=(("soc", power_cap_w),) if power_cap_w else (),
        )
        options = []
        for k in counts:
            fps = fps_by[k]
            delay = 1.0 / fps
            power = cpu_power(cpu, k, parallelism)
            c_overall = cm.embodied_carbon_system(components, [1] + cpu.core_mask(k))
            energy = power * delay
            rec = EvaluationRecord(
                config_id=f"cores={k:02d}", cluster=app, total_delay=delay, total_energy=energy,
                c_operational=cm.operational_carbon(use.ci_use, cm.joules_to_kwh(energy)),
                c_embodied_amortized=cm.amortize_embodied(c_overall, delay, use),
                c_embodied_overall=c_overall,
                areas={"soc": cpu.base_area + sum(cpu.core_areas()[:k]), "cpu": sum(cpu.core_areas()[:k])},
                powers={"soc": power},
                task_delays={app: delay},
            )
            lifetime = c_overall + use.ci_use * cm.joules_to_kwh(power * use.active_s)
            options.append(CoreOption(app, k, fps, power, c_overall, rec, compute_metric(MetricKind.TCDP, rec),
                                      feasible(rec, constraints).feasible, lifetime))
        ok = [o for o in options if o.feasible]
        if ok:
            best = min(ok, key=lambda o: (o.tcdp, o.cores))
            full = next((o for o in options if o.cores == cpu.total_cores), options[-1])
            apps.append(AppProvisioning(
                app, tuple(options), best.cores,
                1.0 - best.c_embodied_overall / full.c_embodied_overall,
                1.0 - best.lifetime_carbon / full.lifetime_carbon,
            ))
        else:
            apps.append(AppProvisioning(app, tuple(options), None, None, None))

    infeasible = tuple(a.app for a in apps if a.optimal_cores is None)
    joint, joint_savings = None, None
    jointly_ok = [k for k in counts if all(next(o for o in a.options if o.cores == k).feasible for a in apps)]
    if jointly_ok and apps:
        joint = min(jointly_ok, key=lambda k: (
            math.fsum(next(o for o in a.options if o.cores == k).tcdp for a in apps), k))
        c_joint = cm.embodied_carbon_system(components, [1] + cpu.core_mask(joint))
        joint_savings = 1.0 - c_joint / c_full
    return ProvisioningResult(tuple(apps), joint, joint_savings, infeasible)


# -- 3D stacking -----------------------------------------------------------------------

@dataclass(frozen=True)
class StackingRow:
    kernel: str
    embodied_ratio: float  # target embodied share of the 2D baseline's life-cycle carbon
    config_id: str
    inferences: float
    tcdp: float
    efficiency_vs_2d: float  # tCDP(2D) / tCDP(config); > 1 means better than 2D
    optimal: bool = False


def inferences_for_embodied_ratio(c_embodied: float, op_carbon_per_inference: float, ratio: float) -> float:
    """Lifetime (in inferences) at which embodied carbon is ``ratio`` of the total."""
    if not 0 < ratio <= 1:
        raise UsageError(f"embodied ratio must lie in (0, 1], got {ratio}")
    if op_carbon_per_inference <= 0:
        raise UsageError("operational carbon per inference must be > 0")
    return c_embodied * (1.0 - ratio) / (ratio * op_carbon_per_inference)


def stacking_study(base: AcceleratorConfig, variants: Sequence[AcceleratorConfig], kernels: Sequence[Kernel],
                   embodied_ratios: Sequence[float], fabs: Mapping[str, cm.FabProfile],
                   yield_model: cm.YieldModel, ci_use: float) -> list[StackingRow]:
    """Carbon efficiency of each variant relative to the planar baseline.

    Each scenario fixes the operational lifetime so that the baseline's
    embodied carbon is the requested share of its life-cycle carbon.
    """
    configs = [base] + [v for v in variants if v.id != base.id]
    rows = []
    for kernel in kernels:
        points = lifetime_points(configs, [kernel], fabs, yield_model)
        ref = points[0]
        for ratio in embodied_ratios:
            op_per_inf = ci_use * cm.joules_to_kwh(ref.energy)
            n = inferences_for_embodied_ratio(ref.c_embodied, op_per_inf, ratio)
            ref_tcdp = ref.tcdp(n, ci_use)
            group = []
            for p in points:
                value = p.tcdp(n, ci_use)
                group.append(StackingRow(kernel.id, ratio, p.config_id, n, value, ref_tcdp / value))
            best = min(group, key=lambda r: (r.tcdp, r.config_id))
            rows.extend(
                StackingRow(r.kernel, r.embodied_ratio, r.config_id, r.inferences, r.tcdp,
                            r.efficiency_vs_2d, r is best)
                for r in group
            )
    return rows
