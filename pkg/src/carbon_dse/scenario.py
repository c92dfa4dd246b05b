"""Scenario files: parsing, validation and reproducible study runs.

A scenario is an INI file. ``[scenario]`` names the inputs and the studies
to run; every other section configures one study. Values are resolved with
the precedence command-line override > scenario file > built-in default,
and the fully resolved configuration is written to ``manifest.json`` next
to the output tables together with SHA-256 digests of every input file.

Input paths are relative to the scenario file. The output directory is
relative to the working directory.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import __version__
from . import carbon_model as cm
from . import hw_model as hw
from . import studies as st
from .errors import CarbonDseError, ConfigError
from .metrics import EVALUATION_HEADER, EvaluationRecord, MetricKind, evaluate_config, evaluation_rows
from .optimizer import ConstraintSet, QosBound, ScalarizationConfig, f1, f2, optimize, pareto_sweep
from .report import LONG_HEADER, write_table
from .workload import KernelCluster, TaskMatrix, load_kernels, load_tasks

STUDIES = ("evaluate", "optimize", "catalog", "lifetime", "replacement", "provision", "stack3d")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

DATA_DIR = Path(str(resources.files("carbon_dse") / "data"))
SCENARIO_DIR = DATA_DIR / "scenarios"

ALL_KERNELS = "All"

# name -> (default, is_path)
DEFAULTS: dict[str, dict[str, tuple[str, bool]]] = {
    "scenario": {
        "name": ("", False),
        "fab_table": (str(DATA_DIR / "fab.ini"), True),
        "hardware_catalog": (str(DATA_DIR / "hardware.csv"), True),
        "kernels": (str(DATA_DIR / "kernels.csv"), True),
        "tasks": (str(DATA_DIR / "tasks.csv"), True),
        "cluster": (ALL_KERNELS, False),
        "studies": ("", False),
        "output_dir": ("", False),
        "long_format": ("false", False),
    },
    "use": {
        "ci_use_g_per_kwh": ("380", False),
        "lifetime_years": ("4", False),
        "daily_active_hours": ("24", False),
    },
    "yield": {
        "model": ("fixed", False),
        "fixed_yield": ("0.85", False),
        "die_placement": ("false", False),
    },
    "evaluate": {
        "configs": ("A-1, A-2, A-3, A-4", False),
        "clusters": ("", False),
    },
    "optimize": {
        "space": ("grid", False),
        "template": ("DSE", False),
        "mac_arrays": ("1, 2, 3, 4, 6, 8, 10, 12, 14, 16, 20", False),
        "sram_mb": ("0.5, 1, 2, 3, 4, 6, 8, 10, 12, 14, 16", False),
        "configs": ("", False),
        "clusters": ("", False),
        "beta": ("1", False),
        "betas": ("", False),
        "pareto": ("true", False),
    },
    "catalog": {
        "catalog": (str(DATA_DIR / "accelerators_catalog.csv"), True),
        "monolithic_yield": ("0.80", False),
        "chiplet_multiplier": ("0.59", False),
    },
    "lifetime": {
        "configs": ("A-1, A-2, A-3, A-4", False),
        "n_min": ("1e3", False),
        "n_max": ("1e8", False),
        "points": ("51", False),
    },
    "replacement": {
        "device": ("VR-SoC", False),
        "power_w": ("8.3", False),
        "embodied_g": ("", False),
        "daily_hours": ("1, 3, 12", False),
        "annual_efficiency_gain": ("1.21", False),
        "horizon_years": ("10", False),
        "periods": ("1, 2, 3, 4, 5", False),
    },
    "provision": {
        "tlp": (str(DATA_DIR / "tlp.csv"), True),
        "fps": (str(DATA_DIR / "fps_by_cores.csv"), True),
        "qos_fps": ("60", False),
        "power_cap_w": ("", False),
    },
    "cpu": {
        "gold_cores": ("4", False),
        "silver_cores": ("4", False),
        "gold_core_area": ("0.075", False),
        "silver_core_area": ("0.0375", False),
        "gold_core_power": ("1.2", False),
        "silver_core_power": ("0.35", False),
        "base_area": ("1.8", False),
        "base_power": ("2.1", False),
        "fab_node": ("7nm", False),
    },
    "stack3d": {
        "base": ("A-4", False),
        "layouts": ("1K_4M, 1K_8M, 1K_16M, 2K_4M, 2K_8M, 2K_16M", False),
        "kernels": ("HRN, DN, SR-512, SR-1024", False),
        "embodied_ratios": ("0.98, 0.80, 0.25, 0.06", False),
        "stack_bandwidth": ("", False),
    },
}

# sections whose keys are free-form
OPEN_SECTIONS = {"clusters", "constraints"}


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {text!r}") from None


def _int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {text!r}") from None


def _floats(text: str, where: str) -> list[float]:
    return [_float(t, where) for t in _split(text)]


def find_scenario(ref: str | Path) -> Path:
    """A path, or the name of a built-in scenario."""
    path = Path(ref)
    if path.is_file():
        return path
    builtin = SCENARIO_DIR / f"{ref}.ini"
    if builtin.is_file():
        return builtin
    raise ConfigError(f"missing file: {ref} (and no built-in scenario of that name)")


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.ini"))


@dataclass
class Scenario:
    """A resolved scenario: every known key has a value."""

    path: Path
    values: dict[str, dict[str, str]]
    studies: tuple[str, ...]
    output_dir: Path
    clusters: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.values["scenario"]["name"]

    def get(self, section: str, key: str) -> str:
        return self.values.get(section, {}).get(key, "")

    def input_path(self, section: str, key: str) -> Path:
        return Path(self.get(section, key))

    def resolved(self) -> dict:
        out = {s: dict(sorted(v.items())) for s, v in sorted(self.values.items())}
        out["clusters"] = {k: list(v) for k, v in sorted(self.clusters.items())}
        return out


def load_scenario(ref: str | Path, overrides: Mapping[str, str] | None = None) -> Scenario:
    """Parse and resolve a scenario; ``overrides`` maps ``section.key`` to a value."""
    path = find_scenario(ref)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent.resolve()
    values: dict[str, dict[str, str]] = {s: {k: d for k, (d, _) in keys.items()} for s, keys in DEFAULTS.items()}
    for section in parser.sections():
        if section not in DEFAULTS and section not in OPEN_SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        dest = values.setdefault(section, {})
        for key, raw in parser.items(section):
            if section in DEFAULTS and key not in DEFAULTS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            is_path = section in DEFAULTS and DEFAULTS[section][key][1]
            dest[key] = str((base / raw).resolve()) if is_path and raw else raw
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if section in DEFAULTS and key not in DEFAULTS[section]:
            raise ConfigError(f"override {dotted!r}: unknown key")
        if section not in DEFAULTS and section not in OPEN_SECTIONS:
            raise ConfigError(f"override {dotted!r}: unknown section")
        is_path = section in DEFAULTS and DEFAULTS[section][key][1]
        values.setdefault(section, {})[key] = str(Path(raw).resolve()) if is_path and raw else raw
    if not values["scenario"]["name"]:
        values["scenario"]["name"] = path.stem
    studies = tuple(_split(values["scenario"]["studies"]))
    unknown = [s for s in studies if s not in STUDIES]
    if unknown:
        raise ConfigError(f"{path}: unknown studies {unknown}; known: {list(STUDIES)}")
    out = values["scenario"]["output_dir"] or os.path.join("carbon_dse_out", values["scenario"]["name"])
    clusters = {name: tuple(_split(members)) for name, members in values.pop("clusters", {}).items()}
    return Scenario(path, values, studies, Path(out), clusters)


# -- shared inputs -----------------------------------------------------------------

@dataclass
class Inputs:
    fabs: dict[str, cm.FabProfile]
    grids: dict[str, float]
    catalog: dict[str, hw.AcceleratorConfig]
    kernels: dict
    tasks: TaskMatrix
    use: cm.UsePhaseProfile
    yield_model: cm.YieldModel
    digests: dict[str, str] = field(default_factory=dict)


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def use_profile(sc: Scenario) -> cm.UsePhaseProfile:
    return cm.UsePhaseProfile.from_daily_use(
        ci_use=_float(sc.get("use", "ci_use_g_per_kwh"), "use.ci_use_g_per_kwh"),
        years=_float(sc.get("use", "lifetime_years"), "use.lifetime_years"),
        daily_active_hours=_float(sc.get("use", "daily_active_hours"), "use.daily_active_hours"),
    )


def yield_model(sc: Scenario) -> cm.YieldModel:
    kind = sc.get("yield", "model").strip().lower()
    placement = _bool(sc.get("yield", "die_placement"), "yield.die_placement")
    if kind == "fixed":
        return cm.YieldModel(cm.FixedYield(_float(sc.get("yield", "fixed_yield"), "yield.fixed_yield")), placement)
    if kind == "murphy":
        return cm.YieldModel(cm.MurphyYield(), placement)
    raise ConfigError(f"yield.model must be fixed or murphy, got {kind!r}")


def load_inputs(sc: Scenario) -> Inputs:
    fab_path = sc.input_path("scenario", "fab_table")
    fabs = cm.load_fab_profiles(fab_path)
    grids = cm.load_grid_intensities(fab_path)
    catalog = hw.load_hardware_catalog(sc.input_path("scenario", "hardware_catalog"))
    kernels = load_kernels(sc.input_path("scenario", "kernels"))
    tasks = load_tasks(sc.input_path("scenario", "tasks"), kernels)
    for name, members in sc.clusters.items():
        KernelCluster(name, members).check(kernels)
    for cfg in catalog.values():
        hw.resolve_fab(cfg.fab_node, fabs)
    inputs = Inputs(fabs, grids, catalog, kernels, tasks, use_profile(sc), yield_model(sc))
    for key in ("fab_table", "hardware_catalog", "kernels", "tasks"):
        inputs.digests[f"scenario.{key}"] = _digest(sc.input_path("scenario", key))
    return inputs


def cluster_members(sc: Scenario, inputs: Inputs, name: str) -> tuple[str, ...]:
    if name in sc.clusters:
        return sc.clusters[name]
    if name == ALL_KERNELS:
        return tuple(inputs.tasks.kernels)
    raise ConfigError(f"unknown cluster {name!r}; defined: {sorted(sc.clusters) + [ALL_KERNELS]}")


def cluster_tasks(sc: Scenario, inputs: Inputs, name: str) -> TaskMatrix:
    members = cluster_members(sc, inputs, name)
    tasks = inputs.tasks.restrict(members)
    if not tasks.tasks:
        raise ConfigError(f"cluster {name!r}: no task uses only its kernels")
    return tasks


def _configs(sc: Scenario, inputs: Inputs, section: str) -> list[hw.AcceleratorConfig]:
    ids = _split(sc.get(section, "configs"))
    missing = [i for i in ids if i not in inputs.catalog]
    if missing:
        raise ConfigError(f"{section}.configs: unknown config ids {missing}")
    return [inputs.catalog[i] for i in ids]


def worker_count() -> int:
    raw = os.environ.get("CARBON_DSE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CARBON_DSE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("CARBON_DSE_THREADS must be >= 0")
    return n or min(8, os.cpu_count() or 1)


def evaluate_many(configs, tasks: TaskMatrix, inputs: Inputs, cluster: str) -> list[EvaluationRecord]:
    """Evaluate configs in parallel; the result order follows ``configs``."""
    def one(cfg):
        fab = hw.resolve_fab(cfg.fab_node, inputs.fabs)
        return evaluate_config(cfg, tasks, inputs.kernels, fab, inputs.yield_model, inputs.use, cluster)

    workers = worker_count()
    if workers == 1 or len(configs) < 2:
        return [one(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, configs))


# -- studies ------------------------------------------------------------------------

@dataclass
class StudyOutput:
    tables: dict[str, tuple[tuple[str, ...], list[list]]] = field(default_factory=dict)
    long_rows: list[list] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)
    infeasible: bool = False


def _constraints(sc: Scenario) -> ConstraintSet:
    area, qos, power = [], [], []
    for key, raw in sorted(sc.values.get("constraints", {}).items()):
        kind, _, rest = key.partition(".")
        where = f"constraints.{key}"
        value = _float(raw, where)
        if kind == "area" and rest:
            area.append((rest, value))
        elif kind == "power" and rest.endswith("_w"):
            power.append((rest[:-2], value))
        elif kind == "qos" and rest.endswith("_fps"):
            qos.append(QosBound(rest[:-4], min_fps=value))
        elif kind == "qos" and rest.endswith("_s"):
            qos.append(QosBound(rest[:-2], max_seconds=value))
        else:
            raise ConfigError(f"{where}: expected area.<sel>, power.<sel>_w, qos.<task>_fps or qos.<task>_s")
    return ConstraintSet(tuple(area), tuple(qos), tuple(power))


def _clusters_for(sc: Scenario, section: str) -> list[str]:
    return _split(sc.get(section, "clusters")) or [sc.get("scenario", "cluster")]


def run_evaluate(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    configs = _configs(sc, inputs, "evaluate")
    rows = []
    for cluster in _clusters_for(sc, "evaluate"):
        recs = evaluate_many(configs, cluster_tasks(sc, inputs, cluster), inputs, cluster)
        rows += evaluation_rows(recs, sc.name)
        for r in recs:
            out.long_rows.append(["evaluate", r.config_id, f"tCDP|{cluster}", r.c_total * r.total_delay,
                                  r.config_id, cluster])
    out.tables["evaluation.csv"] = (EVALUATION_HEADER, rows)
    return out


def design_space(sc: Scenario, inputs: Inputs) -> list[hw.AcceleratorConfig]:
    space = sc.get("optimize", "space").strip().lower()
    if space == "catalog":
        return _configs(sc, inputs, "optimize")
    if space != "grid":
        raise ConfigError(f"optimize.space must be grid or catalog, got {space!r}")
    template_id = sc.get("optimize", "template")
    if template_id not in inputs.catalog:
        raise ConfigError(f"optimize.template: unknown config id {template_id!r}")
    macs = [_int(t, "optimize.mac_arrays") for t in _split(sc.get("optimize", "mac_arrays"))]
    srams = _floats(sc.get("optimize", "sram_mb"), "optimize.sram_mb")
    return hw.enumerate_design_space(inputs.catalog[template_id], macs, srams)


OPTIMIZE_HEADER = ("config_id", "cluster", "beta", "rank", "objective", "f1_op_delay", "f2_emb_delay",
                   "delay_s", "c_total_g", "area_cm2", "feasible", "optimal", "tightest_violation",
                   "violation_margin", "scenario")
PARETO_HEADER = ("config_id", "cluster", "beta", "f1_op_delay", "f2_emb_delay", "on_front", "scenario")
DIAGNOSIS_HEADER = ("config_id", "cluster", "beta", "kind", "selector", "bound", "value", "relative_margin",
                    "scenario")


def run_optimize(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    configs = design_space(sc, inputs)
    constraints = _constraints(sc)
    beta = _float(sc.get("optimize", "beta"), "optimize.beta")
    ScalarizationConfig(beta)
    betas_raw = sc.get("optimize", "betas")
    betas = tuple(_floats(betas_raw, "optimize.betas")) if betas_raw else None
    rows, pareto_rows, diagnosis_rows = [], [], []
    for cluster in _clusters_for(sc, "optimize"):
        recs = evaluate_many(configs, cluster_tasks(sc, inputs, cluster), inputs, cluster)
        result = optimize(recs, beta, constraints)
        for rank, cand in enumerate(result.ranked, start=1):
            r, v = cand.record, cand.report.tightest
            rows.append([r.config_id, cluster, beta, rank, cand.objective, f1(r), f2(r), r.total_delay,
                         r.c_total, r.areas.get("soc"), cand.report.feasible,
                         result.best is not None and r.config_id == result.best.config_id,
                         f"{v.kind}:{v.selector}" if v else "", v.relative_margin if v else None, sc.name])
        if result.best is None:
            out.infeasible = True
            out.messages.append(f"optimize[{cluster}]: no feasible design among {len(recs)} configs")
            for config_id, v in result.diagnosis:
                diagnosis_rows.append([config_id, cluster, beta, v.kind, v.selector, v.bound, v.value,
                                       v.relative_margin, sc.name])
        else:
            out.messages.append(f"optimize[{cluster}]: best {result.best.config_id} "
                                f"(objective {result.best_objective:.6g})")
        if _bool(sc.get("optimize", "pareto"), "optimize.pareto"):
            sweep = pareto_sweep(recs, betas, constraints)
            front = {p.config_id for p in sweep.points}
            for b, p in sweep.selections:
                if p is None:
                    pareto_rows.append(["", cluster, b, None, None, False, sc.name])
                else:
                    pareto_rows.append([p.config_id, cluster, b, p.f1, p.f2, p.config_id in front, sc.name])
                    out.long_rows.append(["optimize", b, f"F2|{cluster}", p.f2, p.config_id, cluster])
    out.tables["optimize.csv"] = (OPTIMIZE_HEADER, rows)
    if pareto_rows:
        out.tables["pareto.csv"] = (PARETO_HEADER, pareto_rows)
    if diagnosis_rows:
        out.tables["diagnosis.csv"] = (DIAGNOSIS_HEADER, diagnosis_rows)
    return out


CATALOG_HEADER = ("config_id", "cluster", "metric", "value", "optimal", "scenario")


def run_catalog(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    path = sc.input_path("catalog", "catalog")
    entries = st.load_catalog(path)
    inputs.digests["catalog.catalog"] = _digest(path)
    multiplier = sc.get("catalog", "chiplet_multiplier")
    policy = st.YieldPolicy(
        monolithic=cm.YieldModel(cm.FixedYield(_float(sc.get("catalog", "monolithic_yield"),
                                                       "catalog.monolithic_yield"))),
        chiplet_multiplier=_float(multiplier, "catalog.chiplet_multiplier") if multiplier else None,
    )
    result = st.catalog_metrics(entries, inputs.fabs, policy, inputs.grids, inputs.use)
    rows = []
    for kind in MetricKind:
        for entry in entries:
            value = result.values[entry.name][kind]
            rows.append([entry.name, "catalog", kind.value, value, result.optima[kind] == entry.name, sc.name])
            out.long_rows.append(["catalog", entry.name, kind.value, value, entry.name, "catalog"])
    out.tables["catalog.csv"] = (CATALOG_HEADER, rows)
    optima = ", ".join(f"{k.value}={v}" for k, v in result.optima.items())
    out.messages.append(f"catalog: optima {optima}; metrics disagree: {'yes' if result.disagreement else 'no'}")
    return out


LIFETIME_HEADER = ("config_id", "cluster", "inferences", "tcdp", "tcdp_per_inference", "scenario")
CROSSOVER_HEADER = ("config_id", "cluster", "other_config_id", "n_star", "winner_before", "winner_after",
                    "scenario")


def run_lifetime(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    configs = _configs(sc, inputs, "lifetime")
    cluster = sc.get("scenario", "cluster")
    kernels = [inputs.kernels[k] for k in cluster_members(sc, inputs, cluster)]
    points = st.lifetime_points(configs, kernels, inputs.fabs, inputs.yield_model)
    n_min = _float(sc.get("lifetime", "n_min"), "lifetime.n_min")
    n_max = _float(sc.get("lifetime", "n_max"), "lifetime.n_max")
    n_points = _int(sc.get("lifetime", "points"), "lifetime.points")
    if not 0 < n_min < n_max or n_points < 2:
        raise ConfigError("lifetime: need 0 < n_min < n_max and at least two points")
    counts = np.logspace(np.log10(n_min), np.log10(n_max), n_points)
    result = st.lifetime_crossover(points, inputs.use.ci_use, counts)
    rows = []
    for p in points:
        for n, value in zip(result.counts, result.curves[p.config_id]):
            rows.append([p.config_id, cluster, n, value, value / n, sc.name])
            out.long_rows.append(["lifetime", n, p.config_id, value / n, p.config_id, cluster])
    cross_rows = [[c.first, cluster, c.second, c.n_star, c.winner_before, c.winner_after, sc.name]
                  for c in result.crossovers if c.n_star is not None]
    out.tables["lifetime_curves.csv"] = (LIFETIME_HEADER, rows)
    out.tables["crossovers.csv"] = (CROSSOVER_HEADER, cross_rows)
    out.messages.append(f"lifetime: {len(cross_rows)} ranking flips between {n_min:g} and {n_max:g} inferences")
    return out


def cpu_config(sc: Scenario) -> hw.CpuConfig:
    gold = _int(sc.get("cpu", "gold_cores"), "cpu.gold_cores")
    silver = _int(sc.get("cpu", "silver_cores"), "cpu.silver_cores")
    kw = {k: _float(sc.get("cpu", k), f"cpu.{k}") for k in (
        "gold_core_area", "silver_core_area", "gold_core_power", "silver_core_power", "base_area", "base_power")}
    return hw.CpuConfig(gold + silver, gold, silver, fab_node=sc.get("cpu", "fab_node"), **kw)


REPLACEMENT_HEADER = ("config_id", "cluster", "daily_hours", "period_years", "devices", "operational_g",
                      "embodied_g", "total_g", "normalized", "optimal", "degenerate", "scenario")


def run_replacement(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    device = sc.get("replacement", "device")
    embodied_raw = sc.get("replacement", "embodied_g")
    if embodied_raw:
        embodied = _float(embodied_raw, "replacement.embodied_g")
    else:
        cpu = cpu_config(sc)
        fab = hw.resolve_fab(cpu.fab_node, inputs.fabs)
        embodied = cm.embodied_carbon_die(cm.DieSpec(cpu.soc_area, fab), inputs.yield_model)
    periods = [_int(t, "replacement.periods") for t in _split(sc.get("replacement", "periods"))]
    rows = []
    for hours in _floats(sc.get("replacement", "daily_hours"), "replacement.daily_hours"):
        plan = st.LifetimePlan(
            daily_hours=hours, power_w=_float(sc.get("replacement", "power_w"), "replacement.power_w"),
            embodied_g=embodied, ci_use=inputs.use.ci_use,
            horizon_years=_int(sc.get("replacement", "horizon_years"), "replacement.horizon_years"),
            annual_efficiency_gain=_float(sc.get("replacement", "annual_efficiency_gain"),
                                          "replacement.annual_efficiency_gain"),
        )
        result = st.replacement_study(plan, periods)
        norm = result.normalized()
        cluster = f"{hours:g}h/day"
        for h in result.per_period:
            rows.append([device, cluster, hours, h.period, h.devices, h.operational, h.embodied, h.total,
                         norm[h.period], h.period == result.optimal_period, result.degenerate, sc.name])
            out.long_rows.append(["replacement", h.period, cluster, norm[h.period], device, cluster])
        out.messages.append(f"replacement[{cluster}]: optimal period {result.optimal_period} years")
    out.tables["replacement.csv"] = (REPLACEMENT_HEADER, rows)
    return out


PROVISION_HEADER = ("config_id", "cluster", "cores", "fps", "power_w", "c_emb_overall_g", "tcdp",
                    "lifetime_carbon_g", "feasible", "optimal", "scenario")
PROVISION_SUMMARY_HEADER = ("config_id", "cluster", "optimal_cores", "embodied_savings", "total_savings",
                            "scenario")


def run_provision(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    tlp_path, fps_path = sc.input_path("provision", "tlp"), sc.input_path("provision", "fps")
    tlps = {app: st.tlp(b) for app, b in st.load_tlp(tlp_path).items()}
    fps = st.load_fps_by_cores(fps_path)
    inputs.digests["provision.tlp"] = _digest(tlp_path)
    inputs.digests["provision.fps"] = _digest(fps_path)
    cpu = cpu_config(sc)
    cap = sc.get("provision", "power_cap_w")
    result = st.provisioning_study(
        cpu, fps, tlps, hw.resolve_fab(cpu.fab_node, inputs.fabs), inputs.yield_model, inputs.use,
        qos_fps=_float(sc.get("provision", "qos_fps"), "provision.qos_fps"),
        power_cap_w=_float(cap, "provision.power_cap_w") if cap else None,
    )
    rows, summary = [], []
    for app in result.apps:
        for o in app.options:
            rows.append([o.record.config_id, app.app, o.cores, o.fps, o.power_w, o.c_embodied_overall, o.tcdp,
                         o.lifetime_carbon, o.feasible, o.cores == app.optimal_cores, sc.name])
            out.long_rows.append(["provision", o.cores, app.app, o.tcdp, o.record.config_id, app.app])
        cid = f"cores={app.optimal_cores:02d}" if app.optimal_cores else ""
        summary.append([cid, app.app, app.optimal_cores, app.embodied_savings, app.total_savings, sc.name])
    joint = f"cores={result.joint_cores:02d}" if result.joint_cores else ""
    summary.append([joint, "All Apps", result.joint_cores, result.joint_embodied_savings, None, sc.name])
    out.tables["provision.csv"] = (PROVISION_HEADER, rows)
    out.tables["provision_summary.csv"] = (PROVISION_SUMMARY_HEADER, summary)
    if result.infeasible_apps:
        out.infeasible = True
        out.messages.append(f"provision: no core count meets QoS for {list(result.infeasible_apps)}")
    out.messages.append(f"provision: joint optimum {result.joint_cores} cores")
    return out


STACK_HEADER = ("config_id", "cluster", "embodied_ratio", "inferences", "tcdp", "efficiency_vs_2d", "optimal",
                "scenario")


def run_stack3d(sc: Scenario, inputs: Inputs) -> StudyOutput:
    out = StudyOutput()
    base_id = sc.get("stack3d", "base")
    if base_id not in inputs.catalog:
        raise ConfigError(f"stack3d.base: unknown config id {base_id!r}")
    base = inputs.catalog[base_id]
    layouts = [hw.StackLayout.parse(t) for t in _split(sc.get("stack3d", "layouts"))]
    bw = sc.get("stack3d", "stack_bandwidth")
    variants = hw.stack3d_variants(base, layouts, _float(bw, "stack3d.stack_bandwidth") if bw else None)
    names = _split(sc.get("stack3d", "kernels"))
    missing = [k for k in names if k not in inputs.kernels]
    if missing:
        raise ConfigError(f"stack3d.kernels: unknown kernels {missing}")
    ratios = _floats(sc.get("stack3d", "embodied_ratios"), "stack3d.embodied_ratios")
    result = st.stacking_study(base, variants, [inputs.kernels[k] for k in names], ratios, inputs.fabs,
                               inputs.yield_model, inputs.use.ci_use)
    rows = []
    for r in result:
        cluster = f"{r.kernel}@{r.embodied_ratio:g}"
        rows.append([r.config_id, r.kernel, r.embodied_ratio, r.inferences, r.tcdp, r.efficiency_vs_2d,
                     r.optimal, sc.name])
        out.long_rows.append(["stack3d", r.config_id, cluster, r.efficiency_vs_2d, r.config_id, r.kernel])
    out.tables["stack3d.csv"] = (STACK_HEADER, rows)
    return out


RUNNERS: dict[str, Callable[[Scenario, Inputs], StudyOutput]] = {
    "evaluate": run_evaluate,
    "optimize": run_optimize,
    "catalog": run_catalog,
    "lifetime": run_lifetime,
    "replacement": run_replacement,
    "provision": run_provision,
    "stack3d": run_stack3d,
}


# -- validate / run ------------------------------------------------------------------

def validate(ref: str | Path, overrides: Mapping[str, str] | None = None) -> list[str]:
    """Schema and invariant check of every input without evaluating anything."""
    try:
        sc = load_scenario(ref, overrides)
    except CarbonDseError as exc:
        return [str(exc)]
    errors: list[str] = []

    def check(fn):
        try:
            fn()
        except CarbonDseError as exc:
            errors.append(str(exc))

    inputs = None
    try:
        inputs = load_inputs(sc)
    except CarbonDseError as exc:
        errors.append(str(exc))
    check(lambda: use_profile(sc))
    check(lambda: yield_model(sc))
    check(lambda: _constraints(sc))
    needs = set(sc.studies)
    if "provision" in needs:
        check(lambda: st.load_tlp(sc.input_path("provision", "tlp")))
        check(lambda: st.load_fps_by_cores(sc.input_path("provision", "fps")))
    if needs & {"provision", "replacement"}:
        check(lambda: cpu_config(sc))
    if "catalog" in needs:
        check(lambda: st.load_catalog(sc.input_path("catalog", "catalog")))
    if inputs is not None:
        for study in ("evaluate", "lifetime"):
            if study in needs:
                check(lambda s=study: _configs(sc, inputs, s))
        if "optimize" in needs:
            check(lambda: design_space(sc, inputs))
        for cluster in {sc.get("scenario", "cluster"), *_split(sc.get("evaluate", "clusters")),
                        *_split(sc.get("optimize", "clusters"))}:
            check(lambda c=cluster: cluster_tasks(sc, inputs, c))
        if "stack3d" in needs:
            def stack_inputs():
                if sc.get("stack3d", "base") not in inputs.catalog:
                    raise ConfigError(f"stack3d.base: unknown config id {sc.get('stack3d', 'base')!r}")
                for t in _split(sc.get("stack3d", "layouts")):
                    hw.StackLayout.parse(t)
            check(stack_inputs)
    return errors


@dataclass
class RunResult:
    status: int
    output_dir: Path
    files: list[Path]
    messages: list[str]


def run(ref: str | Path, overrides: Mapping[str, str] | None = None,
        only: tuple[str, ...] | None = None) -> RunResult:
    """Run the scenario's studies (or ``only`` these) and write every table plus the manifest."""
    sc = load_scenario(ref, overrides)
    errors = validate(ref, overrides)
    if errors:
        raise ConfigError("; ".join(errors))
    inputs = load_inputs(sc)
    studies = only if only is not None else sc.studies
    long_format = _bool(sc.get("scenario", "long_format"), "scenario.long_format")
    out_dir = sc.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    files, messages, long_rows = [], [], []
    status = EXIT_OK
    for study in studies:
        result = RUNNERS[study](sc, inputs)
        for name, (header, rows) in result.tables.items():
            files.append(write_table(out_dir / name, header, rows))
        long_rows += [row + [sc.name] for row in result.long_rows]
        messages += result.messages
        if result.infeasible:
            status = EXIT_INFEASIBLE
    if long_format and long_rows:
        files.append(write_table(out_dir / "plot_long.csv", LONG_HEADER + ("config_id", "cluster", "scenario"),
                                 long_rows))
    manifest = {
        "tool": "carbon-dse",
        "version": __version__,
        "scenario": sc.name,
        "scenario_file": {"path": str(sc.path), "sha256": _digest(sc.path)},
        "studies": list(studies),
        "inputs": {k: {"path": _input_path_for(sc, k), "sha256": v} for k, v in sorted(inputs.digests.items())},
        "resolved": sc.resolved(),
        "outputs": {p.name: _digest(p) for p in files},
        "status": status,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(manifest_path)
    if status == EXIT_INFEASIBLE:
        messages.append("infeasible: see diagnosis tables")
    return RunResult(status, out_dir, files, messages)


def _input_path_for(sc: Scenario, dotted: str) -> str:
    section, _, key = dotted.partition(".")
    return sc.get(section, key)


__all__ = [
    "STUDIES", "Scenario", "load_scenario", "find_scenario", "builtin_scenarios", "validate", "run",
    "RunResult", "EXIT_OK", "EXIT_INVALID", "EXIT_USAGE", "EXIT_INFEASIBLE",
]
