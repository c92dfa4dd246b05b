"""Efficiency metrics, evaluation records and ranking.

All metrics are monomials in delay (D), energy (E) and carbon, and lower
is better::

    EDP  = E * D            CDP  = C_emb * D        CEP  = C_emb * E
    CE2P = C_emb * E**2     C2EP = C_emb**2 * E     tCDP = (C_op + C_emb) * D

``C_emb`` is the amortized embodied carbon unless ``basis="overall"``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import carbon_model as cm
from .errors import UsageError
from .hw_model import AcceleratorConfig, config_area, config_embodied, estimate_kernel
from .report import write_table
from .workload import Kernel, TaskMatrix, task_delay, task_energy, total_delay, total_energy


class MetricKind(str, enum.Enum):
    EDP = "EDP"
    CDP = "CDP"
    CEP = "CEP"
    CE2P = "CE2P"
    C2EP = "C2EP"
    TCDP = "tCDP"


EMBODIED_ONLY = (MetricKind.CDP, MetricKind.CEP, MetricKind.CE2P, MetricKind.C2EP)


@dataclass(frozen=True)
class EvaluationRecord:
    """Delay, energy and carbon of one config running one workload."""

    config_id: str
    cluster: str
    total_delay: float  # s
    total_energy: float  # J
    c_operational: float  # gCO2e
    c_embodied_amortized: float  # gCO2e
    c_embodied_overall: float  # gCO2e
    areas: Mapping[str, float] = field(default_factory=dict, compare=False)
    powers: Mapping[str, float] = field(default_factory=dict, compare=False)
    task_delays: Mapping[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.total_delay > 0:
            raise UsageError(f"{self.config_id}: total delay must be > 0")
        for name in ("total_energy", "c_operational", "c_embodied_amortized", "c_embodied_overall"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise UsageError(f"{self.config_id}: {name} must be finite and >= 0, got {value}")

    @property
    def c_total(self) -> float:
        return self.c_operational + self.c_embodied_amortized

    def embodied(self, basis: str = "amortized") -> float:
        if basis == "amortized":
            return self.c_embodied_amortized
        if basis == "overall":
            return self.c_embodied_overall
        raise UsageError(f"unknown embodied basis {basis!r}")


def compute_metric(kind: MetricKind | str, rec: EvaluationRecord, basis: str = "amortized") -> float:
    """Metric value, evaluated exactly and rounded once."""
    kind = MetricKind(kind)
    d, e = Fraction(rec.total_delay), Fraction(rec.total_energy)
    c = Fraction(rec.embodied(basis))
    if kind is MetricKind.EDP:
        value = e * d
    elif kind is MetricKind.CDP:
        value = c * d
    elif kind is MetricKind.CEP:
        value = c * e
    elif kind is MetricKind.CE2P:
        value = c * e * e
    elif kind is MetricKind.C2EP:
        value = c * c * e
    else:
        value = (Fraction(rec.c_operational) + c) * d
    return float(value)


def all_metrics(rec: EvaluationRecord, basis: str = "amortized") -> dict[MetricKind, float]:
    return {kind: compute_metric(kind, rec, basis) for kind in MetricKind}


@dataclass(frozen=True)
class UtilizationSplit:
    utilization: float
    utilized_embodied: float
    unused_embodied: float


def split_embodied_by_utilization(c_embodied: float, u: float) -> UtilizationSplit:
    """Partition embodied carbon into the share kept busy and the idle share."""
    if not 0.0 <= u <= 1.0:
        raise UsageError(f"utilization must lie in [0, 1], got {u}")
    utilized = u * c_embodied
    return UtilizationSplit(u, utilized, c_embodied - utilized)


@dataclass(frozen=True)
class Ranked:
    rank: int
    record: EvaluationRecord
    value: float
    optimal: bool


def rank_by_metric(kind: MetricKind | str, records: Sequence[EvaluationRecord],
                   basis: str = "amortized") -> list[Ranked]:
    """Ascending order; equal values are ordered by config id."""
    if not records:
        raise UsageError("cannot rank an empty set of records")
    scored = sorted(((compute_metric(kind, r, basis), r.config_id, i) for i, r in enumerate(records)))
    return [
        Ranked(rank=pos + 1, record=records[i], value=value, optimal=pos == 0)
        for pos, (value, _, i) in enumerate(scored)
    ]


def argmin_by_metric(kind: MetricKind | str, records: Sequence[EvaluationRecord],
                     basis: str = "amortized") -> EvaluationRecord:
    return rank_by_metric(kind, records, basis)[0].record


# -- record assembly -------------------------------------------------------------

def evaluate_config(cfg: AcceleratorConfig, tasks: TaskMatrix, kernels: Mapping[str, Kernel],
                    fab: cm.FabProfile, yield_model: cm.YieldModel, use: cm.UsePhaseProfile,
                    cluster: str = "custom", repetitions: float = 1.0) -> EvaluationRecord:
    """Run every task of ``tasks`` once (times ``repetitions``) on ``cfg``."""
    results = [estimate_kernel(cfg, kernels[k]) for k in tasks.kernels]
    d_t = task_delay(tasks, [r.delay for r in results]) * repetitions
    e_t = task_energy(tasks, [r.energy for r in results]) * repetitions
    delay, energy = total_delay(d_t), total_energy(e_t)
    c_overall = config_embodied(cfg, fab, yield_model)
    total, dies = config_area(cfg)
    task_powers = [e / d for e, d in zip(e_t, d_t)]
    return EvaluationRecord(
        config_id=cfg.id,
        cluster=cluster,
        total_delay=delay,
        total_energy=energy,
        c_operational=cm.operational_carbon(use.ci_use, cm.joules_to_kwh(energy)),
        c_embodied_amortized=cm.amortize_embodied(c_overall, delay, use),
        c_embodied_overall=c_overall,
        areas={"soc": total, "total": total, "die": max(dies), "logic": cfg.logic_area,
               "memory": cfg.memory_area},
        powers={"soc": max(task_powers), "total": max(task_powers)},
        task_delays=dict(zip(tasks.tasks, (float(x) for x in d_t))),
    )


EVALUATION_HEADER = ("config_id", "cluster", "delay_s", "energy_j", "c_op_g", "c_emb_amortized_g",
                     "c_emb_overall_g", "edp", "cdp", "cep", "ce2p", "c2ep", "tcdp", "scenario")


def evaluation_rows(records: Iterable[EvaluationRecord], scenario: str) -> list[list]:
    rows = []
    for r in records:
        m = all_metrics(r)
        rows.append([r.config_id, r.cluster, r.total_delay, r.total_energy, r.c_operational,
                     r.c_embodied_amortized, r.c_embodied_overall, m[MetricKind.EDP], m[MetricKind.CDP],
                     m[MetricKind.CEP], m[MetricKind.CE2P], m[MetricKind.C2EP], m[MetricKind.TCDP], scenario])
    return rows


def write_evaluation_csv(path: str | Path, records: Iterable[EvaluationRecord], scenario: str) -> Path:
    return write_table(path, EVALUATION_HEADER, evaluation_rows(records, scenario))
