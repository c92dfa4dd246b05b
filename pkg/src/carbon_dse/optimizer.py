"""Scalarized carbon-delay minimization over an enumerated design space.

Two objectives per design x::

    F1(x) = C_operational(x) * D(x)
    F2(x) = C_embodied(x) * D(x)        (amortized embodied carbon)

are folded into ``F1 + beta * F2`` and minimized subject to area, QoS and
power bounds. ``beta = 1`` is tCDP; small beta favors operational carbon,
large beta embodied carbon. The search is exhaustive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, UsageError
from .metrics import EvaluationRecord

REL_TOL = 1e-12


@dataclass(frozen=True)
class QosBound:
    """Minimum frame rate or maximum seconds for one task (or ``all`` tasks)."""

    selector: str
    min_fps: float | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if (self.min_fps is None) == (self.max_seconds is None):
            raise ConfigError(f"QoS bound on {self.selector!r} needs exactly one of min_fps / max_seconds")
        bound = self.min_fps if self.min_fps is not None else self.max_seconds
        if not bound > 0:
            raise ConfigError(f"QoS bound on {self.selector!r} must be positive")

    @property
    def max_delay(self) -> float:
        return 1.0 / self.min_fps if self.min_fps is not None else self.max_seconds


@dataclass(frozen=True)
class ConstraintSet:
    area: tuple[tuple[str, float], ...] = ()  # (selector, max cm^2)
    qos: tuple[QosBound, ...] = ()
    power: tuple[tuple[str, float], ...] = ()  # (selector, max W)

    def __post_init__(self):
        for kind, bounds in (("area", self.area), ("power", self.power)):
            for selector, bound in bounds:
                if not bound > 0:
                    raise ConfigError(f"{kind} bound on {selector!r} must be positive, got {bound}")
        object.__setattr__(self, "area", tuple(tuple(b) for b in self.area))
        object.__setattr__(self, "power", tuple(tuple(b) for b in self.power))
        object.__setattr__(self, "qos", tuple(self.qos))

    def loosened(self, factor: float) -> ConstraintSet:
        """Every bound relaxed by ``factor`` >= 1."""
        qos = tuple(
            QosBound(q.selector, min_fps=q.min_fps / factor) if q.min_fps is not None
            else QosBound(q.selector, max_seconds=q.max_seconds * factor)
            for q in self.qos
        )
        return ConstraintSet(
            area=tuple((s, b * factor) for s, b in self.area),
            qos=qos,
            power=tuple((s, b * factor) for s, b in self.power),
        )


def default_beta_sweep() -> tuple[float, ...]:
    return tuple(float(b) for b in np.logspace(-3, 3, 25))


@dataclass(frozen=True)
class ScalarizationConfig:
    beta: float | tuple[float, ...] = 1.0
    lambda1: float = 1.0

    def __post_init__(self):
        if self.lambda1 != 1.0:
            raise ConfigError("lambda1 is fixed at 1")
        betas = self.betas
        if any(not b > 0 for b in betas):
            raise ConfigError(f"every beta must be > 0, got {betas}")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ConfigError("a beta sweep must be strictly increasing")

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(self.beta) if isinstance(self.beta, (tuple, list)) else (float(self.beta),)


@dataclass(frozen=True)
class Violation:
    kind: str  # area | qos | power
    selector: str
    bound: float
    value: float
    margin: float  # negative when violated

    @property
    def relative_margin(self) -> float:
        return self.margin / self.bound


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...] = ()

    def __bool__(self):
        return self.feasible

    @property
    def tightest(self) -> Violation | None:
        if not self.violations:
            return None
        return min(self.violations, key=lambda v: (v.relative_margin, v.kind, v.selector))


def _lookup(table, selector: str, kind: str, config_id: str) -> float:
    try:
        return table[selector]
    except KeyError:
        raise ConfigError(
            f"{kind} selector {selector!r} does not resolve for {config_id}; known: {sorted(table)}"
        ) from None


def _at_most(value: float, bound: float) -> bool:
    return value <= bound or math.isclose(value, bound, rel_tol=REL_TOL)


def feasible(rec: EvaluationRecord, constraints: ConstraintSet | None) -> FeasibilityReport:
    """Check every bound; ``<=`` and ``>=`` are inclusive."""
    if constraints is None:
        return FeasibilityReport(True)
    violations = []
    for selector, bound in constraints.area:
        value = _lookup(rec.areas, selector, "area", rec.config_id)
        if not _at_most(value, bound):
            violations.append(Violation("area", selector, bound, value, bound - value))
    for selector, bound in constraints.power:
        value = _lookup(rec.powers, selector, "power", rec.config_id)
        if not _at_most(value, bound):
            violations.append(Violation("power", selector, bound, value, bound - value))
    for q in constraints.qos:
        if q.selector == "all":
            if not rec.task_delays:
                raise ConfigError(f"QoS selector 'all' needs task delays for {rec.config_id}")
            delay = max(rec.task_delays.values())
        else:
            delay = _lookup(rec.task_delays, q.selector, "qos", rec.config_id)
        if q.min_fps is not None:
            fps = 1.0 / delay
            if not (fps >= q.min_fps or math.isclose(fps, q.min_fps, rel_tol=REL_TOL)):
                violations.append(Violation("qos", q.selector, q.min_fps, fps, fps - q.min_fps))
        elif not _at_most(delay, q.max_seconds):
            violations.append(Violation("qos", q.selector, q.max_seconds, delay, q.max_seconds - delay))
    return FeasibilityReport(not violations, tuple(violations))


def objective(rec: EvaluationRecord, beta: float) -> float:
    if not beta > 0:
        raise UsageError(f"beta must be > 0, got {beta}")
    return (rec.c_operational + beta * rec.c_embodied_amortized) * rec.total_delay


def f1(rec: EvaluationRecord) -> float:
    return rec.c_operational * rec.total_delay


def f2(rec: EvaluationRecord) -> float:
    return rec.c_embodied_amortized * rec.total_delay


@dataclass(frozen=True)
class Candidate:
    record: EvaluationRecord
    objective: float
    report: FeasibilityReport


@dataclass(frozen=True)
class OptimizationResult:
    beta: float
    best: EvaluationRecord | None
    ranked: tuple[Candidate, ...]
    diagnosis: tuple[tuple[str, Violation], ...] = ()

    @property
    def feasible(self) -> bool:
        return self.best is not None

    @property
    def best_objective(self) -> float | None:
        return self.ranked[0].objective if self.best is not None else None


def optimize(records: Sequence[EvaluationRecord], beta: float = 1.0,
             constraints: ConstraintSet | None = None) -> OptimizationResult:
    """Feasible argmin of the scalarized objective; ties go to the smaller config id.

    If nothing is feasible, ``best`` is None and ``diagnosis`` names the
    tightest violated bound of every config.
    """
    if not records:
        raise UsageError("design space is empty")
    candidates = [Candidate(r, objective(r, beta), feasible(r, constraints)) for r in records]
    candidates.sort(key=lambda c: (not c.report.feasible, c.objective, c.record.config_id))
    best = candidates[0].record if candidates[0].report.feasible else None
    diagnosis: tuple = ()
    if best is None:
        seen = {}
        for c in candidates:
            seen.setdefault(c.record.config_id, c.report.tightest)
        diagnosis = tuple(sorted(seen.items()))
    return OptimizationResult(beta, best, tuple(candidates), diagnosis)


@dataclass(frozen=True)
class ParetoPoint:
    config_id: str
    f1: float
    f2: float


@dataclass(frozen=True)
class ParetoSweep:
    points: tuple[ParetoPoint, ...]
    selections: tuple[tuple[float, ParetoPoint | None], ...] = field(default=())


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.f1 <= b.f1 and a.f2 <= b.f2 and (a.f1 < b.f1 or a.f2 < b.f2)


def is_non_dominated(points: Sequence[ParetoPoint], among: Iterable[ParetoPoint] | None = None) -> bool:
    """True if no point of ``among`` (default: ``points``) dominates any of ``points``."""
    pool = list(points if among is None else among)
    return not any(dominates(q, p) for p in points for q in pool)


def pareto_sweep(records: Sequence[EvaluationRecord], betas: Sequence[float] | None = None,
                 constraints: ConstraintSet | None = None) -> ParetoSweep:
    """Per-beta feasible argmins, deduplicated and filtered to the non-dominated set."""
    betas = tuple(betas) if betas is not None else default_beta_sweep()
    ScalarizationConfig(betas)
    if not records:
        return ParetoSweep(())
    selections = []
    chosen: dict[str, ParetoPoint] = {}
    for beta in betas:
        result = optimize(records, beta, constraints)
        if result.best is None:
            selections.append((beta, None))
            continue
        point = ParetoPoint(result.best.config_id, f1(result.best), f2(result.best))
        selections.append((beta, point))
        chosen.setdefault(point.config_id, point)
    pool = list(chosen.values())
    front = [p for p in pool if not any(dominates(q, p) for q in pool)]
    front.sort(key=lambda p: (p.f1, p.f2, p.config_id))
    return ParetoSweep(tuple(front), tuple(selections))
