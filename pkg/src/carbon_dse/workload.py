"""Kernels, tasks and the kernel-call-count matrix."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, UsageError

CATEGORIES = ("AI", "XR")
KERNEL_COLUMNS = ("id", "category", "mac_ops", "param_bytes", "activation_bytes", "resolution")
TASK_COLUMNS = ("task_id", "kernel_id", "call_count")


@dataclass(frozen=True)
class Kernel:
    id: str
    category: str
    mac_ops: float
    param_bytes: float
    activation_bytes: float
    resolution_label: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"kernel {self.id!r}: category must be one of {CATEGORIES}, got {self.category!r}")
        if not self.mac_ops > 0:
            raise ConfigError(f"kernel {self.id!r}: mac_ops must be > 0")
        if self.param_bytes < 0 or self.activation_bytes < 0:
            raise ConfigError(f"kernel {self.id!r}: byte counts must be >= 0")

    @property
    def footprint_bytes(self) -> float:
        return self.param_bytes + self.activation_bytes


@dataclass(frozen=True)
class KernelProfile:
    kernel_id: str
    delay: float  # s
    energy: float  # J
    utilization: float = 1.0

    def __post_init__(self):
        if not self.delay > 0:
            raise ConfigError(f"kernel {self.kernel_id!r}: delay must be > 0")
        if self.energy < 0:
            raise ConfigError(f"kernel {self.kernel_id!r}: energy must be >= 0")
        if not 0.0 <= self.utilization <= 1.0:
            raise ConfigError(f"kernel {self.kernel_id!r}: utilization must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class TaskMatrix:
    """Call counts ``counts[t, k]``: how often task ``t`` invokes kernel ``k``."""

    tasks: tuple[str, ...]
    kernels: tuple[str, ...]
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (len(self.tasks), len(self.kernels)):
            raise ConfigError(
                f"count matrix shape {counts.shape} does not match "
                f"{len(self.tasks)} tasks x {len(self.kernels)} kernels"
            )
        if counts.size and not np.issubdtype(counts.dtype, np.integer):
            if not np.all(np.mod(counts, 1) == 0):
                raise ConfigError("call counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ConfigError("call counts must be >= 0")
        for label, row in zip(self.tasks, counts):
            if not np.any(row > 0):
                raise ConfigError(f"task {label!r} calls no kernel")
        if len(set(self.tasks)) != len(self.tasks) or len(set(self.kernels)) != len(self.kernels):
            raise ConfigError("task and kernel labels must be unique")
        counts.setflags(write=False)
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "counts", counts)

    @classmethod
    def one_call_each(cls, kernel_ids: Sequence[str]) -> TaskMatrix:
        """One task per kernel, each calling its kernel once."""
        ids = tuple(kernel_ids)
        return cls(ids, ids, np.eye(len(ids), dtype=np.int64))

    def restrict(self, kernel_ids: Iterable[str]) -> TaskMatrix:
        """Tasks that only call kernels in ``kernel_ids``, over those kernels."""
        wanted = set(kernel_ids)
        unknown = wanted - set(self.kernels)
        if unknown:
            raise ConfigError(f"unknown kernels {sorted(unknown)}")
        cols = [j for j, k in enumerate(self.kernels) if k in wanted]
        outside = [j for j, k in enumerate(self.kernels) if k not in wanted]
        rows = [i for i in range(len(self.tasks)) if not np.any(self.counts[i, outside] > 0)]
        if not rows:
            raise ConfigError(f"no task uses only kernels {sorted(wanted)}")
        sub = self.counts[np.ix_(rows, cols)]
        return TaskMatrix(tuple(self.tasks[i] for i in rows), tuple(self.kernels[j] for j in cols), sub)

    def __eq__(self, other):
        if not isinstance(other, TaskMatrix):
            return NotImplemented
        return (self.tasks == other.tasks and self.kernels == other.kernels
                and np.array_equal(self.counts, other.counts))

    __hash__ = None


@dataclass(frozen=True)
class KernelCluster:
    name: str
    members: tuple[str, ...]

    def __post_init__(self):
        if not self.members:
            raise ConfigError(f"cluster {self.name!r} has no kernels")
        object.__setattr__(self, "members", tuple(self.members))

    def check(self, kernels: Mapping[str, Kernel]):
        missing = [m for m in self.members if m not in kernels]
        if missing:
            raise ConfigError(f"cluster {self.name!r} references unknown kernels {missing}")


def _per_kernel(n: TaskMatrix, values: Sequence[float] | np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (len(n.kernels),):
        raise UsageError(f"{what} vector has shape {v.shape}, expected ({len(n.kernels)},)")
    return v


def task_energy(n: TaskMatrix, per_kernel_energy) -> np.ndarray:
    """Energy of every task (J): call counts times per-call kernel energy."""
    return n.counts @ _per_kernel(n, per_kernel_energy, "energy")


def task_delay(n: TaskMatrix, per_kernel_delay) -> np.ndarray:
    """Execution time of every task (s): call counts times per-call kernel delay."""
    return n.counts @ _per_kernel(n, per_kernel_delay, "delay")


def total_delay(d) -> float:
    return math.fsum(np.asarray(d, dtype=float).tolist())


def total_energy(e) -> float:
    return math.fsum(np.asarray(e, dtype=float).tolist())


def profiles_vectors(n: TaskMatrix, profiles: Mapping[str, KernelProfile]) -> tuple[np.ndarray, np.ndarray]:
    """Per-kernel (delay, energy) vectors ordered like the matrix columns."""
    missing = [k for k in n.kernels if k not in profiles]
    if missing:
        raise UsageError(f"no profile for kernels {missing}")
    delays = np.array([profiles[k].delay for k in n.kernels])
    energies = np.array([profiles[k].energy for k in n.kernels])
    return delays, energies


# -- CSV ingestion -------------------------------------------------------------

def _open_csv(path: Path, columns: Sequence[str]):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"missing file: {path}") from None
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [c for c in columns if c not in header]
    if missing:
        fh.close()
        raise ConfigError(f"{path}: missing columns {missing}")
    return fh, reader


def _number(path: Path, lineno: int, column: str, raw: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{path} row {lineno} column {column}: not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{path} row {lineno} column {column}: not finite")
    return value


def load_kernels(path: str | Path) -> dict[str, Kernel]:
    path = Path(path)
    fh, reader = _open_csv(path, KERNEL_COLUMNS)
    kernels: dict[str, Kernel] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            kid = row["id"].strip()
            if kid in kernels:
                raise ConfigError(f"{path} row {lineno}: duplicate kernel id {kid!r}")
            try:
                kernels[kid] = Kernel(
                    id=kid,
                    category=row["category"].strip(),
                    mac_ops=_number(path, lineno, "mac_ops", row["mac_ops"]),
                    param_bytes=_number(path, lineno, "param_bytes", row["param_bytes"]),
                    activation_bytes=_number(path, lineno, "activation_bytes", row["activation_bytes"]),
                    resolution_label=(row.get("resolution") or "").strip() or None,
                )
            except ConfigError as exc:
                raise ConfigError(f"{path} row {lineno}: {exc}") from None
    return kernels


def load_tasks(path: str | Path, kernels: Mapping[str, Kernel]) -> TaskMatrix:
    """Build the call-count matrix from long-format (task_id, kernel_id, call_count) rows."""
    path = Path(path)
    fh, reader = _open_csv(path, TASK_COLUMNS)
    counts: dict[tuple[str, str], int] = {}
    task_order: list[str] = []
    with fh:
        for lineno, row in enumerate(reader, start=2):
            task, kid = row["task_id"].strip(), row["kernel_id"].strip()
            if kid not in kernels:
                raise ConfigError(f"{path} row {lineno}: unknown kernel_id {kid!r}")
            value = _number(path, lineno, "call_count", row["call_count"])
            if value < 0 or value != int(value):
                raise ConfigError(f"{path} row {lineno} column call_count: must be a non-negative integer")
            if task not in task_order:
                task_order.append(task)
            counts[(task, kid)] = counts.get((task, kid), 0) + int(value)
    kernel_order = list(kernels)
    matrix = np.zeros((len(task_order), len(kernel_order)), dtype=np.int64)
    for (task, kid), value in counts.items():
        matrix[task_order.index(task), kernel_order.index(kid)] = value
    return TaskMatrix(tuple(task_order), tuple(kernel_order), matrix)
