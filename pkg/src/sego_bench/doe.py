"""Designs of experiments and evaluation histories.

A Dataset is the append-only, ordered history of evaluated designs.  It
starts as a Latin hypercube sample and grows one record per solver
iteration.  Histories persist as JSON lines, one object per evaluation,
written canonically so identical runs produce identical bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._jsonio import canonical_dumps, read_jsonl
from .errors import ConfigError
from .problems import (
    FEAS_TOL,
    EvaluationRecord,
    OptimizationProblem,
    evaluate,
    selection_key,
)

# Two points closer than this in infinity norm count as duplicates.
DUPLICATE_TOL = 1e-12


@dataclass
class Dataset:
    """Ordered evaluation history for one run."""

    problem_name: str
    seed: int
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EvaluationRecord) -> None:
        if record.eval_index != len(self.records):
            raise ConfigError(
                f"eval_index {record.eval_index} breaks contiguity, "
                f"expected {len(self.records)}"
            )
        if np.any(record.x < 0.0) or np.any(record.x > 1.0):
            raise ConfigError("dataset points must lie in [0, 1]^d")
        self.records.append(record)

    def points(self) -> np.ndarray:
        """All evaluated points as an (n, d) array."""
        return np.array([r.x for r in self.records])

    def objectives(self) -> np.ndarray:
        return np.array([r.objective_value for r in self.records])

    def constraint_matrix(self) -> np.ndarray:
        """Canonical constraint values as an (n, m) array."""
        if not self.records:
            return np.empty((0, 0))
        return np.array([r.constraint_values for r in self.records])

    def copy(self) -> "Dataset":
        return Dataset(self.problem_name, self.seed, list(self.records))


def lhs_sample(n: int, d: int, seed: int, centered: bool = False) -> np.ndarray:
    """Stratified Latin hypercube sample of n points in [0, 1]^d.

    Each dimension gets one point per stratum [k/n, (k+1)/n) under an
    independent random permutation, jittered uniformly within the stratum
    (or centered when requested).
    """
    if n < 1 or d < 1:
        raise ConfigError(f"lhs_sample needs n >= 1 and d >= 1, got n={n} d={d}")
    rng = np.random.default_rng(seed)
    out = np.empty((n, d))
    for j in range(d):
        perm = rng.permutation(n)
        jitter = 0.5 * np.ones(n) if centered else rng.random(n)
        out[:, j] = (perm + jitter) / n
    return out


def doe_size(d: int, rule) -> int:
    """Resolve a DoE sizing rule: the string "d+1" or a fixed integer."""
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if rule == "d+1":
        return d + 1
    if isinstance(rule, int) and not isinstance(rule, bool):
        if rule < 1:
            raise ConfigError(f"fixed DoE size must be >= 1, got {rule}")
        return rule
    raise ConfigError(f"unknown DoE sizing rule {rule!r}; use 'd+1' or a positive int")


def build_initial_doe(
    problem: OptimizationProblem, n: int, seed: int, centered: bool = False
) -> Dataset:
    """Sample and evaluate an initial Latin hypercube design."""
    pts = lhs_sample(n, problem.dimension, seed, centered=centered)
    ds = Dataset(problem_name=problem.name, seed=seed)
    for i in range(n):
        ds.append(evaluate(problem, pts[i], i))
    return ds


def inject_warm_start(
    dataset: Dataset, x_star, problem: OptimizationProblem
) -> Dataset:
    """Append an evaluated warm-start point unless it is already present.

    Idempotent: a point within the duplicate tolerance of an existing record
    is not re-added.
    """
    x = np.asarray(x_star, dtype=float)
    if x.shape != (problem.dimension,):
        raise ConfigError(
            f"warm-start point has shape {x.shape}, expected "
            f"({problem.dimension},)"
        )
    for rec in dataset.records:
        if np.max(np.abs(rec.x - x)) < DUPLICATE_TOL:
            return dataset
    dataset.append(evaluate(problem, x, len(dataset.records)))
    return dataset


def incumbent(dataset: Dataset, feas_tol: float = FEAS_TOL) -> EvaluationRecord:
    """Best record so far: lowest feasible objective, else least violation.

    Ties break toward the earliest evaluation.
    """
    if not dataset.records:
        raise ConfigError("incumbent of an empty dataset is undefined")
    return min(
        dataset.records, key=lambda r: (selection_key(r, feas_tol), r.eval_index)
    )


def record_to_row(record: EvaluationRecord) -> dict:
    """JSON row for one evaluation; wall time is rounded to 1 ms so that
    byte-identity across repeated runs is not broken by scheduler noise."""
    return {
        "x": [float(v) for v in record.x],
        "f": float(record.objective_value),
        "c": [float(v) for v in record.constraint_values],
        "eval_index": int(record.eval_index),
        "wall_time_s": round(float(record.wall_time_s), 3),
    }


def record_from_row(row: dict) -> EvaluationRecord:
    return EvaluationRecord(
        x=np.asarray(row["x"], dtype=float),
        objective_value=float(row["f"]),
        constraint_values=np.asarray(row["c"], dtype=float),
        eval_index=int(row["eval_index"]),
        wall_time_s=float(row["wall_time_s"]),
    )


def save_history(dataset: Dataset, path) -> None:
    """Write the dataset as canonical JSON lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in dataset.records:
            fh.write(canonical_dumps(record_to_row(rec)))
            fh.write("\n")


def load_history(path, problem_name: str = "", seed: int = 0) -> Dataset:
    ds = Dataset(problem_name=problem_name, seed=seed)
    for row in read_jsonl(path):
        ds.append(record_from_row(row))
    return ds
