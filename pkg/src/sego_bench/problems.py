"""Constrained optimization problems over box domains.

Problem definitions live in physical units.  Everything the solvers see is
normalized: design points are mapped to [0, 1]^d and constraint values are
canonicalized so that feasible always means ``c_i >= 0``, whatever the
original inequality direction was.

The built-in benchmark suite provides analytic stand-ins at the problem
shapes used throughout the package: a 2-D constrained problem with a known
optimum, a 12-variable / 8-constraint problem, a 19-variable / 5-constraint
problem and an unconstrained sanity problem.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, EvaluationError

# Feasibility tolerance in canonical (normalized) constraint units.
FEAS_TOL = 1e-6


class Sense(str, Enum):
    """Direction of a raw inequality constraint g(x) vs its bound B."""

    LESS_EQUAL = "le"      # feasible when g(x) <= B
    GREATER_EQUAL = "ge"   # feasible when g(x) >= B


class KnownOptimum(NamedTuple):
    """Reference optimum in physical units."""

    point: np.ndarray
    value: float


@dataclass(frozen=True)
class OptimizationProblem:
    """A box-constrained problem with m scalar inequality constraints.

    Evaluators map a length-d physical point to one real value and must be
    deterministic: the same input yields bit-identical output.
    """

    name: str
    dimension: int
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    objective: Callable[[np.ndarray], float]
    constraints: tuple
    constraint_bounds: np.ndarray
    constraint_sense: tuple
    known_optimum: Optional[KnownOptimum] = None

    def __post_init__(self):
        lo = np.asarray(self.lower_bounds, dtype=float)
        hi = np.asarray(self.upper_bounds, dtype=float)
        object.__setattr__(self, "lower_bounds", lo)
        object.__setattr__(self, "upper_bounds", hi)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(
            self, "constraint_bounds", np.asarray(self.constraint_bounds, dtype=float)
        )
        object.__setattr__(
            self, "constraint_sense", tuple(Sense(s) for s in self.constraint_sense)
        )
        if self.dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dimension}")
        if lo.shape != (self.dimension,) or hi.shape != (self.dimension,):
            raise ConfigError("bounds must be vectors of length d")
        if not np.all(lo < hi):
            bad = int(np.argmin(hi - lo))
            raise ConfigError(
                f"lower_bounds[{bad}]={lo[bad]} must be < upper_bounds[{bad}]={hi[bad]}"
            )
        m = len(self.constraints)
        if self.constraint_bounds.shape != (m,) or len(self.constraint_sense) != m:
            raise ConfigError("constraint_bounds and constraint_sense must have length m")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class EvaluationRecord:
    """One evaluated design: normalized point, objective, canonical constraints."""

    x: np.ndarray
    objective_value: float
    constraint_values: np.ndarray
    eval_index: int
    wall_time_s: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(
            self, "constraint_values", np.asarray(self.constraint_values, dtype=float)
        )
        if self.eval_index < 0:
            raise ConfigError(f"eval_index must be >= 0, got {self.eval_index}")
        if self.wall_time_s < 0:
            raise ConfigError("wall_time_s must be nonnegative")


def is_feasible(record: EvaluationRecord, feas_tol: float = FEAS_TOL) -> bool:
    """A record is feasible when every canonical constraint is >= -feas_tol."""
    if record.constraint_values.size == 0:
        return True
    return bool(np.min(record.constraint_values) >= -feas_tol)


def total_violation(record: EvaluationRecord) -> float:
    """L1 sum of positive canonical-constraint violations."""
    if record.constraint_values.size == 0:
        return 0.0
    return float(np.sum(np.maximum(0.0, -record.constraint_values)))


def selection_key(record: EvaluationRecord, feas_tol: float = FEAS_TOL) -> tuple:
    """Lexicographic ranking key: feasible objective first, then violation.

    Feasible records sort as (0, objective), infeasible ones as
    (1, total violation); tuple comparison makes any feasible record beat
    any infeasible one.
    """
    if is_feasible(record, feas_tol):
        return (0, record.objective_value)
    return (1, total_violation(record))


def normalize(x_physical, problem: OptimizationProblem) -> np.ndarray:
    """Map a physical point into [0, 1]^d.

    Raises DomainError naming the offending component when the input lies
    outside the box (beyond a tiny slack).
    """
    x = np.asarray(x_physical, dtype=float)
    lo, hi = problem.lower_bounds, problem.upper_bounds
    slack = 1e-12 * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    below = x < lo - slack
    above = x > hi + slack
    if np.any(below) or np.any(above):
        bad = int(np.argmax(below | above))
        raise DomainError(
            f"component {bad} of point {x[bad]!r} is outside "
            f"[{lo[bad]}, {hi[bad]}] for problem {problem.name!r}"
        )
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def denormalize(x_norm, problem: OptimizationProblem) -> np.ndarray:
    """Inverse of normalize: map a [0, 1]^d point back to physical units."""
    x = np.asarray(x_norm, dtype=float)
    return problem.lower_bounds + x * (problem.upper_bounds - problem.lower_bounds)


def canonicalize_constraints(g_raw, problem: OptimizationProblem) -> np.ndarray:
    """Convert raw constraint values to canonical form (feasible iff c >= 0).

    LessEqual constraints map to ``B - g``, GreaterEqual to ``g - B``.
    Flipping the sense of a constraint negates its canonical value exactly.
    """
    g = np.asarray(g_raw, dtype=float)
    m = problem.n_constraints
    if g.shape != (m,):
        raise ValueError(f"expected {m} raw constraint values, got shape {g.shape}")
    if m == 0:
        return np.empty(0)
    sign = np.array(
        [-1.0 if s is Sense.LESS_EQUAL else 1.0 for s in problem.constraint_sense]
    )
    return sign * (g - problem.constraint_bounds)


def evaluate(
    problem: OptimizationProblem, x_norm, eval_index: int
) -> EvaluationRecord:
    """Evaluate objective and constraints at a normalized point.

    Wall time is measured around the evaluator calls only.  Non-finite
    evaluator output raises EvaluationError carrying the point.
    """
    x = np.asarray(x_norm, dtype=float)
    if x.shape != (problem.dimension,):
        raise DomainError(
            f"point has shape {x.shape}, expected ({problem.dimension},)"
        )
    if np.any(x < 0.0) or np.any(x > 1.0):
        bad = int(np.argmax((x < 0.0) | (x > 1.0)))
        raise DomainError(
            f"normalized component {bad} = {x[bad]!r} is outside [0, 1]"
        )
    x_phys = denormalize(x, problem)
    t0 = time.perf_counter()
    f = float(problem.objective(x_phys))
    g = np.array([float(c(x_phys)) for c in problem.constraints])
    wall = time.perf_counter() - t0
    if not np.isfinite(f) or (g.size and not np.all(np.isfinite(g))):
        raise EvaluationError(
            f"non-finite evaluator output at {x_phys.tolist()} "
            f"for problem {problem.name!r}",
            x=x,
        )
    c = canonicalize_constraints(g, problem)
    return EvaluationRecord(
        x=x.copy(),
        objective_value=f,
        constraint_values=c,
        eval_index=eval_index,
        wall_time_s=wall,
    )


# ----------------------------------------------------------------------------
# Benchmark suite
# ----------------------------------------------------------------------------

def _toy_quad_objective(x):
    return float(np.sum(x * x))


def _branin_objective(x):
    # Standard Branin function on [-5, 10] x [0, 15].
    a = 1.0
    b = 5.1 / (4.0 * np.pi ** 2)
    c = 5.0 / np.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * np.pi)
    return float(
        a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2
        + s * (1.0 - t) * np.cos(x[0])
        + s
    )


def _branin_disk(x):
    return float((x[0] - 2.5) ** 2 + (x[1] - 7.5) ** 2)


def _g07x12_objective(x):
    # Classic 10-variable quadratic test objective (Hock-Schittkowski 113 /
    # g07) extended with two separable quadratic terms in x10 and x11.
    f = (
        x[0] ** 2 + x[1] ** 2 + x[0] * x[1] - 14.0 * x[0] - 16.0 * x[1]
        + (x[2] - 10.0) ** 2 + 4.0 * (x[3] - 5.0) ** 2 + (x[4] - 3.0) ** 2
        + 2.0 * (x[5] - 1.0) ** 2 + 5.0 * x[6] ** 2 + 7.0 * (x[7] - 11.0) ** 2
        + 2.0 * (x[8] - 10.0) ** 2 + (x[9] - 7.0) ** 2 + 45.0
    )
    return float(f + 2.0 * (x[10] - 5.0) ** 2 + 3.0 * (x[11] + 2.0) ** 2)


def _g07x12_raw_constraints(x):
    return (
        -105.0 + 4.0 * x[0] + 5.0 * x[1] - 3.0 * x[6] + 9.0 * x[7],
        10.0 * x[0] - 8.0 * x[1] - 17.0 * x[6] + 2.0 * x[7],
        -8.0 * x[0] + 2.0 * x[1] + 5.0 * x[8] - 2.0 * x[9] - 12.0,
        3.0 * (x[0] - 2.0) ** 2 + 4.0 * (x[1] - 3.0) ** 2
        + 2.0 * x[2] ** 2 - 7.0 * x[3] - 120.0,
        5.0 * x[0] ** 2 + 8.0 * x[1] + (x[2] - 6.0) ** 2 - 2.0 * x[3] - 40.0,
        x[0] ** 2 + 2.0 * (x[1] - 2.0) ** 2 - 2.0 * x[0] * x[1]
        + 14.0 * x[4] - 6.0 * x[5],
        0.5 * (x[0] - 8.0) ** 2 + 2.0 * (x[1] - 4.0) ** 2
        + 3.0 * x[4] ** 2 - x[5] - 30.0,
        -3.0 * x[0] + 6.0 * x[1] + 12.0 * (x[8] - 8.0) ** 2 - 7.0 * x[9],
    )


def _g07x12_constraint(x, i):
    return float(_g07x12_raw_constraints(x)[i])


# Reference optimum of the extended problem, refined by a constrained
# quadratic-programming polish of the published 10-variable solution; the
# two extra coordinates sit at their unconstrained minimizers.
_G07X12_XOPT = np.array([
    2.1719963687360373, 2.363682971949922, 8.773925722726474,
    5.095984409879159, 0.9906547642362438, 1.4305739782396836,
    1.3216442077283665, 9.828725809838597, 8.28009143850436,
    8.37592609326782, 5.0, -2.0,
])
_G07X12_FOPT = 24.306209068040417


# 19-variable convex quadratic benchmark.  The objective Hessian is strictly
# diagonally dominant, so the problem is convex and the frozen reference
# optimum below (one active linear constraint) is the global solution.
_PMDO19_D = 19
_PMDO19_LOWER = np.array([-1.0 + 0.1 * i for i in range(_PMDO19_D)])
_PMDO19_UPPER = np.array(
    [_PMDO19_LOWER[i] + 2.0 + 0.05 * i for i in range(_PMDO19_D)]
)
_PMDO19_A = np.array([1.0 + 0.1 * i for i in range(_PMDO19_D)])
_PMDO19_C = 0.5 * (_PMDO19_LOWER + _PMDO19_UPPER) + 0.3 * np.sin(
    np.arange(1, _PMDO19_D + 1)
) * (_PMDO19_UPPER - _PMDO19_LOWER) / 2.0
_PMDO19_W = np.array([1.0 if i % 2 == 0 else -0.5 for i in range(_PMDO19_D)])
_PMDO19_M = _PMDO19_UPPER - 0.3
_PMDO19_P = _PMDO19_LOWER + 0.4 * (_PMDO19_UPPER - _PMDO19_LOWER)
_PMDO19_B = np.array([
    19.756280567746742,
    63.626150817672894,
    0.707124569673244,
    6.876252980509952,
    31.41219376632663,
])
_PMDO19_XOPT = np.array([
    0.2964260045843529, 0.4187724740743697, 0.31171202913596924,
    0.15515750367436287, 0.19033028508731673, 0.493610011650958,
    0.8925461370685212, 1.1156123428440328, 1.0450039325310712,
    0.8366960293044042, 0.7864318668897602, 1.0562652421697263,
    1.5145105047211018, 1.8462732924687095, 1.8423878802854239,
    1.6013894387345495, 1.450456634670079, 1.6370588936801334,
    2.2656400641719006,
])
_PMDO19_FOPT = 7.862071170932674


def _pmdo19_objective(x):
    return float(
        np.sum(_PMDO19_A * (x - _PMDO19_C) ** 2) + 0.3 * np.sum(x[:-1] * x[1:])
    )


def _pmdo19_raw_constraints(x):
    return (
        float(np.sum(x)),
        float(np.sum((x - _PMDO19_M) ** 2)),
        float(np.dot(_PMDO19_W, x)),
        float(x[0] + x[5] + x[11] + x[18]),
        float(np.sum((x - _PMDO19_P) ** 2)),
    )


def _pmdo19_constraint(x, i):
    return _pmdo19_raw_constraints(x)[i]


def _build_toy_quad() -> OptimizationProblem:
    d = 3
    return OptimizationProblem(
        name="toy-quad",
        dimension=d,
        lower_bounds=np.zeros(d),
        upper_bounds=np.ones(d),
        objective=_toy_quad_objective,
        constraints=(),
        constraint_bounds=np.empty(0),
        constraint_sense=(),
        known_optimum=KnownOptimum(np.zeros(d), 0.0),
    )


def _build_branin_c() -> OptimizationProblem:
    # Branin with one disk constraint.  Of the three global minimizers only
    # (pi, 2.275) satisfies the disk, so the constrained optimum is analytic
    # with value 1.25 / pi.
    return OptimizationProblem(
        name="branin-c",
        dimension=2,
        lower_bounds=np.array([-5.0, 0.0]),
        upper_bounds=np.array([10.0, 15.0]),
        objective=_branin_objective,
        constraints=(_branin_disk,),
        constraint_bounds=np.array([50.0]),
        constraint_sense=(Sense.LESS_EQUAL,),
        known_optimum=KnownOptimum(np.array([np.pi, 2.275]), 1.25 / np.pi),
    )


def _build_cmdo12() -> OptimizationProblem:
    d = 12
    return OptimizationProblem(
        name="cmdo12",
        dimension=d,
        lower_bounds=-10.0 * np.ones(d),
        upper_bounds=10.0 * np.ones(d),
        objective=_g07x12_objective,
        constraints=tuple(partial(_g07x12_constraint, i=i) for i in range(8)),
        constraint_bounds=np.zeros(8),
        constraint_sense=(Sense.LESS_EQUAL,) * 8,
        known_optimum=KnownOptimum(_G07X12_XOPT.copy(), _G07X12_FOPT),
    )


def _build_pmdo19() -> OptimizationProblem:
    return OptimizationProblem(
        name="pmdo19",
        dimension=_PMDO19_D,
        lower_bounds=_PMDO19_LOWER.copy(),
        upper_bounds=_PMDO19_UPPER.copy(),
        objective=_pmdo19_objective,
        constraints=tuple(partial(_pmdo19_constraint, i=i) for i in range(5)),
        constraint_bounds=_PMDO19_B.copy(),
        constraint_sense=(
            Sense.GREATER_EQUAL,
            Sense.LESS_EQUAL,
            Sense.GREATER_EQUAL,
            Sense.LESS_EQUAL,
            Sense.LESS_EQUAL,
        ),
        known_optimum=KnownOptimum(_PMDO19_XOPT.copy(), _PMDO19_FOPT),
    )


_BUILDERS = {
    "toy-quad": _build_toy_quad,
    "branin-c": _build_branin_c,
    "cmdo12": _build_cmdo12,
    "pmdo19": _build_pmdo19,
}
_CACHE: dict = {}


def problem_names() -> list:
    """Names of the registered benchmark problems."""
    return sorted(_BUILDERS)


def get_problem(name: str) -> OptimizationProblem:
    """Look up a benchmark by name; unknown names raise ConfigError."""
    if name not in _BUILDERS:
        raise ConfigError(
            f"unknown problem {name!r}; known problems: {', '.join(problem_names())}"
        )
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


def benchmark_suite() -> list:
    """All built-in benchmarks: toy-quad, branin-c, cmdo12, pmdo19."""
    return [get_problem(n) for n in ("toy-quad", "branin-c", "cmdo12", "pmdo19")]
