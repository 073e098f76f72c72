"""Self-adaptive (1+1)-style evolutionary baseline on the unit cube.

Candidates are Gaussian mutations of the current parent with a shared
step size adapted by the one-fifth success rule.  Three guards keep the
search productive on cheap analytic problems: candidates that repeat an
already recorded point are redrawn (with step expansion when redraws
keep colliding), every ``consecutive_search_period``-th candidate
mutates a single coordinate in cyclic order instead of all of them, and
batched candidates are committed to the record in generation order so
batch size never changes which points exist, only how often the parent
updates per wall-clock step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .doe import Dataset
from .errors import ConfigError
from .problems import (
    EvaluationRecord,
    OptimizationProblem,
    evaluate as evaluate_problem,
    selection_key,
)
from .sego import RunTrace

__all__ = ["EvolConfig", "evol_run"]

SIGMA_MIN = 1e-6
SIGMA_MAX = 1.0
_MAX_REDRAWS = 100
# Give up deduplicating after this many widened redraw rounds; a repeat
# is then tolerated rather than looping forever on a saturated region.
_MAX_EXPANSIONS = 10


@dataclass(frozen=True)
class EvolConfig:
    """Settings for the evolutionary baseline."""

    max_evals: int = 100
    sigma0: float = 0.1
    adapt_factor: float = 1.22
    success_target: float = 0.2
    batch_size: int = 1
    expansion_factor: float = 2.0
    repeat_tol: float = 1e-12
    consecutive_search_period: Optional[int] = None
    seed: int = 0
    variant: str = field(default="evol", init=False)

    def __post_init__(self) -> None:
        if self.max_evals < 1:
            raise ConfigError("max_evals must be at least 1")
        if not 0.0 < self.sigma0 <= SIGMA_MAX:
            raise ConfigError("sigma0 must lie in (0, 1]")
        if self.adapt_factor <= 1.0:
            raise ConfigError("adapt_factor must exceed 1")
        if not 0.0 < self.success_target < 1.0:
            raise ConfigError("success_target must lie in (0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.expansion_factor <= 1.0:
            raise ConfigError("expansion_factor must exceed 1")
        if self.repeat_tol < 0.0:
            raise ConfigError("repeat_tol must be non-negative")
        if (self.consecutive_search_period is not None
                and self.consecutive_search_period < 1):
            raise ConfigError("consecutive_search_period must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    def resolved_period(self, dimension: int) -> int:
        if self.consecutive_search_period is not None:
            return self.consecutive_search_period
        return 5 * dimension


def _is_repeat(x: np.ndarray, recorded: list, tol: float) -> bool:
    if tol <= 0.0 or not recorded:
        return False
    arr = np.asarray(recorded)
    return bool(np.max(np.abs(arr - x[None, :]), axis=1).min() <= tol)


def evol_run(problem: OptimizationProblem, config: EvolConfig,
             start: EvaluationRecord, history: Optional[Dataset] = None,
             deadline_s: Optional[float] = None) -> RunTrace:
    """Run the baseline for ``config.max_evals`` new evaluations.

    ``start`` seeds the parent (it must already be recorded in
    ``history`` when one is given).  New records continue the evaluation
    index sequence of the history, so a run on top of an initial design
    of size q ends with q + max_evals records.  A ``deadline_s`` wall
    cap stops the run at a generation boundary with the trace marked
    truncated.
    """
    d = problem.dimension
    if history is not None:
        ds = history.copy()
        if not any(r.eval_index == start.eval_index for r in ds.records):
            raise ConfigError("start record must be part of the history")
    else:
        ds = Dataset(problem_name=problem.name, seed=config.seed, records=[])
        if start.eval_index != 0:
            raise ConfigError("start record must have eval_index 0 when "
                              "no history is given")
        ds.append(start)

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 300]))
    period = config.resolved_period(d)
    shrink = config.adapt_factor ** 0.25

    parent = start
    parent_x = np.asarray(start.x, dtype=float)
    sigma = config.sigma0
    recorded = [np.asarray(r.x, dtype=float) for r in ds.records]
    logs: list = []
    generation = 0
    candidate_counter = 0
    cyclic_coord = 0
    new_evals = 0
    truncated = False
    started = time.perf_counter()

    while new_evals < config.max_evals:
        if (deadline_s is not None
                and time.perf_counter() - started > deadline_s):
            truncated = True
            break
        batch = min(config.batch_size, config.max_evals - new_evals)
        cand_x = []
        cand_cyclic = []
        redraws = 0
        expansions = 0
        for _ in range(batch):
            candidate_counter += 1
            cyclic = period > 0 and candidate_counter % period == 0
            draw_sigma = sigma
            attempts = 0
            while True:
                if cyclic:
                    x = parent_x.copy()
                    j = cyclic_coord % d
                    x[j] = np.clip(x[j] + draw_sigma * rng.standard_normal(),
                                   0.0, 1.0)
                else:
                    step = draw_sigma * rng.standard_normal(d)
                    x = np.clip(parent_x + step, 0.0, 1.0)
                if not (_is_repeat(x, recorded, config.repeat_tol)
                        or _is_repeat(x, cand_x, config.repeat_tol)):
                    break
                attempts += 1
                redraws += 1
                if attempts % _MAX_REDRAWS == 0:
                    if attempts // _MAX_REDRAWS >= _MAX_EXPANSIONS:
                        break
                    # Still colliding after a full redraw round: widen.
                    draw_sigma = min(draw_sigma * config.expansion_factor,
                                     SIGMA_MAX)
                    expansions += 1
            if cyclic:
                cyclic_coord += 1
            cand_x.append(x)
            cand_cyclic.append(cyclic)

        # Evaluate and commit in generation order before any selection.
        cand_records = []
        for x in cand_x:
            rec = evaluate_problem(problem, x, len(ds.records))
            ds.append(rec)
            recorded.append(np.asarray(rec.x, dtype=float))
            cand_records.append(rec)
            new_evals += 1

        successes = 0
        for rec in cand_records:
            if selection_key(rec) < selection_key(parent):
                parent = rec
                parent_x = np.asarray(rec.x, dtype=float)
                successes += 1
                sigma = min(sigma * config.adapt_factor, SIGMA_MAX)
            else:
                sigma = max(sigma / shrink, SIGMA_MIN)

        logs.append({
            "type": "generation",
            "generation": generation,
            "sigma": float(sigma),
            "parent_eval_index": int(parent.eval_index),
            "successes": int(successes),
            "batch": int(batch),
            "redraws": int(redraws),
            "expansions": int(expansions),
            "cyclic": [bool(c) for c in cand_cyclic],
        })
        generation += 1

    return RunTrace(dataset=ds, iterations=logs, config=config,
                    truncated=truncated)
