"""Surrogate-driven optimizer loop and its acquisition sub-problem solver.

The outer loop alternates four stages: refit the surrogates on the
current data, resolve the incumbent target, minimize the acquisition
subject to surrogate feasibility margins, then evaluate the chosen point
and append it to the data set.  All randomness is drawn from named
streams keyed by (seed, iteration, purpose) so a run is reproducible
record for record regardless of how many constraint models exist.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ._jsonio import canonical_dumps, read_jsonl
from .acquisition import (
    AcquisitionSpec,
    FeasibilitySpec,
    acquisition_values,
    compute_wb2s_scale,
    expected_improvement,
    expected_improvement_grad,
    utb_tau,
)
from .doe import Dataset
from .errors import ConfigError
from .problems import OptimizationProblem, evaluate as evaluate_problem, is_feasible
from .surrogate import fit_gp, fit_moe

__all__ = [
    "InnerSolverConfig",
    "SolverConfig",
    "IterationLog",
    "RunTrace",
    "SubproblemResult",
    "make_variant",
    "sego_run",
    "solve_subproblem",
    "save_trace",
    "load_trace",
    "rng_stream",
]

# Purpose codes for the per-iteration random streams.
_PURPOSE_OBJECTIVE = 0
_PURPOSE_CONSTRAINT = 1  # constraint i uses 1 + i
_PURPOSE_INNER = 100
_PURPOSE_CLUSTER = 200

# A candidate counts as surrogate-feasible when every margin clears this.
MARGIN_TOL = 1e-9
# Warm refits run a short optimizer leg; every few iterations the refit
# widens to config.refit_restarts starts to escape likelihood plateaus.
_FULL_REFIT_PERIOD = 5
_REFIT_MAXITER = 12
# New points closer than this (max-norm) to a recorded one are redrawn.
DUPLICATE_GUARD = 1e-9

_VARIANTS = {
    # name -> (use mixture objective model, use adaptive feasibility margin)
    "sego": (False, False),
    "sego-utb": (False, True),
    "segomoe": (True, False),
    "segomoe-utb": (True, True),
}


def rng_stream(*keys: int) -> np.random.Generator:
    """Named deterministic generator from integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


@dataclass(frozen=True)
class InnerSolverConfig:
    """Budget knobs for the acquisition sub-problem solver.

    ``local_budget`` caps the per-start refinement effort and defaults to
    100 * dimension; ``pool_size`` controls the screening sample and is
    sized from the dimension when left unset.  ``start_mix`` is the
    fraction of refinement starts seeded at the best recorded points
    rather than at screened pool points.
    """

    n_multistarts: int = 20
    local_budget: Optional[int] = None
    start_mix: float = 0.25
    pool_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_multistarts < 1:
            raise ConfigError("n_multistarts must be at least 1")
        if self.local_budget is not None and self.local_budget < 1:
            raise ConfigError("local_budget must be positive when given")
        if not 0.0 <= self.start_mix <= 1.0:
            raise ConfigError("start_mix must lie in [0, 1]")
        if self.pool_size is not None and self.pool_size < 1:
            raise ConfigError("pool_size must be positive when given")

    def resolved_budget(self, dimension: int) -> int:
        if self.local_budget is not None:
            return self.local_budget
        return 100 * dimension

    def descent_steps(self, dimension: int) -> int:
        budget = self.resolved_budget(dimension)
        return int(np.clip(budget // (3 * (dimension + 1)), 8, 40))

    def resolved_pool(self, dimension: int, expensive_margins: bool) -> int:
        if self.pool_size is not None:
            return self.pool_size
        if expensive_margins:
            return int(np.clip(24 * dimension, 192, 512))
        return int(np.clip(64 * dimension, 512, 1536))


@dataclass(frozen=True)
class SolverConfig:
    """Complete description of one optimizer run."""

    variant: str = "sego"
    max_nb_it: int = 50
    budget_total: Optional[int] = None
    acquisition: AcquisitionSpec = field(default_factory=AcquisitionSpec)
    feasibility: FeasibilitySpec = field(default_factory=FeasibilitySpec)
    kernel: str = "matern52"
    kpls_threshold_dim: int = 12
    kpls_components: int = 3
    moe_max_experts: int = 3
    moe_recombination: str = "smooth"
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    refit_restarts: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS and self.variant != "evol":
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of "
                f"{sorted(_VARIANTS) + ['evol']}"
            )
        if self.max_nb_it < 1:
            raise ConfigError("max_nb_it must be at least 1")
        if self.budget_total is not None and self.budget_total < 1:
            raise ConfigError("budget_total must be positive when given")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.refit_restarts < 1:
            raise ConfigError("refit_restarts must be at least 1")
        if self.kpls_components < 1:
            raise ConfigError("kpls_components must be at least 1")
        if self.moe_max_experts < 1:
            raise ConfigError("moe_max_experts must be at least 1")


def make_variant(name: str, **overrides) -> SolverConfig:
    """Build the canonical configuration for a named solver variant.

    Recognized names are the four surrogate-loop variants and ``evol``.
    Keyword overrides are applied on top of the canonical settings, so
    ``make_variant("sego", seed=3)`` is the usual entry point.
    """
    if name == "evol":
        return SolverConfig(variant="evol", **overrides)
    if name not in _VARIANTS:
        raise ConfigError(
            f"unknown variant {name!r}; expected one of "
            f"{sorted(_VARIANTS) + ['evol']}"
        )
    _, utb = _VARIANTS[name]
    defaults = {
        "variant": name,
        "acquisition": AcquisitionSpec(kind="wb2s"),
        "feasibility": FeasibilitySpec(kind="utb") if utb else FeasibilitySpec(kind="mean"),
    }
    defaults.update(overrides)
    return SolverConfig(**defaults)


@dataclass
class IterationLog:
    """One enrichment step of the outer loop."""

    iteration: int
    x: list
    acquisition_value: float
    tau: float
    fit_time_s: float
    solve_time_s: float
    fallback: bool
    duplicate_redraw: bool
    margin_min: Optional[float]


@dataclass
class RunTrace:
    """Everything a run produced: the data set plus per-step records."""

    dataset: Dataset
    iterations: list
    config: SolverConfig
    truncated: bool = False


@dataclass
class SubproblemResult:
    """Outcome of one acquisition minimization."""

    x: np.ndarray
    value: float
    margin_min: float
    fallback: bool
    duplicate_redraw: bool


def _model_sigma(var: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(var, 0.0))


class _Subproblem:
    """Vectorized value/gradient views of the current surrogate landscape."""

    def __init__(self, objective_model, constraint_models, f_min, acq_spec,
                 tau, scale):
        self.obj = objective_model
        self.cons = list(constraint_models)
        self.f_min = float(f_min)
        self.spec = acq_spec
        self.tau = float(tau)
        self.scale = scale
        self.use_sigma_margin = tau != 0.0

    # -- batched values ------------------------------------------------

    def acquisition(self, X: np.ndarray) -> np.ndarray:
        mu, sig = self.obj.predict(X, need_sigma=True)
        return acquisition_values(self.spec, mu, sig, self.f_min, self.scale)

    def margins(self, X: np.ndarray) -> np.ndarray:
        p = X.shape[0]
        out = np.empty((p, len(self.cons)))
        for i, cm in enumerate(self.cons):
            mu, sig = cm.predict(X, need_sigma=self.use_sigma_margin)
            out[:, i] = mu + self.tau * sig if self.use_sigma_margin else mu
        return out

    def score(self, X: np.ndarray):
        """Lexicographic (violation?, value) arrays for a batch.

        Returns ``infeasible`` (bool), ``value`` (acq where feasible else
        total surrogate violation), plus raw acq and min margin.
        """
        acq = self.acquisition(X)
        if not self.cons:
            z = np.zeros(X.shape[0])
            return np.zeros(X.shape[0], dtype=bool), acq, acq, np.full(X.shape[0], np.inf)
        marg = self.margins(X)
        mmin = marg.min(axis=1)
        viol = np.maximum(0.0, -marg).sum(axis=1)
        infeasible = mmin < -MARGIN_TOL
        value = np.where(infeasible, viol, acq)
        return infeasible, value, acq, mmin

    # -- batched gradients ---------------------------------------------

    def acq_grad(self, X: np.ndarray):
        mu, var, dmu, dvar = self.obj.predict_with_grad(X)
        sig = _model_sigma(var)
        safe = np.where(sig > 0.0, sig, 1.0)
        dsig = np.where(sig[:, None] > 0.0, dvar / (2.0 * safe[:, None]), 0.0)
        if self.spec.kind == "ei":
            dei_dmu, dei_dsig = expected_improvement_grad(mu, sig, self.f_min)
            grad = -(dei_dmu[:, None] * dmu + dei_dsig[:, None] * dsig)
            val = -expected_improvement(mu, sig, self.f_min)
            return val, grad
        s = 1.0 if self.spec.kind == "wb2" else self.scale
        dei_dmu, dei_dsig = expected_improvement_grad(mu, sig, self.f_min)
        ei = expected_improvement(mu, sig, self.f_min)
        val = mu - s * ei
        grad = dmu - s * (dei_dmu[:, None] * dmu + dei_dsig[:, None] * dsig)
        return val, grad

    def margin_grads(self, X: np.ndarray):
        """Margins (p, m) and their gradients (p, m, d)."""
        p, d = X.shape
        m = len(self.cons)
        marg = np.empty((p, m))
        grad = np.empty((p, m, d))
        for i, cm in enumerate(self.cons):
            if self.use_sigma_margin:
                mu, var, dmu, dvar = cm.predict_with_grad(X)
                sig = _model_sigma(var)
                safe = np.where(sig > 0.0, sig, 1.0)
                dsig = np.where(sig[:, None] > 0.0,
                                dvar / (2.0 * safe[:, None]), 0.0)
                marg[:, i] = mu + self.tau * sig
                grad[:, i, :] = dmu + self.tau * dsig
            else:
                mu, dmu = cm.predict_mean_grad(X)
                marg[:, i] = mu
                grad[:, i, :] = dmu
        return marg, grad


def _lexi_better(inf_new, val_new, inf_old, val_old):
    """Elementwise lexicographic comparison on (infeasible, value)."""
    return (inf_old & ~inf_new) | ((inf_new == inf_old) & (val_new < val_old))


def _projected_descent(sub: _Subproblem, starts: np.ndarray, steps: int,
                       eta0: float = 0.08):
    """Batch projected descent under the lexicographic ordering.

    Infeasible starts descend the total surrogate violation, feasible
    ones descend the acquisition; a step is kept only when it improves
    the (feasibility, value) pair, which acts as an automatic barrier at
    the margin boundary.  Step sizes adapt per start.
    """
    x = starts.copy()
    k, d = x.shape
    eta = np.full(k, eta0)
    inf_c, val_c, _, _ = sub.score(x)
    for _ in range(steps):
        acq_v, acq_g = sub.acq_grad(x)
        if sub.cons:
            marg, marg_g = sub.margin_grads(x)
            neg = marg < 0.0
            viol_g = -(marg_g * neg[:, :, None]).sum(axis=1)
            infeasible = (marg.min(axis=1) < -MARGIN_TOL)
        else:
            infeasible = np.zeros(k, dtype=bool)
            viol_g = np.zeros_like(acq_g)
        direction = np.where(infeasible[:, None], -viol_g, -acq_g)
        norms = np.linalg.norm(direction, axis=1)
        norms = np.where(norms > 0.0, norms, 1.0)
        prop = np.clip(x + eta[:, None] * direction / norms[:, None], 0.0, 1.0)
        inf_p, val_p, _, _ = sub.score(prop)
        better = _lexi_better(inf_p, val_p, inf_c, val_c)
        x[better] = prop[better]
        inf_c = np.where(better, inf_p, inf_c)
        val_c = np.where(better, val_p, val_c)
        eta = np.where(better, np.minimum(eta * 1.4, 0.5), eta * 0.5)
        if eta.max() < 1e-5:
            break
    return x


def _maximize_ei(objective_model, f_min, inner: InnerSolverConfig,
                 rng: np.random.Generator, dimension: int) -> np.ndarray:
    """Cheap unconstrained EI maximizer used to anchor the wb2s scale."""
    sub = _Subproblem(objective_model, [], f_min,
                      AcquisitionSpec(kind="ei"), 0.0, None)
    pool = rng.random((min(256, 64 * dimension), dimension))
    vals = sub.acquisition(pool)
    order = np.argsort(vals)
    starts = pool[order[: min(8, pool.shape[0])]]
    steps = max(6, inner.descent_steps(dimension) // 2)
    refined = _projected_descent(sub, starts, steps)
    vals_r = sub.acquisition(refined)
    cand = np.vstack([refined, pool[order[:1]]])
    vals_c = np.concatenate([vals_r, vals[order[:1]]])
    return cand[int(np.argmin(vals_c))]


def _select_starts(sub: _Subproblem, pool: np.ndarray, existing_X: np.ndarray,
                   inner: InnerSolverConfig):
    """Pick refinement starts from the screening pool and the data set."""
    k = inner.n_multistarts
    n_seeded = min(int(round(inner.start_mix * k)), existing_X.shape[0])
    n_pool = k - n_seeded
    chosen = []
    if n_seeded > 0:
        inf_e, val_e, _, _ = sub.score(existing_X)
        order = np.lexsort((val_e, inf_e))
        chosen.append(existing_X[order[:n_seeded]])
    inf_p, val_p, _, _ = sub.score(pool)
    order = np.lexsort((val_p, inf_p))
    chosen.append(pool[order[:n_pool]])
    return np.vstack(chosen), pool[order[:1]]


def solve_subproblem(objective_model, constraint_models, f_min: float,
                     acquisition: AcquisitionSpec,
                     feasibility: FeasibilitySpec, iteration: int,
                     inner: InnerSolverConfig, rng: np.random.Generator,
                     existing_X: np.ndarray) -> SubproblemResult:
    """Minimize the acquisition subject to surrogate feasibility margins.

    Screening over a uniform pool is followed by batched projected
    descent from mixed starts.  The returned point is the best endpoint
    whose minimum margin clears ``-MARGIN_TOL``; if none does, the
    minimum-violation endpoint is returned with ``fallback`` set.  Points
    within ``DUPLICATE_GUARD`` (max-norm) of a recorded point are
    replaced by the best of 1000 * dimension fresh uniform samples with
    ``duplicate_redraw`` set.
    """
    d = objective_model.dimension
    existing_X = np.atleast_2d(np.asarray(existing_X, dtype=float))
    use_utb = feasibility.kind == "utb" and len(constraint_models) > 0
    tau = utb_tau(feasibility, iteration) if use_utb else 0.0

    scale = None
    if acquisition.kind == "wb2s":
        x_ei = _maximize_ei(objective_model, f_min, inner, rng, d)
        scale = compute_wb2s_scale(objective_model, f_min, x_ei,
                                   acquisition.wb2s_beta)

    sub = _Subproblem(objective_model, constraint_models, f_min,
                      acquisition, tau, scale)

    pool = rng.random((inner.resolved_pool(d, use_utb), d))
    starts, pool_best = _select_starts(sub, pool, existing_X, inner)
    refined = _projected_descent(sub, starts, inner.descent_steps(d))

    candidates = np.vstack([refined, pool_best])
    inf_c, val_c, acq_c, mmin_c = sub.score(candidates)
    feas_mask = ~inf_c
    fallback = not bool(feas_mask.any())
    if fallback:
        # Nothing cleared the margins; take the least violating endpoint.
        best = int(np.argmin(val_c))
    else:
        acq_masked = np.where(feas_mask, acq_c, np.inf)
        best = int(np.argmin(acq_masked))
    x_new = candidates[best]

    duplicate_redraw = False
    if existing_X.size and _too_close(x_new, existing_X):
        duplicate_redraw = True
        x_new, best_val, best_inf, best_mmin = _redraw(sub, rng, d, existing_X)
        return SubproblemResult(
            x=x_new, value=float(best_val), margin_min=float(best_mmin),
            fallback=bool(best_inf), duplicate_redraw=True)

    return SubproblemResult(
        x=x_new, value=float(acq_c[best]), margin_min=float(mmin_c[best]),
        fallback=fallback, duplicate_redraw=duplicate_redraw)


def _too_close(x: np.ndarray, existing_X: np.ndarray) -> bool:
    return bool(np.max(np.abs(existing_X - x[None, :]), axis=1).min()
                < DUPLICATE_GUARD)


def _redraw(sub: _Subproblem, rng: np.random.Generator, d: int,
            existing_X: np.ndarray):
    """Replacement draw when the solver landed on a recorded point.

    Margins are scored for every candidate but the acquisition only for
    the margin-feasible subset, which keeps the uncertainty solves off
    the full candidate block.
    """
    from scipy.spatial import cKDTree

    cands = rng.random((1000 * d, d))
    # Drop candidates that are themselves too close to recorded points.
    dist, _ = cKDTree(existing_X).query(cands, k=1, p=np.inf)
    keep = dist >= DUPLICATE_GUARD
    if keep.any():
        cands = cands[keep]
    if not sub.cons:
        acq = sub.acquisition(cands)
        idx = int(np.argmin(acq))
        return cands[idx], acq[idx], False, np.inf
    marg = sub.margins(cands)
    mmin = marg.min(axis=1)
    feasible = mmin >= -MARGIN_TOL
    if feasible.any():
        pick = np.flatnonzero(feasible)
        acq = sub.acquisition(cands[pick])
        j = int(np.argmin(acq))
        idx = int(pick[j])
        return cands[idx], float(acq[j]), False, float(mmin[idx])
    viol = np.maximum(0.0, -marg).sum(axis=1)
    idx = int(np.argmin(viol))
    acq1 = float(sub.acquisition(cands[idx:idx + 1])[0])
    return cands[idx], acq1, True, float(mmin[idx])


def sego_run(problem: OptimizationProblem, config: SolverConfig,
             initial: Dataset, deadline_s: Optional[float] = None) -> RunTrace:
    """Run the surrogate loop for ``config.max_nb_it`` enrichment steps.

    ``initial`` is consumed as the starting data set (a copy is made).
    When ``deadline_s`` is given and the wall clock passes it between
    iterations the run stops early and the trace is marked truncated.
    """
    if config.variant == "evol":
        raise ConfigError("evol runs are driven by evol_run, not sego_run")
    if len(initial.records) == 0:
        raise ConfigError("initial data set must contain at least one record")
    expected = len(initial.records) + config.max_nb_it
    if config.budget_total is not None and config.budget_total != expected:
        raise ConfigError(
            f"budget_total={config.budget_total} inconsistent with "
            f"{len(initial.records)} initial records + {config.max_nb_it} "
            f"iterations = {expected}")

    use_moe, use_utb = _VARIANTS[config.variant]
    feas_spec = config.feasibility
    if use_utb and feas_spec.kind == "utb" and feas_spec.horizon is None:
        feas_spec = replace(feas_spec, horizon=config.max_nb_it)

    ds = initial.copy()
    d = problem.dimension
    m = problem.n_constraints
    kpls_h = config.kpls_components if d > config.kpls_threshold_dim else None
    warm_obj: Optional[np.ndarray] = None
    warm_con: dict = {}
    logs: list = []
    truncated = False
    started = time.perf_counter()

    for it in range(config.max_nb_it):
        if deadline_s is not None and time.perf_counter() - started > deadline_s:
            truncated = True
            break
        X = ds.points()
        yv = ds.objectives()
        C = ds.constraint_matrix()
        # Refit policy: the first fit runs the full multistart; later fits
        # warm-start from the previous length-scales, with a periodic
        # wider search so the likelihood cannot stay stuck in a poor basin.
        if it == 0:
            restarts, maxiter = None, None
        elif it % _FULL_REFIT_PERIOD == 0:
            restarts, maxiter = config.refit_restarts, _REFIT_MAXITER
        else:
            restarts, maxiter = 1, _REFIT_MAXITER

        t0 = time.perf_counter()
        obj_rng = rng_stream(config.seed, it, _PURPOSE_OBJECTIVE)
        if use_moe and len(ds.records) >= 4:
            # Clamp so the clustering precondition holds on small data.
            cap = max(1, min(config.moe_max_experts, len(ds.records) // 4))
            obj_model = fit_moe(
                X, yv, cap,
                recombination=config.moe_recombination, kernel=config.kernel,
                kpls_components=kpls_h, n_restarts=restarts,
                warm_theta=warm_obj, rng=obj_rng, opt_maxiter=maxiter,
                cluster_rng=rng_stream(config.seed, it, _PURPOSE_CLUSTER))
            warm_obj = (obj_model.experts[0].theta
                        if obj_model.n_experts == 1 else None)
        else:
            obj_model = fit_gp(
                X, yv, kernel=config.kernel, kpls_components=kpls_h,
                n_restarts=restarts, warm_theta=warm_obj, rng=obj_rng,
                opt_maxiter=maxiter)
            warm_obj = obj_model.theta
        con_models = []
        for i in range(m):
            cm = fit_gp(
                X, C[:, i], kernel=config.kernel, kpls_components=kpls_h,
                n_restarts=restarts, warm_theta=warm_con.get(i),
                rng=rng_stream(config.seed, it, _PURPOSE_CONSTRAINT + i),
                opt_maxiter=maxiter)
            warm_con[i] = cm.theta
            con_models.append(cm)
        fit_time = time.perf_counter() - t0

        feasible_vals = [r.objective_value for r in ds.records
                         if is_feasible(r)]
        if feasible_vals:
            f_min = float(min(feasible_vals))
        else:
            mu_doe, _ = obj_model.predict(X, need_sigma=False)
            f_min = float(np.min(mu_doe))

        t0 = time.perf_counter()
        result = solve_subproblem(
            obj_model, con_models, f_min, config.acquisition, feas_spec, it,
            config.inner, rng_stream(config.seed, it, _PURPOSE_INNER), X)
        solve_time = time.perf_counter() - t0

        record = evaluate_problem(problem, result.x, len(ds.records))
        ds.append(record)
        logs.append(IterationLog(
            iteration=it,
            x=[float(v) for v in result.x],
            acquisition_value=result.value,
            tau=utb_tau(feas_spec, it) if use_utb else 0.0,
            fit_time_s=fit_time,
            solve_time_s=solve_time,
            fallback=result.fallback,
            duplicate_redraw=result.duplicate_redraw,
            margin_min=result.margin_min if m else None,
        ))

    return RunTrace(dataset=ds, iterations=logs, config=config,
                    truncated=truncated)


def _config_row(config: SolverConfig, truncated: bool) -> dict:
    payload = asdict(config)
    return {"type": "config", "solver_config": payload, "truncated": truncated}


def save_trace(trace: RunTrace, path) -> None:
    """Write per-iteration records as JSON lines, config line first."""
    rows = [_config_row(trace.config, trace.truncated)]
    for entry in trace.iterations:
        row = asdict(entry) if not isinstance(entry, dict) else dict(entry)
        row.setdefault("type", "iteration")
        rows.append(row)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(canonical_dumps(row))
            fh.write("\n")


def load_trace(path) -> list:
    """Read a trace file back as a list of dicts."""
    return read_jsonl(path)
