"""Constrained Bayesian optimization with GP surrogates and a benchmark harness."""

__version__ = "0.1.0"

from .problems import (
    FEAS_TOL,
    EvaluationRecord,
    KnownOptimum,
    OptimizationProblem,
    Sense,
    benchmark_suite,
    canonicalize_constraints,
    denormalize,
    evaluate,
    get_problem,
    is_feasible,
    normalize,
    problem_names,
    selection_key,
    total_violation,
)
from .doe import (
    Dataset,
    build_initial_doe,
    doe_size,
    incumbent,
    inject_warm_start,
    lhs_sample,
    load_history,
    save_history,
)
from .acquisition import (
    AcquisitionSpec,
    FeasibilitySpec,
    acquisition_value,
    acquisition_values,
    compute_wb2s_scale,
    expected_improvement,
    feasibility_margin,
    feasibility_margins,
    utb_tau,
)
from .surrogate import (
    GaussianProcessModel,
    MixtureOfExperts,
    PlsProjection,
    fit_gp,
    fit_moe,
    moe_predict,
    pls_fit,
    predict,
)
from .sego import (
    InnerSolverConfig,
    IterationLog,
    RunTrace,
    SolverConfig,
    SubproblemResult,
    load_trace,
    make_variant,
    rng_stream,
    save_trace,
    sego_run,
    solve_subproblem,
)
from .evol import EvolConfig, evol_run
from .reporting import (
    ConvergenceReport,
    RunArtifact,
    best_valid_series,
    build_report,
    emit_plots,
    experiment_penalty,
    median_run,
    scale01,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    chain_experiments,
    load_run_dir,
    report_run_dir,
    run_experiment,
    solver_names,
)

__all__ = [
    "AcquisitionSpec",
    "ConvergenceReport",
    "Dataset",
    "EvaluationRecord",
    "EvolConfig",
    "ExperimentConfig",
    "ExperimentResult",
    "FeasibilitySpec",
    "FEAS_TOL",
    "GaussianProcessModel",
    "InnerSolverConfig",
    "IterationLog",
    "KnownOptimum",
    "MixtureOfExperts",
    "OptimizationProblem",
    "PlsProjection",
    "RunArtifact",
    "RunTrace",
    "Sense",
    "SolverConfig",
    "SubproblemResult",
    "acquisition_value",
    "acquisition_values",
    "benchmark_suite",
    "best_valid_series",
    "build_initial_doe",
    "build_report",
    "canonicalize_constraints",
    "chain_experiments",
    "compute_wb2s_scale",
    "denormalize",
    "doe_size",
    "emit_plots",
    "evaluate",
    "evol_run",
    "expected_improvement",
    "experiment_penalty",
    "feasibility_margin",
    "feasibility_margins",
    "fit_gp",
    "fit_moe",
    "get_problem",
    "incumbent",
    "inject_warm_start",
    "is_feasible",
    "lhs_sample",
    "load_history",
    "load_run_dir",
    "load_trace",
    "make_variant",
    "median_run",
    "moe_predict",
    "normalize",
    "pls_fit",
    "predict",
    "problem_names",
    "report_run_dir",
    "rng_stream",
    "run_experiment",
    "save_history",
    "save_trace",
    "scale01",
    "sego_run",
    "selection_key",
    "solve_subproblem",
    "solver_names",
    "total_violation",
    "utb_tau",
]
