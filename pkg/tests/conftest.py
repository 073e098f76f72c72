import numpy as np
import pytest

from sego_bench import (
    InnerSolverConfig,
    OptimizationProblem,
    Sense,
    build_initial_doe,
)


def quick_inner() -> InnerSolverConfig:
    """Small pools and few starts so unit-test runs stay under a second."""
    return InnerSolverConfig(n_multistarts=8, local_budget=60, pool_size=96)


@pytest.fixture
def ring_problem() -> OptimizationProblem:
    """2-D sphere objective with one ring constraint, optimum on the ring.

    min (x0-0.6)^2 + (x1-0.6)^2  s.t.  x0^2 + x1^2 >= 0.25 over [-1, 1]^2.
    The unconstrained minimum is feasible, so the solver does not need to
    ride the boundary; the constraint still prunes a chunk of the box.
    """

    def obj(x):
        return float((x[0] - 0.6) ** 2 + (x[1] - 0.6) ** 2)

    def con(x):
        return float(x[0] ** 2 + x[1] ** 2)

    return OptimizationProblem(
        name="ring",
        dimension=2,
        lower_bounds=[-1.0, -1.0],
        upper_bounds=[1.0, 1.0],
        objective=obj,
        constraints=(con,),
        constraint_bounds=[0.25],
        constraint_sense=(Sense.GREATER_EQUAL,),
    )


@pytest.fixture
def ring_doe(ring_problem):
    return build_initial_doe(ring_problem, 8, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
