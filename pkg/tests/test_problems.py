import numpy as np
import pytest

from sego_bench import (
    FEAS_TOL,
    EvaluationRecord,
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
from sego_bench.errors import ConfigError, DomainError


def test_registry_lists_all_benchmarks():
    names = problem_names()
    assert names == sorted(names)
    for expected in ("branin-c", "cmdo12", "pmdo19", "toy-quad"):
        assert expected in names


def test_get_problem_unknown_name():
    with pytest.raises(ConfigError):
        get_problem("nope")


def test_benchmark_shapes():
    dims = {p.name: (p.dimension, len(p.constraints)) for p in benchmark_suite()}
    assert dims["branin-c"] == (2, 1)
    assert dims["cmdo12"] == (12, 8)
    assert dims["pmdo19"] == (19, 5)
    assert dims["toy-quad"][1] == 0


def test_normalize_round_trip():
    p = get_problem("branin-c")
    x_phys = np.array([2.0, 7.5])
    x_norm = normalize(x_phys, p)
    assert np.all((x_norm >= 0.0) & (x_norm <= 1.0))
    back = denormalize(x_norm, p)
    np.testing.assert_allclose(back, x_phys, atol=1e-12)


def test_normalize_rejects_out_of_box():
    p = get_problem("branin-c")
    with pytest.raises(DomainError):
        normalize([100.0, 0.0], p)


def test_canonical_sense_flip():
    p = get_problem("branin-c")
    raw = np.array([3.0])
    c = canonicalize_constraints(raw, p)
    # branin-c uses one <= bound; canonical value is bound - raw
    assert p.constraint_sense[0] is Sense.LESS_EQUAL
    np.testing.assert_allclose(c, p.constraint_bounds - raw)


def test_known_optima_are_feasible_and_match():
    for p in benchmark_suite():
        ko = p.known_optimum
        if ko is None:
            continue
        x_norm = normalize(ko.point, p)
        rec = evaluate(p, x_norm, eval_index=0)
        assert is_feasible(rec), p.name
        assert rec.objective_value == pytest.approx(ko.value, rel=1e-9), p.name


def test_evaluate_record_contents():
    p = get_problem("cmdo12")
    x = np.full(12, 0.5)
    rec = evaluate(p, x, eval_index=7)
    assert rec.eval_index == 7
    assert rec.constraint_values.shape == (8,)
    assert rec.wall_time_s >= 0.0
    np.testing.assert_array_equal(rec.x, x)
    # determinism of the evaluators themselves
    rec2 = evaluate(p, x, eval_index=7)
    assert rec2.objective_value == rec.objective_value
    np.testing.assert_array_equal(rec2.constraint_values, rec.constraint_values)


def _rec(obj, cons, idx=0):
    return EvaluationRecord(
        x=np.zeros(2), objective_value=obj,
        constraint_values=np.asarray(cons, dtype=float),
        eval_index=idx, wall_time_s=0.0,
    )


def test_feasibility_tolerance_boundary():
    assert is_feasible(_rec(0.0, [-FEAS_TOL]))
    assert not is_feasible(_rec(0.0, [-FEAS_TOL * 1.5]))
    assert is_feasible(_rec(0.0, []))


def test_total_violation_sums_only_negative_parts():
    assert total_violation(_rec(0.0, [2.0, -0.5, -1.5])) == pytest.approx(2.0)
    assert total_violation(_rec(0.0, [1.0, 3.0])) == 0.0
    assert total_violation(_rec(0.0, [])) == 0.0


def test_selection_key_ranks_feasible_first():
    feas_bad = _rec(100.0, [0.5])
    feas_good = _rec(1.0, [0.0])
    infeas_close = _rec(-50.0, [-1e-3])
    infeas_far = _rec(-99.0, [-10.0])
    ranked = sorted(
        [infeas_far, feas_bad, infeas_close, feas_good], key=selection_key
    )
    assert ranked[0] is feas_good
    assert ranked[1] is feas_bad
    assert ranked[2] is infeas_close
    assert ranked[3] is infeas_far


def test_record_immutable():
    rec = _rec(1.0, [0.0])
    with pytest.raises(AttributeError):
        rec.objective_value = 2.0
