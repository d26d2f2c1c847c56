import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import benchmark_run, linear_spec
from crafem import adapt
from crafem.adapt import ConvergenceRecord, adaptive_solve, convergence_slope, mark
from crafem.fem import SolverError
from crafem.problems import lshape_problem, problem_from_dict


def test_theta_one_marks_all_nonzero():
    eta = np.array([0.0, 1.0, 2.0, 0.5, 0.0])
    np.testing.assert_array_equal(mark(eta, 1.0), [1, 2, 3])


def test_dominant_element_marked_alone():
    eta = np.array([0.1, 3.0, 0.2, 0.1])
    np.testing.assert_array_equal(mark(eta, 0.5), [1])


@pytest.mark.parametrize("n", [1, 5, 10, 37, 100])
def test_equal_indicators(n):
    assert len(mark(np.ones(n), 0.2)) == math.ceil(0.2 * n)


def test_ties_prefer_lower_ids():
    np.testing.assert_array_equal(mark(np.ones(10), 0.2), [0, 1])


@pytest.mark.parametrize("theta", [0.0, -0.1, 1.5])
def test_theta_out_of_range(theta):
    with pytest.raises(ValueError, match="theta out of range"):
        mark(np.ones(3), theta)


@settings(max_examples=100, deadline=None)
@given(eta=st.lists(st.floats(0, 1e3), min_size=1, max_size=40), theta=st.floats(0.01, 1.0))
def test_marking_is_minimal_bulk_set(eta, theta):
    eta = np.array(eta)
    marked = mark(eta, theta)
    sq = eta ** 2
    if sq.sum() == 0:
        assert len(marked) == 0
        return
    assert len(marked) >= 1
    assert sq[marked].sum() >= theta * sq.sum() * (1 - 1e-9)
    # no smaller set reaches the threshold: dropping the smallest marked one falls short
    if len(marked) > 1:
        smallest = sq[marked].min()
        assert sq[marked].sum() - smallest < theta * sq.sum() * (1 + 1e-9)
    # marked elements dominate unmarked ones
    rest = np.setdiff1d(np.arange(len(eta)), marked)
    if len(rest):
        assert sq[marked].min() >= sq[rest].max()


def test_linear_problem_stops_immediately():
    res = adaptive_solve(linear_spec(), tol=1e-6)
    assert res.converged and len(res.records) == 1
    rec = res.records[0]
    assert rec.step == 0 and rec.marked == 0 and rec.rel_err < 1e-12


def test_invalid_arguments():
    spec = lshape_problem()
    with pytest.raises(ValueError, match="theta out of range"):
        adaptive_solve(spec, theta=0)
    with pytest.raises(ValueError, match="tol"):
        adaptive_solve(spec, tol=0)
    with pytest.raises(ValueError, match="unknown estimator"):
        adaptive_solve(spec, estimator="fancy")


def test_max_steps_respected():
    res = adaptive_solve(lshape_problem(), tol=1e-6, max_steps=3)
    assert not res.converged
    assert [r.step for r in res.records] == [0, 1, 2, 3]
    assert res.records[-1].marked == 0


def test_monotone_growth_and_determinism():
    a = adaptive_solve(lshape_problem(), estimator="standard", tol=0.03, max_steps=60)
    b = adaptive_solve(lshape_problem(), estimator="standard", tol=0.03, max_steps=60)
    assert [r.as_dict() for r in a.records] == [r.as_dict() for r in b.records]
    counts = [r.elements for r in a.records]
    assert all(x < y for x, y in zip(counts, counts[1:]))
    assert all(r.marked > 0 for r in a.records[:-1])


def test_solver_failure_reports_step(monkeypatch):
    calls = {"n": 0}
    real = adapt.solve

    def flaky(system, *args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SolverError("did not converge", iterations=5, residual=1.0)
        return real(system, *args, **kwargs)

    monkeypatch.setattr(adapt, "solve", flaky)
    with pytest.raises(SolverError, match="step 2: did not converge"):
        adaptive_solve(lshape_problem(), tol=1e-6)


def test_run_without_exact_solution_uses_estimator_stop():
    d = {
        "name": "square",
        "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
        "subdomains": [{"id": 1, "polygon": [0, 1, 2, 3], "alpha": 1.0, "f": [[1.0, 0, 0]]}],
        "boundary": [{"segment": [i, (i + 1) % 4], "tag": "D"} for i in range(4)],
    }
    res = adaptive_solve(problem_from_dict(d), tol=0.3, max_steps=40)
    assert res.converged
    last = res.records[-1]
    assert math.isnan(last.true_error) and math.isnan(last.eff_eta)


def test_slope_synthetic_exact():
    recs = [{"dofs": n, "true_error": 3.0 * n ** -0.5} for n in np.geomspace(10, 1e5, 20)]
    assert convergence_slope(recs) == pytest.approx(-0.5, abs=1e-12)


def test_slope_synthetic_noisy():
    rng = np.random.default_rng(7)
    dofs = np.geomspace(10, 1e6, 40)
    recs = [{"dofs": n, "true_error": 3.0 * n ** -0.5 * (1 + 0.05 * rng.uniform(-1, 1))} for n in dofs]
    assert -0.55 <= convergence_slope(recs) <= -0.45


def test_slope_needs_records():
    with pytest.raises(ValueError):
        convergence_slope([{"dofs": 1, "true_error": 1.0}])


def test_record_row_order():
    rec = ConvergenceRecord(1, 2, 3, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 7)
    assert rec.csv_row() == [1, 2, 3, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 7]


def test_kellogg_refinement_concentrates_at_origin():
    res, _ = benchmark_run("kellogg", "modified", 0.1)
    assert res.converged and res.records[-1].rel_err <= 0.1
    r = np.hypot(*res.mesh.centroids.T)
    assert np.mean(r < 0.1) >= 0.3
    assert convergence_slope(res.records) == pytest.approx(-0.5, abs=0.1)


def test_lshape_refinement_concentrates_at_corner():
    res, _ = benchmark_run("lshape", "standard", 0.0075)
    assert res.converged
    r = np.hypot(*res.mesh.centroids.T)
    # the density of elements near the re-entrant corner far exceeds the average
    near = np.mean(r < 0.1) / (np.pi * 0.1 ** 2 * 0.75 / 3.0)
    assert near > 10
