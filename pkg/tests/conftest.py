import numpy as np
import pytest

from crafem.mesh import build_mesh, refine_uniform
from crafem.problems import ExactSolution, ProblemSpec


def unit_square(boundary="D", coefficients=None):
    return build_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]],
                      boundary=boundary, coefficients=coefficients)


def criss_cross(coefficients=None, boundary="D", checker=True):
    """Unit square split into 4 triangles meeting at the centre.

    With ``checker`` the subdomains are 1, 2, 1, 2 around the centre.
    """
    v = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    t = [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]
    sub = [1, 2, 1, 2] if checker else [1, 1, 1, 1]
    return build_mesh(v, t, sub, boundary=boundary, coefficients=coefficients)


def make_spec(mesh, u, grad, f=None, coefficients=None, name="manufactured", g_N=None,
              singular_points=()):
    """Problem with exact solution ``u`` on ``mesh`` (Dirichlet data from ``u``)."""
    coefficients = coefficients or {int(s): 1.0 for s in np.unique(mesh.subdomains)}
    f = f or (lambda x, y, sub: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape))

    def g_D_grad(x, y):
        return grad(x, y)

    return ProblemSpec(
        name=name, coefficients=coefficients, f=f, g_D=u, boundary=lambda x, y: "D",
        mesh=mesh, g_N=g_N, g_D_grad=g_D_grad,
        exact=ExactSolution(u, grad), singular_points=singular_points,
    )


def linear_spec(mesh=None, a=2.0, b=3.0, c=-1.0):
    mesh = mesh or refine_uniform(unit_square(), 2)

    def u(x, y):
        return a * np.asarray(x) + b * np.asarray(y) + c

    def grad(x, y):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, a), np.full(x.shape, b)

    return make_spec(mesh, u, grad, name="linear")


def quadratic_spec(mesh):
    """u = x^2 + y^2, alpha = 1, f = -4."""
    def u(x, y):
        return np.asarray(x) ** 2 + np.asarray(y) ** 2

    def grad(x, y):
        return 2 * np.asarray(x, dtype=float), 2 * np.asarray(y, dtype=float)

    def f(x, y, sub):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, -4.0)

    return make_spec(mesh, u, grad, f=f, name="quadratic")


def random_free_cr(mesh, rng):
    """Random CR function vanishing at Dirichlet midpoints."""
    from crafem.fem import CrSolution
    from crafem.mesh import DIRICHLET

    v = rng.standard_normal(mesh.n_edges)
    v[mesh.edge_tags == DIRICHLET] = 0.0
    return CrSolution(mesh, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ----------------------------------------------------------------------
# benchmark runs shared by several test modules (each computed once per session)
# ----------------------------------------------------------------------
BENCH_MAX_STEPS = 400
_RUNS = {}


def benchmark_run(problem, estimator, tol, theta=0.2):
    """Adaptive run of a benchmark problem, cached; returns (result, seconds)."""
    import time

    from crafem.adapt import adaptive_solve
    from crafem.problems import get_problem

    key = (problem, estimator, tol, theta)
    if key not in _RUNS:
        start = time.perf_counter()
        res = adaptive_solve(get_problem(problem), estimator=estimator, theta=theta, tol=tol,
                             max_steps=BENCH_MAX_STEPS)
        _RUNS[key] = (res, time.perf_counter() - start)
    return _RUNS[key]


# ----------------------------------------------------------------------
# acceptance report: lines collected by test_acceptance, repeated at the end of the run
# ----------------------------------------------------------------------
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
