import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.assembly import discretized_functional, full_samples, isoperimetric_system, residual_system
from fracvar.glcore import Mesh
from fracvar.problem import IsoperimetricConstraint, VariationalProblem, example_1, example_2, example_3
from fracvar.solver import (
    ConvergenceError,
    SingularJacobianError,
    SolverOptions,
    is_affine,
    newton_step,
    solve,
    solve_isoperimetric,
)

from oracles import coordinate_descent, fd_stationarity


def max_err(sol, exact):
    return float(np.max(np.abs(exact(sol.t) - sol.values)))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol_residual=0)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)
    with pytest.raises(ValueError):
        SolverOptions(initial_guess="zero")


def test_example_1_single_step():
    p, exact = example_1()
    sol = solve(p, 100)
    assert sol.converged and sol.linear
    assert sol.iterations == 1
    assert sol.final_residual_norm <= 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_example_1_one_step_from_random_start(seed):
    p, _ = example_1()
    g = np.random.default_rng(seed)
    sol = solve(p, 40, SolverOptions(initial_guess=g.normal(scale=3, size=39)))
    assert sol.converged and sol.iterations == 1


def test_example_1_one_step_without_affine_detection():
    p, _ = example_1()
    sol = solve(p, 60, SolverOptions(detect_linear=False))
    assert sol.converged and not sol.linear
    assert sol.iterations <= 2


def test_second_newton_step_negligible_for_quadratic():
    p, _ = example_1()
    sol = solve(p, 100)
    system = residual_system(p, sol.mesh)
    step = newton_step(system, sol.interior, linear=True)
    assert np.linalg.norm(step) <= 1e-8 * (1 + np.linalg.norm(sol.values))


def test_example_2_converges_and_refines():
    p, exact = example_2()
    errs = []
    for n in (25, 50):
        sol = solve(p, n)
        assert sol.converged and not sol.linear
        errs.append(max_err(sol, exact))
    assert errs[1] < errs[0]


def test_degenerate_two_interval_mesh():
    p, _ = example_2()
    sol = solve(p, 2)
    assert sol.converged and sol.values.shape == (3,)
    assert sol.final_residual_norm <= 1e-10


def test_descent_of_residual_history():
    p, _ = example_2()
    sol = solve(p, 40)
    hist = np.array(sol.residual_history)
    assert np.all(np.diff(hist) <= 0)
    assert len(sol.step_norms) == sol.iterations


@pytest.mark.parametrize("n", [2, 7, 33])
def test_boundary_values_pinned(n):
    p, g, _ = example_3()
    sol = solve_isoperimetric(p, g, n)
    assert sol.values[0] == p.boundary[0] and sol.values[-1] == p.boundary[1]
    for q in (example_1()[0], example_2()[0]):
        s = solve(q, n)
        assert s.values[0] == q.boundary[0] and s.values[-1] == q.boundary[1]


def test_unconverged_returns_best_iterate_or_raises():
    p, _ = example_2()
    sol = solve(p, 30, SolverOptions(max_iterations=2))
    assert not sol.converged and sol.iterations == 2
    assert sol.final_residual_norm == sol.residual_history[-1] < sol.residual_history[0]
    with pytest.raises(ConvergenceError) as info:
        solve(p, 30, SolverOptions(max_iterations=2, raise_on_failure=True))
    assert info.value.solution.iterations == 2


def test_singular_jacobian_detected():
    # L = t * d: residual does not depend on x at all
    p = VariationalProblem(lambda t, x, d: t * d, lambda t, x, d: 0 * t, lambda t, x, d: t + 0 * d, 0.5, (0, 1), (0, 1))
    with pytest.raises(SingularJacobianError):
        solve(p, 10)


@pytest.mark.parametrize("make", [example_1, example_2])
def test_stationarity_of_converged_solution(make):
    p, _ = make()
    opts = SolverOptions()
    sol = solve(p, 20, opts)
    assert sol.converged
    # gradient of J_h is h times the residual
    grad = fd_stationarity(p, sol.mesh, sol.values) * sol.mesh.h
    assert grad <= 10 * sol.mesh.h * opts.tol_residual


@pytest.mark.parametrize("make", [example_1, example_2])
def test_matches_direct_minimizer_at_desk_scale(make):
    p, _ = make()
    mesh, x, stat = coordinate_descent(p, 8)
    assert stat <= 1e-12
    sol = solve(p, 8)
    assert np.max(np.abs(sol.values - x)) <= 1e-4


def test_isoperimetric_example_3():
    p, g, exact = example_3()
    sol = solve_isoperimetric(p, g, 100)
    assert sol.converged and sol.lam is not None
    assert abs(sol.constraint_residual) <= 1e-10
    e100 = max_err(sol, exact)
    assert max_err(solve_isoperimetric(p, g, 50), exact) > e100
    assert max_err(solve_isoperimetric(p, g, 200), exact) < e100


def test_inactive_constraint_gives_zero_multiplier():
    p, _ = example_2()
    n = 20
    free = solve(p, n)
    K = discretized_functional(p, free.mesh, free.values)
    g = IsoperimetricConstraint(p.lagrangian, p.dL_dx, p.dL_dd, K)
    system = isoperimetric_system(p, g, free.mesh)
    r = system.residual(np.append(free.interior, 0.0))
    assert np.max(np.abs(r)) <= 1e-9


def test_isoperimetric_lambda_stabilises():
    p, g, _ = example_3()
    lams = [solve_isoperimetric(p, g, n).lam for n in (32, 64, 128, 256)]
    jumps = np.abs(np.diff(lams))
    assert np.all(np.diff(jumps) < 0)


def test_is_affine_classification():
    m = Mesh(0, 1, 12)
    assert is_affine(residual_system(example_1()[0], m))
    assert not is_affine(residual_system(example_2()[0], m))
    p, g, _ = example_3()
    assert is_affine(isoperimetric_system(p, g, m))


def test_user_initial_guess_shapes():
    p, _ = example_2()
    full = np.linspace(0, 1, 11)
    assert solve(p, 10, SolverOptions(initial_guess=full)).converged
    assert solve(p, 10, SolverOptions(initial_guess=full[1:-1])).converged
    with pytest.raises(ValueError):
        solve(p, 10, SolverOptions(initial_guess=np.zeros(4)))


def test_nonlinear_in_x_problem_converges():
    # L = d^2 + x^4 - x: convex, nonlinear in x
    p = VariationalProblem(
        lambda t, x, d: d**2 + x**4 - x,
        lambda t, x, d: 4 * x**3 - 1,
        lambda t, x, d: 2 * d,
        0.7,
        (0.0, 2.0),
        (0.5, -0.5),
    )
    sol = solve(p, 30)
    assert sol.converged and np.all(np.isfinite(sol.values))
    assert sol.values[0] == 0.5 and sol.values[-1] == -0.5
