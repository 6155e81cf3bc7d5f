import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.assembly import (
    assemble_constraint_residual,
    assemble_jacobian,
    assemble_residual,
    discretized_functional,
    full_samples,
    hat_variation,
    hat_variation_gl_derivative,
    isoperimetric_system,
)
from fracvar.glcore import Mesh, rl_derivative_on_mesh
from fracvar.problem import IsoperimetricConstraint, VariationalProblem, builtin_example, example_1, example_3


def quadratic_problem(boundary=(0.0, 0.0), alpha=0.5):
    return VariationalProblem(
        lambda t, x, d: d**2,
        lambda t, x, d: 0 * d,
        lambda t, x, d: 2 * d,
        alpha,
        (0.0, 1.0),
        boundary,
    )


def mixed_problem():
    # nonlinear in both x and d, t-dependent
    return VariationalProblem(
        lambda t, x, d: np.cos(x) * d**2 + t * x**3 + np.exp(0.3 * d),
        lambda t, x, d: -np.sin(x) * d**2 + 3 * t * x**2,
        lambda t, x, d: 2 * np.cos(x) * d + 0.3 * np.exp(0.3 * d),
        0.35,
        (-0.5, 1.5),
        (0.2, -0.4),
    )


def fd_gradient(func, z, step=1e-6):
    g = np.empty_like(z)
    for k in range(len(z)):
        e = np.zeros_like(z)
        e[k] = step * (1 + abs(z[k]))
        g[k] = (func(z + e) - func(z - e)) / (2 * e[k])
    return g


def residual_by_variation_equation(problem, mesh, interior):
    """Equation-form residual: sum over all nodes with the GL derivative of the sampled hat."""
    x = full_samples(problem, mesh, interior)
    a = problem.alpha.alpha
    D = rl_derivative_on_mesh(x, a, mesh)
    t = mesh.t
    out = []
    for j in range(1, mesh.n):
        eta = np.array([hat_variation(j, mesh, ti) for ti in t])
        deta = rl_derivative_on_mesh(eta, a, mesh)
        total = 0.0
        for i in range(1, mesh.n + 1):
            total += float(problem.dL_dx(t[i], x[i], D[i])) * eta[i] + float(problem.dL_dd(t[i], x[i], D[i])) * deta[i]
        out.append(total)
    return np.array(out)


def test_hat_variation_nodal_values():
    m = Mesh(0, 1, 10)
    for j in range(1, 10):
        for i in range(11):
            assert hat_variation(j, m, m.t[i]) == (1.0 if i == j else 0.0)
        assert hat_variation(j, m, 0.0) == 0.0 and hat_variation(j, m, 1.0) == 0.0
    assert hat_variation(3, m, 0.25) == pytest.approx(0.5)
    assert hat_variation(3, m, 0.35) == pytest.approx(0.5)
    with pytest.raises(IndexError):
        hat_variation(0, m, 0.5)
    with pytest.raises(IndexError):
        hat_variation(10, m, 0.5)


def test_hat_variation_gl_derivative_values():
    m = Mesh(0, 1, 10)
    assert hat_variation_gl_derivative(4, 4, 0.5, m) == pytest.approx(1 / 0.1**0.5)
    assert hat_variation_gl_derivative(5, 4, 0.5, m) == 0.0
    assert hat_variation_gl_derivative(1, 2, 0.5, m) == pytest.approx(-1.581138830084189666, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_hat_gl_derivative_equals_operator_on_sampled_hat(alpha):
    m = Mesh(0, 2, 9)
    for j in range(1, 9):
        eta = np.array([hat_variation(j, m, ti) for ti in m.t])
        d = rl_derivative_on_mesh(eta, alpha, m)
        for i in range(10):
            assert hat_variation_gl_derivative(j, i, alpha, m) == d[i]


@pytest.mark.parametrize("make", [quadratic_problem, mixed_problem, lambda: example_1()[0]])
def test_residual_matches_variation_equation_form(make, rng):
    p = make()
    m = Mesh(*p.interval, 11)
    z = rng.standard_normal(10)
    np.testing.assert_allclose(assemble_residual(p, m, z), residual_by_variation_equation(p, m, z), rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("example_id", [1, 2])
def test_gradient_identity_builtins(example_id, rng):
    p, _, _ = builtin_example(example_id)
    m = Mesh(*p.interval, 16)
    for _ in range(10):
        z = rng.uniform(-1, 1.5, 15)
        r = assemble_residual(p, m, z)
        g = fd_gradient(lambda v: discretized_functional(p, m, full_samples(p, m, v)), z) / m.h
        np.testing.assert_allclose(r, g, rtol=1e-5, atol=1e-8 * np.max(np.abs(g)))


def test_gradient_identity_mixed(rng):
    p = mixed_problem()
    m = Mesh(*p.interval, 13)
    for _ in range(5):
        z = rng.uniform(-1, 1, 12)
        r = assemble_residual(p, m, z)
        g = fd_gradient(lambda v: discretized_functional(p, m, full_samples(p, m, v)), z) / m.h
        np.testing.assert_allclose(r, g, rtol=1e-5, atol=1e-8 * np.max(np.abs(g)))


def test_residual_consistency_example_1():
    p, exact = example_1()
    worst = []
    for n in (64, 128, 256):
        m = Mesh(0, 1, n)
        r = assemble_residual(p, m, exact(m.t[1:-1]))
        worst.append(np.max(np.abs(r[n // 4 - 1 :])))
    assert all(b < a for a, b in zip(worst, worst[1:]))


def test_zero_trajectory_zero_residual():
    p = quadratic_problem()
    m = Mesh(0, 1, 12)
    assert np.all(assemble_residual(p, m, np.zeros(11)) == 0)


def test_residual_length_mismatch():
    p = quadratic_problem()
    m = Mesh(0, 1, 12)
    with pytest.raises(ValueError):
        assemble_residual(p, m, np.zeros(12))
    with pytest.raises(ValueError):
        discretized_functional(p, m, np.zeros(12))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**31))
def test_quadratic_residual_is_affine(n, seed):
    g = np.random.default_rng(seed)
    p = VariationalProblem(
        lambda t, x, d: (d - t) ** 2 + 0.5 * x**2 + t * x * d,
        lambda t, x, d: x + t * d,
        lambda t, x, d: 2 * (d - t) + t * x,
        0.6,
        (0.0, 1.0),
        (0.3, -0.2),
    )
    m = Mesh(0, 1, n)
    u, v = g.standard_normal((2, n - 1))
    r = lambda z: assemble_residual(p, m, z)
    gap = r(u + v) - r(u) - r(v) + r(np.zeros(n - 1))
    assert np.max(np.abs(gap)) <= 1e-12 * (1 + np.max(np.abs(r(u + v))))


def test_jacobian_constant_for_example_1(rng):
    p, _ = example_1()
    m = Mesh(0, 1, 20)
    u, v = rng.standard_normal((2, 19))
    # default sqrt(eps) steps: limited by rounding in the residual
    J1, J2 = assemble_jacobian(p, m, u), assemble_jacobian(p, m, v)
    assert np.max(np.abs(J1 - J2)) <= 1e-7 * np.max(np.abs(J1))
    ones = np.ones(19)
    K1, K2 = assemble_jacobian(p, m, u, steps=ones), assemble_jacobian(p, m, v, steps=ones)
    assert np.max(np.abs(K1 - K2)) <= 1e-8
    assert np.max(np.abs(K1 - J1)) <= 1e-7 * np.max(np.abs(J1))


def test_jacobian_symmetric_psd_for_pure_d_squared(rng):
    p = quadratic_problem()
    m = Mesh(0, 1, 15)
    z = rng.standard_normal(14)
    J = assemble_jacobian(p, m, z)
    assert np.max(np.abs(J - J.T)) <= 1e-7 * np.max(np.abs(J))
    K = assemble_jacobian(p, m, z, steps=np.ones(14))
    assert np.max(np.abs(K - K.T)) <= 1e-8
    assert np.min(np.linalg.eigvalsh(0.5 * (K + K.T))) >= -1e-8 * np.max(np.abs(K))


def test_jacobian_single_unknown_secant():
    p = mixed_problem()
    m = Mesh(*p.interval, 2)
    x1 = np.array([0.3])
    J = assemble_jacobian(p, m, x1)
    assert J.shape == (1, 1)
    dx = 1e-6
    secant = (assemble_residual(p, m, x1 + dx) - assemble_residual(p, m, x1 - dx)) / (2 * dx)
    assert J[0, 0] == pytest.approx(secant[0], rel=1e-6)


def test_discretized_functional_constant_integrand():
    p = VariationalProblem.from_lagrangian(lambda t, x, d: 1.0 + 0 * t, 0.5, (-1.0, 2.0), (0, 0))
    m = Mesh(-1, 2, 7)
    assert discretized_functional(p, m, np.zeros(8)) == pytest.approx(3.0, rel=1e-15)


def test_discretized_functional_at_exact_samples_decreases():
    for example_id in (1, 2):
        p, _, exact = builtin_example(example_id)
        vals = []
        for n in (40, 80, 160):
            m = Mesh(0, 1, n)
            vals.append(discretized_functional(p, m, exact(m.t)))
        assert all(v > 0 for v in vals)
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_constraint_residual_cases():
    p, g, exact = example_3()
    m = Mesh(0, 1, 10)
    assert assemble_constraint_residual(g, m, np.zeros(11), 0.5) == -0.2
    const = IsoperimetricConstraint(lambda t, x, d: 0 * t + 0.2 / 1.0, None, None, 0.2)
    assert assemble_constraint_residual(const, m, np.zeros(11), 0.5) == pytest.approx(0.0, abs=1e-15)
    gaps = []
    for n in (25, 50, 100, 200):
        m = Mesh(0, 1, n)
        gaps.append(abs(assemble_constraint_residual(g, m, exact(m.t), 0.5)))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_isoperimetric_gradient_identity_fixed_lambda(rng):
    p, g, _ = example_3()
    m = Mesh(0, 1, 16)
    lam = -1.3
    F = p.with_constraint(g, lam)
    sys_ = isoperimetric_system(p, g, m)
    for _ in range(5):
        z = rng.uniform(-1, 1, 15)
        r = sys_.residual(np.append(z, lam))
        grad = fd_gradient(lambda v: discretized_functional(F, m, full_samples(F, m, v)), z) / m.h
        np.testing.assert_allclose(r[:-1], grad, rtol=1e-5, atol=1e-8 * np.max(np.abs(grad)))
        assert r[-1] == pytest.approx(assemble_constraint_residual(g, m, full_samples(p, m, z), 0.5))


def _best_time(f, repeats=7):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        f()
        best = min(best, time.perf_counter() - t0)
    return best


@pytest.mark.slow
def test_residual_cost_quadratic_in_n():
    p, exact = example_1()
    m1, m2 = Mesh(0, 1, 4000), Mesh(0, 1, 8000)
    z1, z2 = exact(m1.t[1:-1]), exact(m2.t[1:-1])
    ratio = _best_time(lambda: assemble_residual(p, m2, z2)) / _best_time(lambda: assemble_residual(p, m1, z1))
    assert 2.5 <= ratio <= 6.0, ratio
