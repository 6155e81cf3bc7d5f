"""Discrete first-variation system for the direct method.

Testing the discretized first variation against the hat functions
``eta_1..eta_{n-1}`` gives, for each interior node ``j``,

    r_j = dL/dx(t_j, x_j, D_j) + h**(-alpha) * sum_{i=j}^{n} dL/dd(t_i, x_i, D_i) w_{i-j},

with ``D_i`` the Grünwald-Letnikov derivative of the mesh samples. The same
vector is ``(1/h)`` times the gradient of the right-endpoint sum
``J_h = h * sum_{i=1}^{n} L(t_i, x_i, D_i)`` with respect to the interior values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .glcore import AlphaLike, Mesh, _alpha, gl_weights, rl_derivative_on_mesh
from .problem import IsoperimetricConstraint, VariationalProblem

__all__ = [
    "ResidualSystem",
    "hat_variation",
    "hat_variation_gl_derivative",
    "full_samples",
    "assemble_residual",
    "assemble_jacobian",
    "fd_jacobian",
    "discretized_functional",
    "assemble_constraint_residual",
    "residual_system",
    "isoperimetric_system",
]

_SQRT_EPS = np.sqrt(np.finfo(float).eps)


def _check_interior_index(j: int, mesh: Mesh) -> None:
    if not (1 <= j <= mesh.n - 1):
        raise IndexError(f"hat index must satisfy 1 <= j <= {mesh.n - 1}, got {j}")


def hat_variation(j: int, mesh: Mesh, t: float) -> float:
    """Piecewise-linear hat centred on node ``t_j``; zero outside ``[t_{j-1}, t_{j+1})``."""
    _check_interior_index(j, mesh)
    h = mesh.h
    left, mid, right = mesh.t[j - 1], mesh.t[j], mesh.t[j + 1]
    if t == mid:
        return 1.0
    if left <= t < mid:
        return (t - left) / h
    if mid <= t < right:
        return (right - t) / h
    return 0.0


def hat_variation_gl_derivative(j: int, i: int, alpha: AlphaLike, mesh: Mesh) -> float:
    """GL derivative of ``eta_j`` at node ``t_i``: ``w_{i-j} / h**alpha`` if ``j <= i``, else 0."""
    _check_interior_index(j, mesh)
    if not (0 <= i <= mesh.n):
        raise IndexError(f"node index must satisfy 0 <= i <= {mesh.n}, got {i}")
    if j > i:
        return 0.0
    a = _alpha(alpha)
    return float(gl_weights(a, i - j).w[i - j]) / mesh.h**a


def full_samples(problem: VariationalProblem, mesh: Mesh, interior) -> np.ndarray:
    """``x_0..x_n`` with the boundary data attached to the interior values."""
    x = np.asarray(interior, dtype=float)
    if x.shape != (mesh.n - 1,):
        raise ValueError(f"expected {mesh.n - 1} interior values, got shape {x.shape}")
    xa, xb = problem.boundary
    return np.concatenate(([xa], x, [xb]))


def _check_full(mesh: Mesh, samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.shape != (mesh.n + 1,):
        raise ValueError(f"expected {mesh.n + 1} samples, got shape {x.shape}")
    return x


def assemble_residual(problem: VariationalProblem, mesh: Mesh, interior) -> np.ndarray:
    """Residual ``r_1..r_{n-1}`` of the hat-tested first variation."""
    x = full_samples(problem, mesh, interior)
    n = mesh.n
    a = problem.alpha.alpha
    scale = mesh.h**-a
    w = gl_weights(a, n).w
    t = mesh.t
    D = rl_derivative_on_mesh(x, a, mesh)
    # p[k] = dL/dd at node k + 1, k = 0..n-1
    p = np.asarray(problem.dL_dd(t[1:], x[1:], D[1:]), float)
    # s_j = sum_{m=0}^{n-j} w_m p_{j+m}; a convolution with p reversed
    s = np.convolve(w[:n], p[::-1])
    tail = s[n - 1 : 0 : -1]
    lx = np.asarray(problem.dL_dx(t[1:n], x[1:n], D[1:n]), float)
    return lx + scale * tail


def discretized_functional(problem: VariationalProblem, mesh: Mesh, samples) -> float:
    """Right-endpoint sum ``h * sum_{i=1}^{n} L(t_i, x_i, D_i)``."""
    x = _check_full(mesh, samples)
    D = rl_derivative_on_mesh(x, problem.alpha, mesh)
    t = mesh.t
    vals = np.asarray(problem.lagrangian(t[1:], x[1:], D[1:]), float)
    return float(mesh.h * np.sum(np.broadcast_to(vals, t[1:].shape)))


def assemble_constraint_residual(
    constraint: IsoperimetricConstraint, mesh: Mesh, samples, alpha: AlphaLike
) -> float:
    """``h * sum_{i=1}^{n} g(t_i, x_i, D_i) - K``."""
    x = _check_full(mesh, samples)
    D = rl_derivative_on_mesh(x, alpha, mesh)
    t = mesh.t
    vals = np.asarray(constraint.integrand(t[1:], x[1:], D[1:]), float)
    return float(mesh.h * np.sum(np.broadcast_to(vals, t[1:].shape)) - constraint.K)


def fd_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    f0: Optional[np.ndarray] = None,
    steps: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Forward-difference Jacobian, one column per unknown.

    Default step for unknown ``l`` is ``sqrt(eps) * (1 + |z_l|)``.
    """
    z = np.asarray(z, dtype=float)
    if f0 is None:
        f0 = fun(z)
    if steps is None:
        steps = _SQRT_EPS * (1.0 + np.abs(z))
    J = np.empty((len(f0), len(z)))
    for l in range(len(z)):
        zp = z.copy()
        zp[l] += steps[l]
        J[:, l] = (fun(zp) - f0) / (zp[l] - z[l])
    return J


def assemble_jacobian(
    problem: VariationalProblem, mesh: Mesh, interior, steps: Optional[np.ndarray] = None
) -> np.ndarray:
    """``(n-1) x (n-1)`` forward-difference Jacobian of :func:`assemble_residual`.

    Relative rounding noise with the default steps is around ``1e-8``; for an
    affine residual pass unit ``steps`` to get the matrix to rounding accuracy.
    """
    x = np.asarray(interior, dtype=float)
    return fd_jacobian(lambda v: assemble_residual(problem, mesh, v), x, steps=steps)


@dataclass(frozen=True)
class ResidualSystem:
    """Square nonlinear system ``residual(z) = 0`` over the unknown vector ``z``.

    ``z`` is the interior trajectory, followed by the multiplier in the
    isoperimetric case.
    """

    mesh: Mesh
    size: int
    residual: Callable[[np.ndarray], np.ndarray]
    problem: VariationalProblem
    constraint: Optional[IsoperimetricConstraint] = None

    def samples(self, z) -> np.ndarray:
        return full_samples(self.problem, self.mesh, np.asarray(z, float)[: self.mesh.n - 1])

    def jacobian(self, z, steps: Optional[np.ndarray] = None) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return fd_jacobian(self.residual, z, steps=steps)


def residual_system(problem: VariationalProblem, mesh: Mesh) -> ResidualSystem:
    return ResidualSystem(
        mesh, mesh.n - 1, lambda z: assemble_residual(problem, mesh, z), problem
    )


def isoperimetric_system(
    problem: VariationalProblem, constraint: IsoperimetricConstraint, mesh: Mesh
) -> ResidualSystem:
    """Augmented system in ``(x_1..x_{n-1}, lam)`` for ``F = L + lam g``.

    The last equation is the discretized constraint.
    """
    m = mesh.n - 1

    def residual(z):
        z = np.asarray(z, dtype=float)
        if z.shape != (m + 1,):
            raise ValueError(f"expected {m + 1} unknowns, got shape {z.shape}")
        interior, lam = z[:m], z[m]
        r = assemble_residual(problem.with_constraint(constraint, lam), mesh, interior)
        c = assemble_constraint_residual(
            constraint, mesh, full_samples(problem, mesh, interior), problem.alpha
        )
        return np.append(r, c)

    return ResidualSystem(mesh, m + 1, residual, problem, constraint)
