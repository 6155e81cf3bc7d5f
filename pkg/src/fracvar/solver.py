"""Damped Newton solver for the discrete first-variation system."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .assembly import (
    ResidualSystem,
    assemble_constraint_residual,
    isoperimetric_system,
    residual_system,
)
from .glcore import Mesh
from .problem import IsoperimetricConstraint, VariationalProblem

__all__ = [
    "SolverOptions",
    "Solution",
    "SingularJacobianError",
    "ConvergenceError",
    "solve",
    "solve_isoperimetric",
    "solve_system",
    "newton_step",
    "is_affine",
    "initial_interior",
]

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class SingularJacobianError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, solution: "Solution"):
        super().__init__(
            f"no convergence after {solution.iterations} iterations "
            f"(residual {solution.final_residual_norm:.3e})"
        )
        self.solution = solution


@dataclass
class SolverOptions:
    tol_residual: float = 1e-10
    max_iterations: int = 100
    damping: bool = True
    halving: float = 0.5
    max_halvings: int = 30
    # "linear" interpolates the boundary data; an array is used as-is
    initial_guess: Union[str, np.ndarray] = "linear"
    initial_lambda: float = 0.0
    # probe for an affine residual and take the exact one-shot step if so
    detect_linear: bool = True
    raise_on_failure: bool = False

    def __post_init__(self) -> None:
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 < self.halving < 1.0:
            raise ValueError("halving factor must lie in (0, 1)")
        if isinstance(self.initial_guess, str) and self.initial_guess != "linear":
            raise ValueError(f"unknown initial guess policy {self.initial_guess!r}")


@dataclass
class Solution:
    mesh: Mesh
    values: np.ndarray
    iterations: int
    final_residual_norm: float
    converged: bool
    lam: Optional[float] = None
    constraint_residual: Optional[float] = None
    linear: bool = False
    residual_history: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return self.mesh.t

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]


def initial_interior(problem: VariationalProblem, mesh: Mesh, options: SolverOptions) -> np.ndarray:
    if isinstance(options.initial_guess, str):
        xa, xb = problem.boundary
        a, b = problem.interval
        return xa + (xb - xa) * (mesh.t[1:-1] - a) / (b - a)
    x0 = np.array(options.initial_guess, dtype=float)
    if x0.shape == (mesh.n + 1,):
        x0 = x0[1:-1]
    if x0.shape != (mesh.n - 1,):
        raise ValueError(f"initial guess must have {mesh.n - 1} interior values, got shape {x0.shape}")
    return x0


def is_affine(system: ResidualSystem, rng: Optional[np.random.Generator] = None, rtol: float = 1e-9) -> bool:
    """Check ``r(u + v) - r(u) - r(v) + r(0) = 0`` at a random pair."""
    rng = np.random.default_rng(12345) if rng is None else rng
    u = rng.standard_normal(system.size)
    v = rng.standard_normal(system.size)
    z = np.zeros(system.size)
    vals = [_try_residual(system, p) for p in (u, v, u + v, z)]
    if any(r is None for r in vals):
        return False
    ru, rv, ruv, r0 = vals
    gap = np.max(np.abs(ruv - ru - rv + r0))
    scale = max(np.max(np.abs(ruv)), np.max(np.abs(ru)), np.max(np.abs(rv)), np.max(np.abs(r0)), 1.0)
    return bool(gap <= rtol * scale)


def _lu(J: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(J, check_finite=True)
    threshold = _EPS * np.linalg.norm(J, np.inf) * J.shape[0]
    if np.min(np.abs(np.diag(lu))) <= threshold:
        raise SingularJacobianError(
            f"Jacobian is numerically singular (smallest pivot {np.min(np.abs(np.diag(lu))):.3e})"
        )
    return lu, piv


def newton_step(system: ResidualSystem, z, linear: bool = False) -> np.ndarray:
    """Newton correction ``J(z)^{-1} r(z)`` (subtract it from ``z``).

    For an affine residual the Jacobian columns are taken with unit steps,
    which is exact up to rounding.
    """
    z = np.asarray(z, dtype=float)
    r = system.residual(z)
    steps = np.ones_like(z) if linear else None
    J = system.jacobian(z, steps=steps)
    return scipy.linalg.lu_solve(_lu(J), r)


def _norm(r: Optional[np.ndarray]) -> float:
    if r is None:
        return np.inf
    return float(np.max(np.abs(r))) if r.size else 0.0


def _try_residual(system: ResidualSystem, z: np.ndarray) -> Optional[np.ndarray]:
    """Residual, or None when a callback leaves its domain or returns non-finite values."""
    try:
        with np.errstate(all="ignore"):
            r = system.residual(z)
    except (ValueError, ArithmeticError):
        return None
    return r if np.all(np.isfinite(r)) else None


def solve_system(system: ResidualSystem, z0: np.ndarray, options: SolverOptions) -> tuple[np.ndarray, dict]:
    """Newton iteration ``z <- z - s J^{-1} r`` with backtracking on ``s``.

    Returns the best iterate and a diagnostics dict.
    """
    linear = options.detect_linear and is_affine(system)
    z = np.array(z0, dtype=float)
    r = system.residual(z)
    norm = _norm(r)
    history = [norm]
    step_norms: list[float] = []
    iterations = 0
    converged = norm <= options.tol_residual
    while not converged and iterations < options.max_iterations:
        J = system.jacobian(z, steps=np.ones_like(z) if linear else None)
        step = scipy.linalg.lu_solve(_lu(J), r)
        s = 1.0
        trial = z - step
        r_trial = _try_residual(system, trial)
        halvings = 0
        if options.damping:
            while not (_norm(r_trial) < norm) and halvings < options.max_halvings:
                s *= options.halving
                halvings += 1
                trial = z - s * step
                r_trial = _try_residual(system, trial)
            if not (_norm(r_trial) < norm):
                log.debug("line search failed at iteration %d (residual %.3e)", iterations, norm)
                break
        elif r_trial is None:
            log.debug("full Newton step left the domain at iteration %d", iterations)
            break
        iterations += 1
        z, r = trial, r_trial
        norm = _norm(r)
        history.append(norm)
        step_norms.append(float(s * np.linalg.norm(step)))
        log.debug("iteration %d: residual %.3e, step scale %g", iterations, norm, s)
        converged = norm <= options.tol_residual
    info = dict(
        iterations=iterations,
        final_residual_norm=norm,
        converged=bool(converged),
        linear=linear,
        residual_history=history,
        step_norms=step_norms,
    )
    return z, info


def _finish(solution: Solution, options: SolverOptions) -> Solution:
    if not solution.converged:
        log.warning(
            "solver did not converge: %d iterations, residual %.3e",
            solution.iterations,
            solution.final_residual_norm,
        )
        if options.raise_on_failure:
            raise ConvergenceError(solution)
    return solution


def solve(problem: VariationalProblem, n: int, options: Optional[SolverOptions] = None) -> Solution:
    """Solve the hat-tested first-variation system on an ``n``-interval mesh."""
    options = options or SolverOptions()
    mesh = Mesh(*problem.interval, n)
    system = residual_system(problem, mesh)
    z, info = solve_system(system, initial_interior(problem, mesh, options), options)
    return _finish(Solution(mesh, system.samples(z), **info), options)


def solve_isoperimetric(
    problem: VariationalProblem,
    constraint: IsoperimetricConstraint,
    n: int,
    options: Optional[SolverOptions] = None,
) -> Solution:
    """Solve for the trajectory and multiplier of ``F = L + lam g`` plus the constraint."""
    options = options or SolverOptions()
    mesh = Mesh(*problem.interval, n)
    system = isoperimetric_system(problem, constraint, mesh)
    z0 = np.append(initial_interior(problem, mesh, options), options.initial_lambda)
    z, info = solve_system(system, z0, options)
    values = system.samples(z)
    sol = Solution(
        mesh,
        values,
        lam=float(z[-1]),
        constraint_residual=assemble_constraint_residual(constraint, mesh, values, problem.alpha),
        **info,
    )
    return _finish(sol, options)
