"""Problem statements for fractional variational problems.

A Lagrangian is written ``L(t, x, d)`` where ``d`` stands for the value of the
left Riemann-Liouville derivative of ``x`` at ``t``. All callbacks receive numpy
arrays of equal shape and must act elementwise (plain arithmetic and numpy
ufuncs do); they must be pure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .glcore import AlphaLike, FractionalOrder, gamma

__all__ = [
    "Integrand",
    "VariationalProblem",
    "IsoperimetricConstraint",
    "ExactSolution",
    "fd_partial",
    "check_partials",
    "example_1",
    "example_2",
    "example_3",
    "builtin_example",
]

Integrand = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_CBRT_EPS = np.finfo(float).eps ** (1.0 / 3.0)


def fd_partial(f: Integrand, slot: int) -> Integrand:
    """Central finite-difference partial of ``f(t, x, d)`` in argument ``slot``.

    Step is ``(1 + |v|) * cbrt(eps)``, snapped so that ``v + step`` is exact.
    """

    def partial(t, x, d):
        args = [np.asarray(t, float), np.asarray(x, float), np.asarray(d, float)]
        v = args[slot]
        step = (1.0 + np.abs(v)) * _CBRT_EPS
        hi = v + step
        lo = v - step
        up = list(args)
        up[slot] = hi
        down = list(args)
        down[slot] = lo
        return (f(*up) - f(*down)) / (hi - lo)

    return partial


@dataclass(frozen=True)
class VariationalProblem:
    """Minimize ``int_a^b L(t, x, D^alpha x) dt`` with ``x(a) = x_a``, ``x(b) = x_b``."""

    lagrangian: Integrand
    dL_dx: Integrand
    dL_dd: Integrand
    alpha: FractionalOrder
    interval: tuple[float, float]
    boundary: tuple[float, float]
    name: str = "custom"

    def __post_init__(self) -> None:
        if not isinstance(self.alpha, FractionalOrder):
            object.__setattr__(self, "alpha", FractionalOrder(self.alpha))
        a, b = (float(v) for v in self.interval)
        if not b > a:
            raise ValueError(f"interval must satisfy a < b, got {self.interval}")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "boundary", tuple(float(v) for v in self.boundary))

    @classmethod
    def from_lagrangian(
        cls,
        lagrangian: Integrand,
        alpha: AlphaLike,
        interval: tuple[float, float],
        boundary: tuple[float, float],
        name: str = "custom",
    ) -> "VariationalProblem":
        """Build a problem whose partials are central finite differences of ``L``."""
        return cls(
            lagrangian,
            fd_partial(lagrangian, 1),
            fd_partial(lagrangian, 2),
            FractionalOrder(float(alpha)),
            interval,
            boundary,
            name,
        )

    def with_constraint(self, constraint: "IsoperimetricConstraint", lam: float) -> "VariationalProblem":
        """Auxiliary problem with ``F = L + lam * g`` (normal case, multiplier of ``L`` is 1)."""
        L, Lx, Ld = self.lagrangian, self.dL_dx, self.dL_dd
        g, gx, gd = constraint.integrand, constraint.dg_dx, constraint.dg_dd
        lam = float(lam)
        return replace(
            self,
            lagrangian=lambda t, x, d: L(t, x, d) + lam * g(t, x, d),
            dL_dx=lambda t, x, d: Lx(t, x, d) + lam * gx(t, x, d),
            dL_dd=lambda t, x, d: Ld(t, x, d) + lam * gd(t, x, d),
            name=f"{self.name}+lambda*g",
        )


@dataclass(frozen=True)
class IsoperimetricConstraint:
    """Integral constraint ``int_a^b g(t, x, D^alpha x) dt = K``."""

    integrand: Integrand
    dg_dx: Integrand
    dg_dd: Integrand
    K: float

    @classmethod
    def from_integrand(cls, integrand: Integrand, K: float) -> "IsoperimetricConstraint":
        return cls(integrand, fd_partial(integrand, 1), fd_partial(integrand, 2), float(K))


@dataclass(frozen=True)
class ExactSolution:
    x_exact: Callable[[np.ndarray], np.ndarray]
    description: str

    def __call__(self, t):
        return self.x_exact(np.asarray(t, dtype=float))


def check_partials(
    f: Integrand,
    df_dx: Integrand,
    df_dd: Integrand,
    interval: tuple[float, float],
    rng: np.random.Generator,
    n_probes: int = 100,
    rtol: float = 1e-5,
    spread: float = 2.0,
) -> float:
    """Worst relative mismatch between coded partials and finite differences.

    Probes ``t`` uniformly in ``interval`` and ``x, d`` uniformly in
    ``[-spread, spread]``. Raises ``AssertionError`` above ``rtol``.
    """
    a, b = interval
    t = rng.uniform(a, b, n_probes)
    x = rng.uniform(-spread, spread, n_probes)
    d = rng.uniform(-spread, spread, n_probes)
    worst = 0.0
    for coded, slot in ((df_dx, 1), (df_dd, 2)):
        exact = np.broadcast_to(np.asarray(coded(t, x, d), float), t.shape)
        approx = fd_partial(f, slot)(t, x, d)
        scale = np.maximum(np.abs(exact), 1.0)
        worst = max(worst, float(np.max(np.abs(exact - approx) / scale)))
    if worst > rtol:
        raise AssertionError(f"partials inconsistent with integrand: rel. mismatch {worst:.3e}")
    return worst


# Built-in problems. Partials are analytic.

_C1 = 2.0 / gamma(2.5)


def example_1() -> tuple[VariationalProblem, ExactSolution]:
    """``L = (d - 2 t^1.5 / G(2.5))^2`` on [0, 1], x(0) = 0, x(1) = 1; solution t^2."""

    def L(t, x, d):
        return (d - _C1 * t**1.5) ** 2

    def L_d(t, x, d):
        return 2.0 * (d - _C1 * t**1.5)

    def L_x(t, x, d):
        return np.zeros(np.broadcast(t, x, d).shape)

    problem = VariationalProblem(L, L_x, L_d, FractionalOrder(0.5), (0.0, 1.0), (0.0, 1.0), "example 1")
    return problem, ExactSolution(lambda t: t**2, "x(t) = t^2")


_C2_5 = 16.0 * gamma(6.0) / gamma(5.5)
_C2_3 = 20.0 * gamma(4.0) / gamma(3.5)
_C2_1 = 5.0 / gamma(1.5)


def _ex2_target(t):
    return _C2_5 * t**4.5 - _C2_3 * t**2.5 + _C2_1 * t**0.5


def example_2() -> tuple[VariationalProblem, ExactSolution]:
    """Quartic penalty whose minimizer is ``16 t^5 - 20 t^3 + 5 t``."""

    def L(t, x, d):
        return (d - _ex2_target(t)) ** 4

    def L_d(t, x, d):
        return 4.0 * (d - _ex2_target(t)) ** 3

    def L_x(t, x, d):
        return np.zeros(np.broadcast(t, x, d).shape)

    problem = VariationalProblem(L, L_x, L_d, FractionalOrder(0.5), (0.0, 1.0), (0.0, 1.0), "example 2")
    return problem, ExactSolution(lambda t: 16.0 * t**5 - 20.0 * t**3 + 5.0 * t, "x(t) = 16t^5 - 20t^3 + 5t")


_C3 = 16.0 / (15.0 * gamma(0.5))


def example_3() -> tuple[VariationalProblem, IsoperimetricConstraint, ExactSolution]:
    """``L = t^4 + d^2`` subject to ``int t^2 d dt = 1/5``; solution ``16 t^2.5 / (15 G(0.5))``."""

    def zeros(t, x, d):
        return np.zeros(np.broadcast(t, x, d).shape)

    problem = VariationalProblem(
        lambda t, x, d: t**4 + d**2,
        zeros,
        lambda t, x, d: 2.0 * d + zeros(t, x, d),
        FractionalOrder(0.5),
        (0.0, 1.0),
        (0.0, _C3),
        "example 3",
    )
    constraint = IsoperimetricConstraint(
        lambda t, x, d: t**2 * d,
        zeros,
        lambda t, x, d: t**2 + zeros(t, x, d),
        0.2,
    )
    return problem, constraint, ExactSolution(lambda t: _C3 * t**2.5, "x(t) = 16 t^2.5 / (15 Gamma(0.5))")


def builtin_example(
    example_id: int,
) -> tuple[VariationalProblem, Optional[IsoperimetricConstraint], ExactSolution]:
    """Uniform accessor: ``(problem, constraint or None, exact)``."""
    if example_id == 1:
        p, e = example_1()
        return p, None, e
    if example_id == 2:
        p, e = example_2()
        return p, None, e
    if example_id == 3:
        return example_3()
    raise ValueError(f"unknown example id {example_id!r}; expected 1, 2 or 3")

