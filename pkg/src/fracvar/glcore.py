"""Grünwald-Letnikov weights and discrete fractional derivatives on a regular mesh.

The left Riemann-Liouville derivative of order ``0 < alpha < 1`` is approximated
at mesh point ``t_i`` by the first order sum

    D x(t_i) ~ h**(-alpha) * sum_{k=0}^{i} w_k x(t_i - k h),

with ``w_k = (-1)**k * binom(alpha, k)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "FractionalOrder",
    "GLWeights",
    "Mesh",
    "GammaPoleError",
    "SingularityError",
    "gamma",
    "gl_weights",
    "gl_weights_direct",
    "rl_derivative_on_mesh",
    "caputo_from_rl",
]


class GammaPoleError(ValueError):
    """Raised when the gamma function is evaluated at 0 or a negative integer."""


class SingularityError(ValueError):
    """Raised when a Caputo correction is requested where it is singular."""


# Lanczos approximation, g = 7, 9 terms.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma(z: float) -> float:
    """Gamma function for real arguments.

    Uses a Lanczos approximation for ``z >= 0.5`` and the reflection formula
    below that. Small positive integers are returned exactly as factorials.
    """
    z = float(z)
    if math.isnan(z):
        raise ValueError("gamma of NaN")
    if z <= 0.0 and z == math.floor(z):
        raise GammaPoleError(f"gamma has a pole at z = {z:g}")
    if z == math.floor(z) and z <= 171.0:
        return float(math.factorial(int(z) - 1))
    if z < 0.5:
        # Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        return math.pi / (math.sin(math.pi * z) * gamma(1.0 - z))
    z -= 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * math.exp(-t) * acc


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``alpha`` of a fractional derivative, restricted to ``(0, 1)``."""

    alpha: float

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if not (0.0 < a < 1.0):
            raise ValueError(f"fractional order must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self) -> float:
        return self.alpha


AlphaLike = Union[float, FractionalOrder]


def _alpha(alpha: AlphaLike) -> float:
    if isinstance(alpha, FractionalOrder):
        return alpha.alpha
    return FractionalOrder(alpha).alpha


@dataclass(frozen=True)
class GLWeights:
    """The weights ``w[0..m]`` for one fractional order."""

    alpha: FractionalOrder
    w: np.ndarray

    @property
    def m(self) -> int:
        return len(self.w) - 1

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.w)


class _WeightCache:
    """Per-order weight sequences, grown on demand by the recurrence."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._store: dict[float, np.ndarray] = {}

    def get(self, alpha: float, m: int) -> np.ndarray:
        with self._lock:
            w = self._store.get(alpha)
            if w is None or len(w) <= m:
                w = _extend(alpha, w, max(m + 1, 2 * len(w) if w is not None else 0))
                w.setflags(write=False)
                self._store[alpha] = w
        return w[: m + 1]


def _extend(alpha: float, w: np.ndarray | None, size: int) -> np.ndarray:
    out = np.empty(size)
    start = 0 if w is None else len(w)
    if start:
        out[:start] = w
    else:
        out[0] = 1.0
        start = 1
    for k in range(start, size):
        out[k] = out[k - 1] * (1.0 - (alpha + 1.0) / k)
    return out


_cache = _WeightCache()


def gl_weights(alpha: AlphaLike, m: int) -> GLWeights:
    """Return ``w[0..m]`` from ``w[0] = 1``, ``w[k] = w[k-1] (1 - (alpha+1)/k)``."""
    if m < 0:
        raise ValueError(f"m must be nonnegative, got {m}")
    a = _alpha(alpha)
    return GLWeights(FractionalOrder(a), _cache.get(a, int(m)))


def gl_weights_direct(alpha: AlphaLike, k: int) -> float:
    """Single weight from the gamma quotient ``(-1)^k G(a+1) / (G(a-k+1) k!)``.

    Only usable for moderate ``k``; kept as an independent check on the recurrence.
    """
    a = _alpha(alpha)
    return (-1.0) ** k * gamma(a + 1.0) / (gamma(a - k + 1.0) * math.factorial(k))


@dataclass(frozen=True)
class Mesh:
    """Regular grid ``t_i = a + i h``, ``i = 0..n``, on ``[a, b]``."""

    a: float
    b: float
    n: int
    t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.b > self.a):
            raise ValueError(f"mesh needs b > a, got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"mesh needs an integer n >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        t = self.a + np.arange(self.n + 1) * self.h
        t[0] = self.a
        t[-1] = self.b
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    def __len__(self) -> int:
        return self.n + 1


def rl_derivative_on_mesh(samples: Sequence[float], alpha: AlphaLike, mesh: Mesh) -> np.ndarray:
    """Discrete left Riemann-Liouville derivative ``d_0..d_n`` of mesh samples.

    ``d_0 = x_0 / h**alpha``; the continuum derivative may be singular at ``a``.
    """
    x = np.asarray(samples, dtype=float)
    if x.shape != (mesh.n + 1,):
        raise ValueError(f"expected {mesh.n + 1} samples, got shape {x.shape}")
    a = _alpha(alpha)
    w = gl_weights(a, mesh.n).w
    return np.convolve(w, x)[: mesh.n + 1] / mesh.h**a


def caputo_from_rl(
    rl_values: Sequence[float],
    x_a: float,
    alpha: AlphaLike,
    mesh: Mesh,
    include_left: bool = False,
) -> np.ndarray:
    """Caputo derivative from Riemann-Liouville values.

    ``c_i = rl_i - x_a (t_i - a)**(-alpha) / Gamma(1 - alpha)`` for ``i = 1..n``.
    With ``include_left`` the result has ``n + 1`` entries and index 0 is
    returned as ``rl_0``, which is only defined when ``x_a == 0``.
    """
    rl = np.asarray(rl_values, dtype=float)
    if rl.shape != (mesh.n + 1,):
        raise ValueError(f"expected {mesh.n + 1} values, got shape {rl.shape}")
    a = _alpha(alpha)
    corr = x_a / gamma(1.0 - a) * (mesh.t[1:] - mesh.a) ** (-a)
    interior = rl[1:] - corr
    if not include_left:
        return interior
    if x_a != 0.0:
        raise SingularityError("Caputo correction is singular at t = a when x(a) != 0")
    return np.concatenate(([rl[0]], interior))
