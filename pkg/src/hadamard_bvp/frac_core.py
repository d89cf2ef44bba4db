"""Hadamard fractional left integral/derivative and the log-coordinate map.

The Hadamard operators on (a, b) are Riemann-Liouville operators in the
coordinate s = ln(t/a): the kernel ln(t/tau) becomes s_t - sigma, the
measure dtau/tau becomes dsigma, and the scaled derivative t*d/dt becomes
d/ds.  All numerics below work in s; callers supply functions of t.

The fractional integral of order mu > 0:

    (1/Gamma(mu)) * integral_a^t (ln(t/tau))^(mu-1) x(tau) dtau/tau

and the fractional derivative of order mu in (n-1, n), n = ceil(mu):

    (1/Gamma(n-mu)) * (t d/dt)^n integral_a^t (ln(t/tau))^(n-mu-1)
                                                x(tau) dtau/tau.

The derivative definition additionally requires t^(n-1) x^(n-1)(t) to be
absolutely continuous on [a, inf); that is a caller obligation this module
cannot check.  The outer (t d/dt)^n is realized as d^n/ds^n with a central
finite-difference stencil, so x must be smooth on a neighbourhood
[a, t*exp(3h)] of the evaluation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .quadrature import (
    DEFAULT_CONFIG,
    JACOBI_SIZES,
    QuadratureConfig,
    QuadratureResult,
    gauss_jacobi_apply,
    integrate_right_weighted,
    tanh_sinh_segment,
)

__all__ = [
    "Interval",
    "Order",
    "LogCoord",
    "DomainError",
    "ConvergenceError",
    "pow0",
    "hadamard_integral",
    "hadamard_derivative",
    "homogeneous_basis",
]

# Points closer to a than this fraction of L give the difference stencil no
# room; the derivative refuses them.
_MIN_S_FRACTION = 1e-6

# Stencil half-width factor: node step h = _H_FRACTION * s_t keeps the
# 7-point stencil inside (0, 1.15*s_t) and balances truncation O(h^4)
# against quadrature noise amplified by 1/h^n.
_H_FRACTION = 0.05

_STENCIL_OFFSETS = np.arange(-3, 4, dtype=float)


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""


class ConvergenceError(RuntimeError):
    """Quadrature failed to converge; carries the achieved result."""

    def __init__(self, message: str, result: QuadratureResult):
        super().__init__(f"{message} (achieved error estimate {result.error_estimate:.3e})")
        self.result = result


@dataclass(frozen=True)
class Interval:
    """Problem interval (a, b) with 0 < a < b < inf."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (0.0 < self.a < self.b < math.inf):
            raise DomainError(f"interval requires 0 < a < b < inf, got a={self.a}, b={self.b}")
        if not math.isfinite(self.length) or self.length <= 0.0:
            raise DomainError("ln(b/a) must be positive and finite")

    @property
    def length(self) -> float:
        """L = ln(b/a), the interval length in log-coordinates."""
        return math.log(self.b / self.a)

    def to_log(self, t):
        """s = ln(t/a) for t in [a, b] (vectorized)."""
        return np.log(np.asarray(t, dtype=float) / self.a)

    def from_log(self, s):
        """t = a*exp(s) for s in [0, L] (vectorized)."""
        return self.a * np.exp(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Order:
    """Fractional order.  Any mu > 0 for the bare operators; the boundary
    value problem itself needs mu in (2, 3)."""

    mu: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise DomainError(f"order must be positive and finite, got {self.mu}")

    @property
    def n(self) -> int:
        return math.ceil(self.mu)

    @property
    def is_bvp_order(self) -> bool:
        return 2.0 < self.mu < 3.0

    def require_bvp(self) -> "Order":
        if not self.is_bvp_order:
            raise DomainError(f"boundary value problem requires order in (2, 3), got {self.mu}")
        return self


@dataclass(frozen=True)
class LogCoord:
    """A point expressed as s = ln(t/a) on a given interval."""

    s: float
    interval: Interval

    def __post_init__(self) -> None:
        if not (-1e-12 <= self.s <= self.interval.length * (1.0 + 1e-12)):
            raise DomainError(f"s={self.s} outside [0, {self.interval.length}]")

    @classmethod
    def from_t(cls, t: float, interval: Interval) -> "LogCoord":
        return cls(math.log(t / interval.a), interval)

    @property
    def t(self) -> float:
        return self.interval.a * math.exp(self.s)


def pow0(base, p: float):
    """base**p with the closure 0**p := 0 for p > 0, inf for p < 0.

    Plain powers of an exact zero raise spurious NaN/inf warnings on the
    0**negative path; every kernel here has base >= 0, so the limit values
    are the right ones.
    """
    base = np.asarray(base, dtype=float)
    with np.errstate(all="ignore"):
        out = np.power(base, p)
    if p < 0.0:
        out = np.where(base == 0.0, math.inf, out)
    elif p > 0.0:
        out = np.where(base == 0.0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def _kernel_integral(
    x: Callable[[np.ndarray], np.ndarray],
    expo: float,
    s: float,
    a: float,
    quad: QuadratureConfig,
    strict: bool,
    what: str,
) -> tuple[float, int, int]:
    """integral_0^s (s - sigma)^expo x(a*exp(sigma)) dsigma.

    Split at s/2: tanh-sinh on the left half, where the kernel is regular
    and any integrable behaviour of x near sigma = 0 is absorbed by the
    node map; Gauss-Jacobi on the right half, where the kernel exponent
    (possibly in (-1, 0)) is absorbed analytically by the weight.  The
    kernel is never sampled at sigma = s.  Returns the value together
    with the tanh-sinh level and Jacobi rule size that resolved it.
    """
    mid = 0.5 * s

    def left(sigma, dlo, dhi):
        return (mid + dhi) ** expo * x(a * np.exp(sigma))

    res_l = tanh_sinh_segment(left, 0.0, mid, quad)
    res_r = integrate_right_weighted(
        lambda sigma: x(a * np.exp(sigma)), mid, s, expo, quad
    )
    if strict:
        for res in (res_l, res_r):
            if not res.converged:
                raise ConvergenceError(f"{what} quadrature did not converge", res)
    n_jacobi = JACOBI_SIZES[min(res_r.levels_used, len(JACOBI_SIZES) - 1)]
    return res_l.value + res_r.value, res_l.levels_used, n_jacobi


def _kernel_integral_fixed(
    x: Callable[[np.ndarray], np.ndarray],
    expo: float,
    s: float,
    a: float,
    ts_level: int,
    n_jacobi: int,
) -> float:
    """_kernel_integral at a fixed resolution (no adaptivity).

    Running every stencil point of the outer difference operator at one
    resolution makes the residual quadrature error vary smoothly with s,
    so the difference stencil cancels it instead of amplifying it.
    """
    mid = 0.5 * s

    def left(sigma, dlo, dhi):
        return (mid + dhi) ** expo * x(a * np.exp(sigma))

    forced = QuadratureConfig(rel_tol=1e-300, abs_tol=1e-300, max_levels=ts_level)
    res_l = tanh_sinh_segment(left, 0.0, mid, forced)
    right = gauss_jacobi_apply(lambda sigma: x(a * np.exp(sigma)), mid, s, expo, n_jacobi)
    return res_l.value + right


def hadamard_integral(
    x: Callable[[np.ndarray], np.ndarray],
    mu: Order,
    t: float,
    interval: Interval,
    quad: QuadratureConfig = DEFAULT_CONFIG,
    strict: bool = True,
) -> float:
    """Left Hadamard integral of ``x`` of order mu, evaluated at t.

    ``x`` must accept numpy arrays of points in [a, t].  Returns 0 at
    t = a (empty range).  With strict=True a non-converged quadrature
    raises ConvergenceError; otherwise the best value is returned.
    """
    if t < interval.a:
        raise DomainError(f"t={t} below left endpoint {interval.a}")
    s_t = math.log(t / interval.a)
    if s_t == 0.0:
        return 0.0
    value, _, _ = _kernel_integral(
        x, mu.mu - 1.0, s_t, interval.a, quad, strict, "hadamard_integral"
    )
    return value / math.gamma(mu.mu)


def _stencil(n: int) -> np.ndarray:
    """Coefficients c with sum c_j f(s + o_j h) ~ h^n f^(n)(s) on 7 points."""
    m = _STENCIL_OFFSETS.size
    rows = np.vstack([_STENCIL_OFFSETS**i for i in range(m)])
    rhs = np.zeros(m)
    rhs[n] = math.factorial(n)
    return np.linalg.solve(rows, rhs)


def hadamard_derivative(
    x: Callable[[np.ndarray], np.ndarray],
    mu: Order,
    t: float,
    interval: Interval,
    quad: QuadratureConfig = DEFAULT_CONFIG,
    h: float | None = None,
    s_max: float | None = None,
    strict: bool = True,
) -> float:
    """Left Hadamard derivative of ``x`` of order mu at t > a.

    The outer operator is d^n/ds^n in s = ln(t/a), applied to the inner
    fractional integral of order n - mu with a 7-point central stencil of
    step ``h`` (default 0.05*ln(t/a), capped so the stencil stays below
    ``s_max`` when given).  ``x`` is sampled on [a, t*exp(3h)].
    """
    n = mu.n
    nu = n - mu.mu
    if nu == 0.0:
        raise DomainError(f"integer order {mu.mu} is not a fractional derivative")
    s_t = math.log(t / interval.a)
    if s_t < _MIN_S_FRACTION * interval.length:
        raise DomainError(
            f"t={t} too close to the left endpoint for the difference stencil"
        )
    if h is None:
        h = _H_FRACTION * s_t
        if s_max is not None:
            h = min(h, (s_max - s_t) / 3.125)
    if h <= 0.0 or s_t - 3.0 * h <= 0.0:
        raise DomainError(f"stencil step h={h} leaves no room at s={s_t}")
    a = interval.a
    gamma_nu = math.gamma(nu)
    # Probe the centre point adaptively to pick the resolution (and to
    # surface convergence failures), then evaluate the whole stencil at
    # that resolution plus one refinement of margin.
    _, ts_level, n_jacobi = _kernel_integral(
        x, nu - 1.0, s_t, a, quad, strict, "hadamard_derivative"
    )
    ts_level = min(ts_level + 1, quad.max_levels)
    coeffs = _stencil(n)
    samples = np.array(
        [
            _kernel_integral_fixed(x, nu - 1.0, s_t + o * h, a, ts_level, n_jacobi)
            / gamma_nu
            for o in _STENCIL_OFFSETS
        ]
    )
    return float(np.dot(coeffs, samples)) / h**n


def homogeneous_basis(mu: Order, interval: Interval) -> Sequence[Callable]:
    """The three functions (ln(t/a))^(mu-k), k = 1, 2, 3, spanning the
    kernel of the derivative of order mu in (2, 3).

    k = 1, 2 vanish at t = a; k = 3 has a negative exponent and diverges
    there (pow0 returns inf).
    """
    mu.require_bvp()
    a = interval.a

    def make(k: int) -> Callable:
        p = mu.mu - k

        def basis(t):
            return pow0(np.log(np.asarray(t, dtype=float) / a), p)

        return basis

    return [make(k) for k in (1, 2, 3)]
