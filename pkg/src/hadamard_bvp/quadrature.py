"""Tanh-sinh quadrature for endpoint-singular integrands on a finite segment.

Every integral in this package is, after the substitution s = ln(tau/a), an
ordinary integral over a segment [0, L] (or a sub-segment split at a kink)
whose integrand is a product of powers of the distances to the segment
endpoints.  A double-exponential (tanh-sinh) node transformation handles
algebraic endpoint singularities with exponents in (-1, 0) at geometric
convergence, provided the integrand is evaluated with *accurate* endpoint
distances.  The core therefore calls integrands with the signature

    fun(x, dlo, dhi) -> array

where ``dlo = x - lo`` and ``dhi = hi - x`` are computed directly from the
node map (no cancellation), and vectorizes over numpy arrays.

Because the node map cannot place samples closer to an endpoint than a
fixed fraction of the segment (doubles cannot represent the offsets an
integrand evaluated in tau-space would need), the mass between the deepest
sample and the endpoint is estimated by fitting the local algebraic decay
rate and extrapolating.  The fit feeds both a correction to the value and
an uncertainty term in the error estimate; integrands that decay too
slowly to be integrable (exponent <= -1) are reported as non-converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "QuadratureConfig",
    "QuadratureResult",
    "QuadratureError",
    "DEFAULT_CONFIG",
    "tanh_sinh_segment",
    "integrate_log_measure",
    "integrate_plain",
    "gauss_jacobi",
    "integrate_right_weighted",
]

# Outermost node sits at this fraction of the segment length from either
# endpoint.  1e-14 keeps tau = a*exp(s) strictly inside (a, b) in doubles
# while leaving the extrapolated tail small enough to correct.
_EDGE_FRACTION = 1e-14
_Z_MAX = 0.5 * math.log(1.0 / _EDGE_FRACTION)
_U_MAX = math.asinh(2.0 * _Z_MAX / math.pi)

# Window (in endpoint-distance fractions) used for the tail-decay fit.
# Below 1e-11 integrands evaluated through tau-space become too noisy to
# fit; above 1e-5 the local power law is contaminated by the smooth part.
_FIT_LO = 1e-11
_FIT_HI = 1e-5
_FIT_MIN_POINTS = 4

# Exponents at or below -1 + _DIVERGENCE_MARGIN are flagged non-integrable.
_DIVERGENCE_MARGIN = 5e-3

# Relative-uncertainty floor assigned to any extrapolated tail mass: the
# tail is inferred, not computed, so it never counts as better than this.
# The fit scatter term dominates whenever the integrand is not an exact
# power law across the fit window.
_TAIL_UNCERTAINTY_FLOOR = 1e-6


@dataclass(frozen=True)
class QuadratureConfig:
    """Stopping tolerances for the adaptive level refinement."""

    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_levels: int = 12

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    levels_used: int
    converged: bool


class QuadratureError(RuntimeError):
    """Hard failure: non-finite sample at an interior node."""

    def __init__(self, message: str, where: Optional[float] = None):
        super().__init__(message)
        self.where = where


DEFAULT_CONFIG = QuadratureConfig()

# Per-level node tables, shared read-only: (phi, psi, wfrac) with
# phi = dlo/D, psi = dhi/D and wfrac the Jacobian factor pi*cosh(u)*phi*psi.
_LEVEL_TABLES: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _tables(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cached = _LEVEL_TABLES.get(level)
    if cached is not None:
        return cached
    h = 2.0 ** (1 - level)
    k_max = int(math.floor(_U_MAX / h))
    u = h * np.arange(-k_max, k_max + 1, dtype=float)
    z = 0.5 * math.pi * np.sinh(u)
    phi = 1.0 / (1.0 + np.exp(-2.0 * z))
    psi = 1.0 / (1.0 + np.exp(2.0 * z))
    wfrac = math.pi * np.cosh(u) * phi * psi
    _LEVEL_TABLES[level] = (phi, psi, wfrac)
    return phi, psi, wfrac


def _fit_tail(
    dfrac: np.ndarray, g: np.ndarray, length: float, edge_frac: float
) -> tuple[float, float, Optional[float]]:
    """Extrapolate integrand mass between the deepest sample and the endpoint.

    Fits ln|g| against ln(distance) on the fit window and integrates the
    fitted power law over [0, edge].  Returns (correction, uncertainty,
    fitted_exponent); the exponent is None when no usable fit exists, in
    which case correction is 0 and uncertainty is a crude edge-sample bound.
    """
    sel = (dfrac >= _FIT_LO) & (dfrac <= _FIT_HI)
    crude = 0.0
    if dfrac.size:
        i_edge = int(np.argmin(dfrac))
        crude = 3.0 * abs(g[i_edge]) * dfrac[i_edge] * length
    if np.count_nonzero(sel) < _FIT_MIN_POINTS:
        return 0.0, crude, None
    gw = g[sel]
    if np.all(gw == 0.0):
        return 0.0, 0.0, None
    if np.any(gw == 0.0) or np.any(np.sign(gw) != np.sign(gw[0])):
        return 0.0, crude, None
    ln_d = np.log(dfrac[sel] * length)
    ln_g = np.log(np.abs(gw))
    n = ln_d.size
    a = np.vstack([ln_d, np.ones(n)]).T
    coef, *_ = np.linalg.lstsq(a, ln_g, rcond=None)
    q, ln_c = float(coef[0]), float(coef[1])
    resid = ln_g - a @ coef
    scatter = float(np.sqrt(np.mean(resid**2)))
    if q <= -1.0 + _DIVERGENCE_MARGIN:
        return 0.0, math.inf, q
    edge = edge_frac * length
    sign = math.copysign(1.0, gw[0])
    try:
        tail = sign * math.exp(ln_c) * edge ** (q + 1.0) / (q + 1.0)
    except OverflowError:
        return 0.0, math.inf, q
    uncertainty = abs(tail) * max(4.0 * scatter, _TAIL_UNCERTAINTY_FLOOR)
    return tail, uncertainty, q


def tanh_sinh_segment(
    fun: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> QuadratureResult:
    """Integrate ``fun`` over [lo, hi] with endpoint-distance arguments.

    ``fun(x, dlo, dhi)`` must accept numpy arrays and may be singular at
    either endpoint (integrable algebraic singularities); it is never
    called with dlo == 0 or dhi == 0.
    """
    if not hi > lo:
        raise ValueError(f"empty or inverted segment [{lo}, {hi}]")
    length = hi - lo
    corrected_prev: Optional[float] = None
    estimate = math.inf
    corrected = 0.0
    level = 0
    for level in range(1, cfg.max_levels + 1):
        phi, psi, wfrac = _tables(level)
        h = 2.0 ** (1 - level)
        dlo = length * phi
        dhi = length * psi
        x = np.where(phi <= 0.5, lo + dlo, hi - dhi)
        with np.errstate(all="ignore"):
            g = np.asarray(fun(x, dlo, dhi), dtype=float)
        bad = ~np.isfinite(g)
        if np.any(bad):
            where = float(x[np.argmax(bad)])
            raise QuadratureError(
                f"integrand returned a non-finite value at x={where!r}", where
            )
        value = h * length * float(np.dot(wfrac, g))
        # Truncated-trapezoid boundary term (Euler-Maclaurin): without it
        # the sum overcounts half a node weight at each cap, which is the
        # dominant error for slowly decaying endpoint exponents.
        value -= 0.5 * h * length * (wfrac[0] * g[0] + wfrac[-1] * g[-1])
        # Tail mass past the outermost nodes, per side.
        edge_frac = float(min(phi[0], psi[-1]))
        corr_l, unc_l, _ = _fit_tail(phi, g, length, edge_frac)
        corr_r, unc_r, _ = _fit_tail(psi, g, length, edge_frac)
        uncertainty = unc_l + unc_r
        corrected = value + corr_l + corr_r
        if math.isinf(uncertainty):
            # Fitted decay is non-integrable; refining cannot help.
            return QuadratureResult(corrected, math.inf, level, False)
        if corrected_prev is not None:
            estimate = abs(corrected - corrected_prev) + uncertainty
            if level >= 3:
                tol = max(cfg.rel_tol * abs(corrected), cfg.abs_tol)
                if estimate <= tol:
                    return QuadratureResult(corrected, estimate, level, True)
        corrected_prev = corrected
    return QuadratureResult(corrected, estimate, level, False)


def _segment_estimates(
    fun: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    levels: range,
) -> list[float]:
    """Error estimates of successive refinement levels (diagnostic hook)."""
    length = hi - lo
    estimates = []
    prev = None
    for level in levels:
        phi, psi, wfrac = _tables(level)
        h = 2.0 ** (1 - level)
        dlo = length * phi
        dhi = length * psi
        x = np.where(phi <= 0.5, lo + dlo, hi - dhi)
        with np.errstate(all="ignore"):
            g = np.asarray(fun(x, dlo, dhi), dtype=float)
        value = h * length * float(np.dot(wfrac, g))
        if prev is not None:
            estimates.append(abs(value - prev))
        prev = value
    return estimates


_JACOBI_CACHE: dict[tuple[int, float, float], tuple[np.ndarray, np.ndarray]] = {}

#: Rule sizes tried, in order, by integrate_right_weighted.
JACOBI_SIZES = (8, 16, 32, 64, 128, 256, 512)


def gauss_jacobi(n: int, alpha: float, beta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for the weight (1-x)^alpha (1+x)^beta on [-1, 1].

    Golub-Welsch on the symmetric Jacobi recurrence matrix; requires
    alpha, beta > -1.  Results are cached and shared read-only.
    """
    key = (n, alpha, beta)
    cached = _JACOBI_CACHE.get(key)
    if cached is not None:
        return cached
    if not (alpha > -1.0 and beta > -1.0):
        raise ValueError("gauss_jacobi requires alpha, beta > -1")
    apb = alpha + beta
    k = np.arange(1, n, dtype=float)
    diag = np.empty(n)
    diag[0] = (beta - alpha) / (apb + 2.0)
    denom = (2.0 * k + apb) * (2.0 * k + apb + 2.0)
    diag[1:] = (beta**2 - alpha**2) / denom
    off_sq = (
        4.0 * k * (k + alpha) * (k + beta) * (k + apb)
        / ((2.0 * k + apb) ** 2 * (2.0 * k + apb + 1.0) * (2.0 * k + apb - 1.0))
    )
    jac = np.diag(diag) + np.diag(np.sqrt(off_sq), 1) + np.diag(np.sqrt(off_sq), -1)
    nodes, vecs = np.linalg.eigh(jac)
    mu0 = (
        2.0 ** (apb + 1.0)
        * math.gamma(alpha + 1.0)
        * math.gamma(beta + 1.0)
        / math.gamma(apb + 2.0)
    )
    weights = mu0 * vecs[0, :] ** 2
    _JACOBI_CACHE[key] = (nodes, weights)
    return nodes, weights


def gauss_jacobi_apply(
    f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, alpha: float, n: int
) -> float:
    """Single fixed-size Gauss-Jacobi application of integrate_right_weighted."""
    half = 0.5 * (hi - lo)
    nodes, weights = gauss_jacobi(n, alpha)
    sigma = lo + half * (nodes + 1.0)
    with np.errstate(all="ignore"):
        fv = np.asarray(f(sigma), dtype=float)
    if not np.all(np.isfinite(fv)):
        where = float(sigma[np.argmax(~np.isfinite(fv))])
        raise QuadratureError(
            f"integrand returned a non-finite value at x={where!r}", where
        )
    return half ** (alpha + 1.0) * float(np.dot(weights, fv))


def integrate_right_weighted(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    alpha: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> QuadratureResult:
    """Integral of (hi - sigma)^alpha * f(sigma) over [lo, hi].

    The algebraic factor at the right endpoint is absorbed analytically by
    a Gauss-Jacobi rule, so ``f`` only needs to be smooth on [lo, hi]; the
    rule size is doubled until two consecutive sizes agree; ``levels_used``
    of the result indexes into JACOBI_SIZES.
    """
    if not hi > lo:
        raise ValueError(f"empty or inverted segment [{lo}, {hi}]")
    prev = None
    value = 0.0
    estimate = math.inf
    for i, n in enumerate(JACOBI_SIZES):
        value = gauss_jacobi_apply(f, lo, hi, alpha, n)
        if prev is not None:
            estimate = abs(value - prev)
            if estimate <= max(cfg.rel_tol * abs(value), cfg.abs_tol):
                return QuadratureResult(value, estimate, i + 1, True)
        prev = value
    return QuadratureResult(value, estimate, len(JACOBI_SIZES), False)


def integrate_log_measure(
    g: Callable[[np.ndarray], np.ndarray],
    interval,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> QuadratureResult:
    """Integral of g(tau) dtau/tau over (a, b).

    Computed as the plain integral of g(a*exp(s)) over s in (0, L); the
    measure dtau/tau is the pushforward of ds.  ``g`` must accept numpy
    arrays and may blow up at the endpoints as long as the singularity is
    integrable in s (algebraic exponent > -1).
    """
    a = interval.a
    fun = lambda s, dlo, dhi: g(a * np.exp(s))
    return tanh_sinh_segment(fun, 0.0, interval.length, cfg)


def integrate_plain(
    g: Callable[[np.ndarray], np.ndarray],
    interval,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
) -> QuadratureResult:
    """Integral of g(t) dt over (a, b), via g(tau)*tau against dtau/tau."""
    return integrate_log_measure(lambda tau: g(tau) * tau, interval, cfg)
