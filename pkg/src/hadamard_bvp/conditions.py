"""Admissibility checks for the nonlinearity and selection of solver constants.

A problem D^mu x + f(t, x) = 0 with x(a) = a x'(a) = x(b) = 0 is treated
as solvable when three conditions hold:

  integrability (a1)
      integral_a^b f(t, c*w(t)) dt < inf for c > 0.  Machine-checked at
      finitely many probe constants c: this is a sampling-based verdict,
      not a proof over all c.

  shape (a2)
      f maps (a,b) x (0,inf) to (0,inf) and there is an anchor point
      (vartheta, rho) with f(vartheta, rho) <= f(t, rho) <= f(t, x) for
      all (t, x); moreover f(t, .) is non-increasing on (0, rho).
      Checked on sample grids; the first counterexample is reported.

  threshold (a3)
      sup over kappa in (0, rho) of

          phi(kappa) = kappa / integral_a^b v(t) f(t, kappa*w(t)) dt/t

      exceeds 1/(Gamma(mu) * L).  When it does, the supremum location
      fixes the a-priori radius R, a margin epsilon is chosen with
      phi(R - epsilon) >= threshold, and the regularization start index
      n0 satisfies 1/n0 < epsilon.

u, v, w are the kernel envelopes from the greens module.  For families
f = lambda * g with a multiplicative parameter, phi scales as 1/lambda,
so the largest admissible lambda has the closed form
lambda_max = Gamma(mu) * L * sup_kappa kappa / integral v g(t, kappa w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import ExprAst, ExprEvalError, as_function, free_parameters, to_string
from .frac_core import ConvergenceError, DomainError, Interval, Order
from .greens import GreensParams
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, tanh_sinh_segment

__all__ = [
    "Problem",
    "A1Report",
    "A2Report",
    "A3Report",
    "ConditionReport",
    "UnsupportedStructureError",
    "check_a1",
    "check_a2",
    "phi",
    "check_a3_and_select",
    "lambda_max",
    "check_problem",
    "locate_anchor",
    "A1_DEFAULT_CONFIG",
]

# The a1 integrands inherit f's endpoint singularities undamped, and f is
# evaluated through t-space doubles, so their achievable accuracy is a few
# orders above machine precision.  A finiteness verdict does not need more.
A1_DEFAULT_CONFIG = QuadratureConfig(rel_tol=1e-3, abs_tol=1e-12, max_levels=12)

_DEFAULT_C_FACTORS = (0.1, 1.0, 10.0)

# Open-interval margin for the kappa search, and the dyadic epsilon ladder.
_KAPPA_MARGIN = 1e-6
_MAX_EPS_HALVINGS = 60

_REL_SLACK = 1e-12


class UnsupportedStructureError(ValueError):
    """The nonlinearity does not have the structure an operation requires."""


@dataclass(frozen=True)
class Problem:
    """A boundary value problem instance: interval, order, nonlinearity,
    and the anchor point (vartheta, rho) of the shape condition."""

    interval: Interval
    mu: Order
    f_ast: ExprAst
    params: dict = field(default_factory=dict)
    vartheta: float = math.nan
    rho: float = math.nan

    def __post_init__(self) -> None:
        self.mu.require_bvp()
        missing = free_parameters(self.f_ast) - set(self.params)
        if missing:
            raise DomainError(f"unbound parameters in f: {sorted(missing)}")
        if not (self.interval.a < self.vartheta < self.interval.b):
            raise DomainError(
                f"vartheta={self.vartheta} must lie in ({self.interval.a}, {self.interval.b})"
            )
        if not (math.isfinite(self.rho) and self.rho > 0.0):
            raise DomainError(f"rho={self.rho} must be positive")
        anchor = self.f(self.vartheta, self.rho)
        if not (math.isfinite(anchor) and anchor > 0.0):
            raise DomainError(
                f"f(vartheta, rho) = {anchor} must be finite and positive"
            )

    @cached_property
    def f(self) -> Callable:
        return as_function(self.f_ast, self.params)

    @cached_property
    def greens(self) -> GreensParams:
        return GreensParams.create(self.interval, self.mu)

    @property
    def f_anchor(self) -> float:
        """f(vartheta, rho), the uniform lower bound on f."""
        return self.f(self.vartheta, self.rho)

    def with_params(self, **updates) -> "Problem":
        return Problem(
            self.interval,
            self.mu,
            self.f_ast,
            {**self.params, **updates},
            self.vartheta,
            self.rho,
        )


def _interior(tau: np.ndarray, interval: Interval) -> np.ndarray:
    # Quadrature nodes may round onto the endpoints, where f is singular;
    # nudge them one representable step inside.
    lo = interval.a * (1.0 + 2.0**-50)
    hi = interval.b * (1.0 - 2.0**-50)
    return np.clip(tau, lo, hi)


def _w_factors(p: GreensParams, dlo, dhi) -> np.ndarray:
    """w at a node given stable distances to both endpoints in s."""
    e = p.mu.mu - 1.0
    return dlo**e * dhi / p.L**p.mu.mu


@dataclass(frozen=True)
class A1Probe:
    c: float
    value: float
    error_estimate: float
    converged: bool


@dataclass(frozen=True)
class A1Report:
    ok: bool
    probes: tuple[A1Probe, ...]
    failure: Optional[str] = None


def check_a1(
    problem: Problem,
    c_probes: Optional[Sequence[float]] = None,
    quad: QuadratureConfig = A1_DEFAULT_CONFIG,
) -> A1Report:
    """Integrate f(t, c*w(t)) dt for each probe constant c.

    The verdict is converged-for-every-probe; a NaN from f fails the
    check with a diagnostic instead of raising.
    """
    if c_probes is None:
        c_probes = tuple(f * problem.rho for f in _DEFAULT_C_FACTORS)
    p = problem.greens
    a = problem.interval.a
    probes = []
    for c in c_probes:
        if c <= 0.0:
            raise DomainError(f"probe constants must be positive, got {c}")

        def fun(s, dlo, dhi):
            tau = _interior(a * np.exp(s), problem.interval)
            return problem.f(tau, c * _w_factors(p, dlo, dhi)) * tau

        try:
            res = tanh_sinh_segment(fun, 0.0, p.L, quad)
        except ExprEvalError as err:
            return A1Report(
                False,
                tuple(probes),
                failure=f"f evaluation failed for c={c}: {err}",
            )
        probes.append(A1Probe(c, res.value, res.error_estimate, res.converged))
    return A1Report(all(pr.converged for pr in probes), tuple(probes))


@dataclass(frozen=True)
class A2Report:
    ok: bool
    anchor_minimal_in_t: bool
    rho_minimal_in_x: bool
    decreasing_below_rho: bool
    positive: bool
    f_anchor: float
    t_argmin: float
    f_min_over_t: float
    counterexample: Optional[tuple[str, float, float]] = None


def check_a2(
    problem: Problem,
    t_samples: Optional[np.ndarray] = None,
    x_samples: Optional[np.ndarray] = None,
) -> A2Report:
    """Sample the shape condition.

    Verifies, on the sample grids, that (1) the anchor value f(vartheta,
    rho) is minimal among f(t, rho), (2) x = rho minimizes f(t, .) for
    every sampled t, (3) f(t, .) is non-increasing along the sampled
    chain below rho, and (4) f is positive.  Failures are data: the
    report carries the first counterexample.
    """
    iv = problem.interval
    if t_samples is None:
        # Chebyshev-spaced in s, open at the endpoints where f blows up.
        j = np.arange(128)
        s = 0.5 * iv.length * (1.0 - np.cos(math.pi * (j + 0.5) / 128))
        t_samples = iv.from_log(s)
    if x_samples is None:
        x_samples = problem.rho * np.logspace(-3.0, 3.0, 64)
    t_samples = np.asarray(t_samples, dtype=float)
    x_samples = np.sort(np.asarray(x_samples, dtype=float))

    f = problem.f
    f_anchor = problem.f_anchor
    f_at_rho = f(t_samples, problem.rho)
    grid = f(t_samples[:, None], x_samples[None, :])

    counterexample = None
    positive = bool(np.all(grid > 0.0) and np.all(f_at_rho > 0.0))
    if not positive:
        i, j = np.unravel_index(int(np.argmin(grid)), grid.shape)
        counterexample = ("positivity", float(t_samples[i]), float(x_samples[j]))

    slack_t = f_at_rho - f_anchor
    anchor_ok = bool(np.min(slack_t) >= -_REL_SLACK * abs(f_anchor))
    if anchor_ok is False and counterexample is None:
        i = int(np.argmin(slack_t))
        counterexample = ("anchor_minimal_in_t", float(t_samples[i]), problem.rho)

    slack_x = grid - f_at_rho[:, None]
    rho_min_ok = bool(np.min(slack_x) >= -_REL_SLACK * np.max(np.abs(f_at_rho)))
    if rho_min_ok is False and counterexample is None:
        i, j = np.unravel_index(int(np.argmin(slack_x)), slack_x.shape)
        counterexample = ("rho_minimal_in_x", float(t_samples[i]), float(x_samples[j]))

    below = x_samples[x_samples < problem.rho]
    chain = np.concatenate([below, [problem.rho]])
    vals = f(t_samples[:, None], chain[None, :])
    steps = vals[:, :-1] - vals[:, 1:]
    tol = _REL_SLACK * np.max(np.abs(vals))
    decreasing_ok = bool(np.min(steps) >= -tol)
    if decreasing_ok is False and counterexample is None:
        i, j = np.unravel_index(int(np.argmin(steps)), steps.shape)
        counterexample = ("decreasing_below_rho", float(t_samples[i]), float(chain[j + 1]))

    i_min = int(np.argmin(f_at_rho))
    ok = positive and anchor_ok and rho_min_ok and decreasing_ok
    return A2Report(
        ok=ok,
        anchor_minimal_in_t=anchor_ok,
        rho_minimal_in_x=rho_min_ok,
        decreasing_below_rho=decreasing_ok,
        positive=positive,
        f_anchor=f_anchor,
        t_argmin=float(t_samples[i_min]),
        f_min_over_t=float(f_at_rho[i_min]),
        counterexample=counterexample,
    )


def _phi_denominator(
    f: Callable, p: GreensParams, kappa: float, quad: QuadratureConfig
):
    """integral_a^b v(t) f(t, kappa*w(t)) dt/t as a QuadratureResult."""
    a = p.interval.a
    e = p.mu.mu - 1.0

    def fun(s, dlo, dhi):
        tau = _interior(a * np.exp(s), p.interval)
        v = dlo * dhi**e
        return v * f(tau, kappa * _w_factors(p, dlo, dhi))

    return tanh_sinh_segment(fun, 0.0, p.L, quad)


def _phi_value(
    f: Callable, p: GreensParams, kappa: float, quad: QuadratureConfig
) -> float:
    res = _phi_denominator(f, p, kappa, quad)
    if math.isinf(res.error_estimate):
        # Divergent denominator: the threshold cannot hold at this kappa.
        return 0.0
    if not res.converged:
        raise ConvergenceError(f"phi denominator did not converge at kappa={kappa}", res)
    if res.value <= 0.0:
        return 0.0
    return kappa / res.value


def phi(problem: Problem, kappa: float, quad: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """kappa / integral_a^b v(t) f(t, kappa w(t)) dt/t for kappa in (0, rho)."""
    if not (0.0 < kappa < problem.rho):
        raise DomainError(f"kappa={kappa} outside (0, {problem.rho})")
    return _phi_value(problem.f, problem.greens, kappa, quad)


def _golden_max(
    fn: Callable[[float], float], lo: float, hi: float, iters: int = 80
) -> tuple[float, float]:
    """Golden-section maximizer; ties move the bracket right, so the
    leftmost maximizer wins."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = fn(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = fn(x2)
    if f1 >= f2:
        return x1, f1
    return x2, f2


def _maximize_phi(
    f: Callable, p: GreensParams, rho: float, quad: QuadratureConfig
) -> tuple[float, float]:
    """Coarse geometric scan then golden-section refinement of phi."""
    lo = rho * _KAPPA_MARGIN
    hi = rho * (1.0 - _KAPPA_MARGIN)
    kappas = np.geomspace(lo, hi, 64)
    values = [_phi_value(f, p, float(k), quad) for k in kappas]
    i_best = int(np.argmax(values))
    bracket_lo = kappas[max(i_best - 1, 0)]
    bracket_hi = kappas[min(i_best + 1, len(kappas) - 1)]
    k_star, sup = _golden_max(
        lambda k: _phi_value(f, p, k, quad), float(bracket_lo), float(bracket_hi)
    )
    if values[i_best] > sup:
        k_star, sup = float(kappas[i_best]), values[i_best]
    return k_star, sup


@dataclass(frozen=True)
class A3Report:
    ok: bool
    sup: float
    threshold: float
    kappa_star: float
    R: Optional[float] = None
    epsilon: Optional[float] = None
    n0: Optional[int] = None
    phi_at_radius: Optional[float] = None


def check_a3_and_select(
    problem: Problem, quad: QuadratureConfig = DEFAULT_CONFIG
) -> A3Report:
    """Maximize phi over (0, rho) and, on success, select R, epsilon, n0.

    R is the maximizer; epsilon is the largest of R/2, R/4, ... with
    phi(R - epsilon) >= threshold; n0 = ceil(1/epsilon) + 1 so that
    1/n0 < epsilon strictly.
    """
    p = problem.greens
    threshold = 1.0 / (p.gamma_mu * p.L)
    kappa_star, sup = _maximize_phi(problem.f, p, problem.rho, quad)
    if not (sup > threshold):
        return A3Report(False, sup, threshold, kappa_star)
    radius = kappa_star
    eps = radius / 2.0
    for _ in range(_MAX_EPS_HALVINGS):
        phi_at = _phi_value(problem.f, p, radius - eps, quad)
        if phi_at >= threshold:
            break
        eps /= 2.0
    else:
        raise ConvergenceError(
            "no admissible epsilon found below the maximizer",
            _phi_denominator(problem.f, p, radius, quad),
        )
    n0 = math.ceil(1.0 / eps) + 1
    return A3Report(True, sup, threshold, kappa_star, radius, eps, n0, phi_at)


def lambda_max(
    problem: Problem,
    param: str = "lambda",
    quad: QuadratureConfig = DEFAULT_CONFIG,
) -> float:
    """Largest multiplier for which the threshold condition holds.

    Requires f = param * g with g independent of the parameter; the
    structure is verified by scaling probes before exploiting
    phi proportional to 1/param.
    """
    if param not in free_parameters(problem.f_ast):
        raise UnsupportedStructureError(
            f"parameter {param!r} does not occur in f"
        )
    f1 = as_function(problem.f_ast, {**problem.params, param: 1.0})
    f2 = as_function(problem.f_ast, {**problem.params, param: 2.0})
    iv = problem.interval
    t_probe = iv.from_log(np.linspace(0.2, 0.8, 5) * iv.length)
    x_probe = problem.rho * np.array([0.3, 1.0, 3.0])
    v1 = f1(t_probe[:, None], x_probe[None, :])
    v2 = f2(t_probe[:, None], x_probe[None, :])
    if not np.allclose(v2, 2.0 * v1, rtol=1e-9, atol=0.0):
        raise UnsupportedStructureError(
            f"f is not multiplicative in {param!r}: f(2) != 2 f(1) at probes"
        )
    p = problem.greens
    _, sup_g = _maximize_phi(f1, p, problem.rho, quad)
    return p.gamma_mu * p.L * sup_g


@dataclass(frozen=True)
class ConditionReport:
    """Combined verdicts and selected constants for one problem."""

    a1: A1Report
    a2: A2Report
    a3: A3Report

    @property
    def a1_ok(self) -> bool:
        return self.a1.ok

    @property
    def a2_ok(self) -> bool:
        return self.a2.ok

    @property
    def a3_ok(self) -> bool:
        return self.a3.ok

    @property
    def all_ok(self) -> bool:
        return self.a1.ok and self.a2.ok and self.a3.ok

    @property
    def a3_sup(self) -> float:
        return self.a3.sup

    @property
    def a3_threshold(self) -> float:
        return self.a3.threshold

    @property
    def kappa_star(self) -> float:
        return self.a3.kappa_star

    @property
    def R(self) -> Optional[float]:
        return self.a3.R

    @property
    def epsilon(self) -> Optional[float]:
        return self.a3.epsilon

    @property
    def n0(self) -> Optional[int]:
        return self.a3.n0

    def to_kv(self) -> str:
        def fmt(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if v is None:
                return "nan"
            if isinstance(v, float):
                return f"{v:.17g}"
            return str(v)

        pairs = [
            ("a1_ok", self.a1.ok),
            ("a2_ok", self.a2.ok),
            ("a3_ok", self.a3.ok),
            ("a3_sup", self.a3.sup),
            ("a3_threshold", self.a3.threshold),
            ("kappa_star", self.a3.kappa_star),
            ("R", self.a3.R),
            ("epsilon", self.a3.epsilon),
            ("n0", self.a3.n0 if self.a3.n0 is not None else "nan"),
            ("f_anchor", self.a2.f_anchor),
            ("t_argmin", self.a2.t_argmin),
        ]
        for probe in self.a1.probes:
            pairs.append((f"a1_integral_c={probe.c:.6g}", probe.value))
        return "\n".join(f"{k}={fmt(v)}" for k, v in pairs)

    def to_text(self) -> str:
        lines = ["Condition report"]
        mark = lambda ok: "PASS" if ok else "FAIL"
        lines.append(f"  integrability (a1): {mark(self.a1.ok)}")
        for probe in self.a1.probes:
            status = "converged" if probe.converged else "NOT converged"
            lines.append(
                f"    c={probe.c:<12.6g} integral={probe.value:.12g} "
                f"(+-{probe.error_estimate:.2e}, {status})"
            )
        if self.a1.failure:
            lines.append(f"    failure: {self.a1.failure}")
        a2 = self.a2
        lines.append(f"  shape (a2): {mark(a2.ok)}")
        lines.append(
            f"    f(vartheta, rho)={a2.f_anchor:.12g}; sampled min over t "
            f"at t={a2.t_argmin:.12g} is {a2.f_min_over_t:.12g}"
        )
        lines.append(
            "    anchor minimal in t: %s; rho minimal in x: %s; "
            "non-increasing below rho: %s; positive: %s"
            % tuple(
                mark(flag)
                for flag in (
                    a2.anchor_minimal_in_t,
                    a2.rho_minimal_in_x,
                    a2.decreasing_below_rho,
                    a2.positive,
                )
            )
        )
        if a2.counterexample:
            what, t_at, x_at = a2.counterexample
            lines.append(f"    counterexample ({what}) at t={t_at:.12g}, x={x_at:.12g}")
        a3 = self.a3
        lines.append(f"  threshold (a3): {mark(a3.ok)}")
        lines.append(
            f"    sup phi = {a3.sup:.12g} at kappa = {a3.kappa_star:.12g}; "
            f"threshold 1/(Gamma(mu) L) = {a3.threshold:.12g}"
        )
        if a3.ok:
            lines.append(
                f"    R = {a3.R:.12g}, epsilon = {a3.epsilon:.12g}, "
                f"n0 = {a3.n0}, phi(R - epsilon) = {a3.phi_at_radius:.12g}"
            )
        lines.append(f"  overall: {mark(self.all_ok)}")
        return "\n".join(lines)


def check_problem(
    problem: Problem,
    quad: QuadratureConfig = DEFAULT_CONFIG,
    a1_quad: QuadratureConfig = A1_DEFAULT_CONFIG,
) -> ConditionReport:
    """Run all three checks and assemble the combined report."""
    a1 = check_a1(problem, quad=a1_quad)
    a2 = check_a2(problem)
    a3 = check_a3_and_select(problem, quad=quad)
    return ConditionReport(a1, a2, a3)


def locate_anchor(
    f: Callable,
    interval: Interval,
    x_lo: float = 1e-3,
    x_hi: float = 1e3,
) -> tuple[float, float]:
    """Estimate the anchor point (vartheta, rho) from f's shape.

    rho is the x-minimizer of f(t_mid, .) over a log-spaced range, and
    vartheta the t-minimizer of f(., rho); both refined by golden
    section.  Used when a problem file omits the anchor.
    """
    t_mid = interval.from_log(0.5 * interval.length)
    xs = np.geomspace(x_lo, x_hi, 256)
    fx = f(t_mid, xs)
    j = int(np.argmin(fx))
    x_bracket = (xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)])
    neg_f_x = lambda x: -f(t_mid, x)
    rho, _ = _golden_max(lambda x: neg_f_x(x), float(x_bracket[0]), float(x_bracket[1]))

    s = np.linspace(0.002, 0.998, 512) * interval.length
    ts = interval.from_log(s)
    ft = f(ts, rho)
    i = int(np.argmin(ft))
    t_bracket = (ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)])
    vartheta, _ = _golden_max(
        lambda t: -f(t, rho), float(t_bracket[0]), float(t_bracket[1])
    )
    return float(vartheta), float(rho)
