"""Green's function of the linear Hadamard fractional boundary value problem.

For order mu in (2, 3) on (a, b) with boundary conditions
x(a) = a x'(a) = x(b) = 0, the problem

    D^mu x(t) + y(t) = 0  ->  x(t) = integral_a^b G(t, tau) y(tau) dtau/tau

has the kernel, in log-coordinates st = ln(t/a), sq = ln(tau/a),
L = ln(b/a):

    G = [st^(mu-1) (L-sq)^(mu-1) - (st-sq)^(mu-1) L^(mu-1)] * norm   (sq <= st)
    G = st^(mu-1) (L-sq)^(mu-1) * norm                               (st <= sq)

with norm = 1/(Gamma(mu) L^(mu-1)).  The two branches agree on the
diagonal; the diagonal is assigned to the second branch so evaluation is
bit-reproducible.

The kernel is sandwiched by the envelope functions

    u(t) = st^(mu-1) (L - st),   v(t) = st (L - st)^(mu-1),
    w(t) = u(t) / L^mu

through four bounds that the solver's positivity analysis rests on:

    (i)   G(t, tau) <= u(t) / (Gamma(mu) L)
    (ii)  G(t, tau) <= v(tau) / (Gamma(mu) L)
    (iii) G(t, tau) >= u(t) v(tau) / (Gamma(mu) L^(mu+1))
    (iv)  G(t, tau) >= w(t) G(s, tau)    for every s

These are exact real-arithmetic statements; certify_bounds sweeps them on
a grid and reports the worst slack per bound, so every run of the solver
can re-check the inequalities it depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frac_core import ConvergenceError, DomainError, Interval, Order, pow0
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, tanh_sinh_segment

__all__ = [
    "GreensParams",
    "BoundReport",
    "greens_eval",
    "greens_eval_s",
    "envelope_u",
    "envelope_v",
    "envelope_w",
    "envelope_u_s",
    "envelope_v_s",
    "envelope_w_s",
    "certify_bounds",
    "greens_row_integral",
]

SLACK_TOLERANCE = -1e-12


@dataclass(frozen=True)
class GreensParams:
    """Precomputed kernel constants for one (interval, order) pair."""

    interval: Interval
    mu: Order
    L: float
    gamma_mu: float
    norm: float

    @classmethod
    def create(cls, interval: Interval, mu: Order) -> "GreensParams":
        mu.require_bvp()
        L = interval.length
        gamma_mu = math.gamma(mu.mu)
        norm = 1.0 / (gamma_mu * L ** (mu.mu - 1.0))
        return cls(interval, mu, L, gamma_mu, norm)

    def __post_init__(self) -> None:
        consistency = self.norm * self.gamma_mu * self.L ** (self.mu.mu - 1.0)
        if abs(consistency - 1.0) > 1e-12:
            raise DomainError("inconsistent Green's function constants")
        for name in ("L", "gamma_mu", "norm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be finite and positive, got {v}")


def greens_eval_s(p: GreensParams, st, sq):
    """Kernel in log-coordinates; vectorized, broadcasts st against sq."""
    st = np.asarray(st, dtype=float)
    sq = np.asarray(sq, dtype=float)
    e = p.mu.mu - 1.0
    upper = pow0(st, e) * pow0(p.L - sq, e)
    lower = upper - pow0(st - sq, e) * p.L**e
    out = p.norm * np.where(sq >= st, upper, lower)
    if out.ndim == 0:
        return float(out)
    return out


def greens_eval(p: GreensParams, t, tau):
    """G(t, tau) for t, tau in [a, b]; raises DomainError outside."""
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    a, b = p.interval.a, p.interval.b
    if np.any(t < a) or np.any(t > b) or np.any(tau < a) or np.any(tau > b):
        raise DomainError("greens_eval arguments must lie in [a, b]")
    return greens_eval_s(p, np.log(t / a), np.log(tau / a))


def envelope_u_s(p: GreensParams, s):
    return pow0(np.asarray(s, dtype=float), p.mu.mu - 1.0) * (p.L - s)


def envelope_v_s(p: GreensParams, s):
    return np.asarray(s, dtype=float) * pow0(p.L - np.asarray(s, dtype=float), p.mu.mu - 1.0)


def envelope_w_s(p: GreensParams, s):
    return envelope_u_s(p, s) / p.L**p.mu.mu


def envelope_u(p: GreensParams, t):
    return envelope_u_s(p, p.interval.to_log(t))


def envelope_v(p: GreensParams, t):
    return envelope_v_s(p, p.interval.to_log(t))


def envelope_w(p: GreensParams, t):
    return envelope_w_s(p, p.interval.to_log(t))


@dataclass(frozen=True)
class BoundReport:
    """Worst slacks of the four envelope bounds on a certification grid.

    Slack is (bound side) - (kernel side) oriented so that nonnegative
    means the bound holds; verdicts allow SLACK_TOLERANCE of rounding.
    """

    params: GreensParams
    grid_n: int
    n_random_slices: int
    min_slack: tuple[float, float, float, float]
    argmin: tuple[tuple[float, float], ...]
    ok: tuple[bool, bool, bool, bool]

    @property
    def all_ok(self) -> bool:
        return all(self.ok)

    def to_text(self) -> str:
        names = (
            "(i)   G <= u(t)/(Gamma(mu)*L)",
            "(ii)  G <= v(tau)/(Gamma(mu)*L)",
            "(iii) G >= u(t)*v(tau)/(Gamma(mu)*L^(mu+1))",
            "(iv)  G(t,tau) >= w(t)*G(s,tau)",
        )
        iv = self.params.interval
        lines = [
            "Green's function bound certification",
            f"  interval: a={iv.a:.17g}  b={iv.b:.17g}  (L={self.params.L:.17g})",
            f"  order:    mu={self.params.mu.mu:.17g}",
            f"  grid:     {self.grid_n}x{self.grid_n} "
            f"(+{self.n_random_slices} random slices for (iv))",
        ]
        for name, slack, (t_at, tau_at), okay in zip(
            names, self.min_slack, self.argmin, self.ok
        ):
            verdict = "PASS" if okay else "FAIL"
            lines.append(
                f"  {name:<44} min slack {slack: .3e} "
                f"at (t={t_at:.6g}, tau={tau_at:.6g})  {verdict}"
            )
        lines.append(
            f"  overall: {'PASS' if self.all_ok else 'FAIL'} "
            f"(tolerance {SLACK_TOLERANCE:g})"
        )
        return "\n".join(lines)


def certify_bounds(
    p: GreensParams, grid_n: int, n_random_slices: int = 64, seed: int = 20260809
) -> BoundReport:
    """Sweep the four envelope bounds on a grid_n x grid_n (t, tau) grid.

    Bound (iv) quantifies over a third point s; it is checked against the
    column maxima of the grid plus ``n_random_slices`` extra random rows.
    Violations are reported as data (negative slack), never raised.
    """
    if grid_n < 2:
        raise DomainError("grid_n must be >= 2")
    s = np.linspace(0.0, p.L, grid_n)
    g = greens_eval_s(p, s[:, None], s[None, :])
    u = envelope_u_s(p, s)
    v = envelope_v_s(p, s)
    w = envelope_w_s(p, s)
    c = 1.0 / (p.gamma_mu * p.L)

    def located(slack: np.ndarray) -> tuple[float, tuple[float, float]]:
        flat = int(np.argmin(slack))
        i, j = np.unravel_index(flat, slack.shape)
        return float(slack[i, j]), (
            float(p.interval.from_log(s[i])),
            float(p.interval.from_log(s[j])),
        )

    slack1, at1 = located(u[:, None] * c - g)
    slack2, at2 = located(v[None, :] * c - g)
    factor = 1.0 / (p.gamma_mu * p.L ** (p.mu.mu + 1.0))
    slack3, at3 = located(g - u[:, None] * v[None, :] * factor)

    rng = np.random.default_rng(seed)
    s_extra = rng.uniform(0.0, p.L, size=n_random_slices)
    g_extra = greens_eval_s(p, s_extra[:, None], s[None, :])
    col_max = np.maximum(g.max(axis=0), g_extra.max(axis=0))
    slack4, at4 = located(g - w[:, None] * col_max[None, :])

    slacks = (slack1, slack2, slack3, slack4)
    return BoundReport(
        params=p,
        grid_n=grid_n,
        n_random_slices=n_random_slices,
        min_slack=slacks,
        argmin=(at1, at2, at3, at4),
        ok=tuple(sl >= SLACK_TOLERANCE for sl in slacks),
    )


def greens_row_integral(
    p: GreensParams,
    t: float,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    strict: bool = True,
) -> float:
    """integral_a^b G(t, tau) dtau/tau, split at the kernel's diagonal kink.

    Solves the linear problem with unit right-hand side; the closed form
    u(t)/Gamma(mu+1) serves as its oracle in the tests.
    """
    st = math.log(t / p.interval.a)
    if st < 0.0 or st > p.L * (1.0 + 1e-12):
        raise DomainError(f"t={t} outside the interval")
    if st == 0.0 or st >= p.L:
        return 0.0
    e = p.mu.mu - 1.0
    room = p.L - st
    st_pow = st**e
    l_pow = p.L**e

    def left(sigma, dlo, dhi):
        # dhi = st - sigma, so L - sigma = room + dhi, both cancellation-free.
        return st_pow * (room + dhi) ** e - pow0(dhi, e) * l_pow

    def right(sigma, dlo, dhi):
        return st_pow * pow0(dhi, e)

    total = 0.0
    for fun, lo, hi in ((left, 0.0, st), (right, st, p.L)):
        res = tanh_sinh_segment(fun, lo, hi, cfg)
        if strict and not res.converged:
            raise ConvergenceError("greens_row_integral did not converge", res)
        total += res.value
    return p.norm * total
