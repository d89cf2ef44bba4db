"""Constructive solver: fixed points of regularized integral operators.

The singular problem is solved through the operator family

    (T_n x)(t) = integral_a^b G(t, tau) f(tau, |x(tau)| + 1/n) dtau/tau,

whose 1/n shift keeps f away from its singularity at x = 0.  For each
admissible n a fixed point is found by damped Picard iteration started
from (R - epsilon) * w, the canonical element of the cone

    P = { x : x(t) >= w(t) * ||x||_sup },

and the regularization is then continued along a geometric n-schedule
with warm starts until successive fixed points stabilize.  Every accepted
solution is re-certified: fixed-point residual under fully adaptive
quadrature, the positivity envelope r*w <= x <= R - epsilon with
r = f(vartheta, rho) * L^mu / Gamma(mu + 2), cone membership, and the
differential-equation residual through the fractional derivative.

Since f is non-increasing in x below rho, T_n reverses order there, so
the undamped iterates from the canonical start alternate around the
fixed point; the width of that enclosure is tracked as a convergence and
multiplicity diagnostic (the containment of the accepted solution in the
last bracket is checked, not assumed).

Solutions live on a Chebyshev-Lobatto grid in s = ln(t/a) and evaluate
between nodes by barycentric interpolation.  Every solution of the
integral equation carries the boundary structure x(s) = s^(mu-1) (L-s)
* (smooth factor): a polynomial in s cannot represent the s^(mu-1) part,
and the fractional derivative amplifies the defect catastrophically near
the endpoints.  The interpolant therefore factors it out: the grid
stores x values, and evaluation barycentrically interpolates
y = x / (s^(mu-1) (L-s)) on the interior nodes, multiplying the weight
back.  For the linear problem the factor y is exactly constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .conditions import ConditionReport, Problem, _interior
from .frac_core import ConvergenceError, DomainError, Order, hadamard_derivative, pow0
from .greens import GreensParams, envelope_u_s, envelope_w_s
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, _tables, tanh_sinh_segment

__all__ = [
    "SolutionGrid",
    "SolveConfig",
    "SolveReport",
    "ResidualReport",
    "FixedPointError",
    "chebyshev_lobatto",
    "barycentric_weights",
    "apply_tn",
    "solve_fixed_n",
    "solve",
    "verify_residual",
    "write_solution_csv",
    "read_solution_csv",
    "CSV_HEADER",
]

ENVELOPE_TOL = 1e-8
CONE_TOL = 1e-8

CSV_HEADER = "t,s,x,w,r_lower_w"


class FixedPointError(RuntimeError):
    """Picard iteration exhausted its budget.

    Carries the last sup-node change and, when the enclosure rails were
    tracked, the width of the last bracket."""

    def __init__(self, message: str, last_change: float, bracket_width: Optional[float]):
        super().__init__(message)
        self.last_change = last_change
        self.bracket_width = bracket_width


def chebyshev_lobatto(m: int, length: float) -> np.ndarray:
    """m Chebyshev-Lobatto points on [0, length], endpoints included."""
    if m < 2:
        raise DomainError("need at least 2 grid points")
    j = np.arange(m)
    s = 0.5 * length * (1.0 - np.cos(math.pi * j / (m - 1)))
    s[0] = 0.0
    s[-1] = length
    return s


def barycentric_weights(m: int) -> np.ndarray:
    """Barycentric weights for the Chebyshev-Lobatto family."""
    w = np.ones(m)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


_GENERAL_WEIGHTS_CACHE: dict[tuple, np.ndarray] = {}


def _general_barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights for an arbitrary node set, by the product
    formula in log-magnitude (plain products under/overflow for large m);
    normalized to unit maximum, which barycentric evaluation allows."""
    key = (nodes.size, float(nodes[0]), float(nodes[-1]), float(nodes[nodes.size // 2]))
    cached = _GENERAL_WEIGHTS_CACHE.get(key)
    if cached is not None:
        return cached
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    log_w = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(log_w - np.max(log_w))
    _GENERAL_WEIGHTS_CACHE[key] = w
    return w


def _bary_eval(
    nodes: np.ndarray,
    weights: np.ndarray,
    values: np.ndarray,
    pts: np.ndarray,
    chunk: int = 8192,
) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    out = np.empty(pts.shape, dtype=float)
    flat = pts.ravel()
    out_flat = out.ravel()
    for start in range(0, flat.size, chunk):
        block = flat[start : start + chunk]
        diff = block[:, None] - nodes[None, :]
        exact = diff == 0.0
        hit = exact.any(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = weights[None, :] / diff
            res = (kernel @ values) / kernel.sum(axis=1)
        if np.any(hit):
            idx = np.argmax(exact, axis=1)
            res[hit] = values[idx[hit]]
        out_flat[start : start + chunk] = res
    return out


@dataclass(frozen=True, eq=False)
class SolutionGrid:
    """Values of a candidate solution on the Chebyshev-Lobatto grid in s.

    Boundary values must be exactly zero (the boundary conditions); the
    inter-node interpolant is weighted-barycentric as described in the
    module docstring, so it reproduces the node values, vanishes at the
    endpoints, and carries the correct boundary exponents.
    """

    params: GreensParams
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.nodes.shape != self.values.shape:
            raise DomainError("nodes and values must have matching shapes")
        if self.values[0] != 0.0 or self.values[-1] != 0.0:
            raise DomainError("boundary values must be exactly zero")

    @classmethod
    def from_values(cls, params: GreensParams, values: np.ndarray) -> "SolutionGrid":
        nodes = chebyshev_lobatto(len(values), params.L)
        return cls(params, nodes, np.asarray(values, dtype=float))

    @property
    def m(self) -> int:
        return len(self.nodes)

    @property
    def norm_sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def t_nodes(self) -> np.ndarray:
        return self.params.interval.from_log(self.nodes)

    def _weight(self, s) -> np.ndarray:
        return pow0(np.asarray(s, dtype=float), self.params.mu.mu - 1.0) * (
            self.params.L - np.asarray(s, dtype=float)
        )

    def interpolate(self, s) -> np.ndarray:
        """Weighted barycentric evaluation at arbitrary s in [0, L]."""
        inner = self.nodes[1:-1]
        y = self.values[1:-1] / self._weight(inner)
        w = _general_barycentric_weights(inner)
        s = np.asarray(s, dtype=float)
        return self._weight(s) * _bary_eval(inner, w, y, s)

    def as_t_function(self) -> Callable:
        """The interpolant as a function of t (log of the argument)."""
        a = self.params.interval.a

        def x_of_t(t):
            return self.interpolate(np.log(np.asarray(t, dtype=float) / a))

        return x_of_t


@dataclass(frozen=True)
class SolveConfig:
    """Iteration controls.

    fp_tol is the reproducibility level of the whole pipeline, not just
    the Picard stopping rule: grid refinement and schedule extension are
    expected to move the solution by at most ~10*fp_tol.  The default is
    set to what the default grid honestly delivers for endpoint-singular
    nonlinearities (interpolation feedback through f's singular x
    derivative), which is far coarser than the quadrature accuracy.
    """

    m: int = 161
    fp_tol: float = 2e-6
    damping: float = 0.5
    n_schedule: Optional[tuple[int, ...]] = None
    max_iters: int = 400
    max_stages: int = 40

    def __post_init__(self) -> None:
        if self.m < 8:
            raise DomainError("grid size m must be >= 8")
        if not (self.fp_tol > 0.0):
            raise DomainError("fp_tol must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise DomainError("damping must lie in (0, 1]")
        if self.n_schedule is not None:
            ns = tuple(self.n_schedule)
            if any(b <= a for a, b in zip(ns, ns[1:])):
                raise DomainError("n_schedule must be strictly increasing")


def _greens_pieces(p: GreensParams, st: float):
    """Integrand factories for the kernel row at fixed t, split at the
    diagonal; both branches evaluate through stable endpoint distances."""
    e = p.mu.mu - 1.0
    room = p.L - st
    st_pow = st**e
    l_pow = p.L**e

    def left_factor(dhi):
        # dhi = st - sigma on [0, st]
        return st_pow * (room + dhi) ** e - pow0(dhi, e) * l_pow

    def right_factor(dhi):
        # dhi = L - sigma on [st, L]
        return st_pow * pow0(dhi, e)

    return left_factor, right_factor


def apply_tn(
    x: SolutionGrid,
    n: int,
    problem: Problem,
    quad: QuadratureConfig = DEFAULT_CONFIG,
) -> SolutionGrid:
    """One application of the regularized operator, fully adaptive.

    Integrates G(t_i, .) f(., |x| + 1/n) for every grid node; boundary
    nodes are exactly zero.  A quadrature failure raises with the node
    where it happened.
    """
    if n < 1:
        raise DomainError("regularization index n must be >= 1")
    p = x.params
    a = p.interval.a
    shift = 1.0 / n
    interp = x.interpolate
    f = problem.f
    out = np.zeros_like(x.values)
    for i in range(1, x.m - 1):
        st = float(x.nodes[i])
        left_factor, right_factor = _greens_pieces(p, st)

        def f_part(sigma):
            tau = _interior(a * np.exp(sigma), p.interval)
            return f(tau, np.abs(interp(sigma)) + shift)

        def left(sigma, dlo, dhi):
            return left_factor(dhi) * f_part(sigma)

        def right(sigma, dlo, dhi):
            return right_factor(dhi) * f_part(sigma)

        total = 0.0
        for fun, lo, hi in ((left, 0.0, st), (right, st, p.L)):
            res = tanh_sinh_segment(fun, lo, hi, quad)
            if not res.converged:
                raise ConvergenceError(
                    f"operator quadrature did not converge at node {i} (t={p.interval.from_log(st)})",
                    res,
                )
            total += res.value
        out[i] = p.norm * total
    return SolutionGrid(p, x.nodes, out)


class _FrozenTn:
    """The operator with quadrature nodes frozen after one adaptive probe.

    The kernel factor and weights are cached per grid node, so iterating
    costs one interpolation and one f evaluation per sweep.  The cache is
    n-independent (only f's argument shifts), and accepted solutions are
    re-certified against the adaptive operator afterwards.
    """

    def __init__(
        self,
        problem: Problem,
        nodes: np.ndarray,
        probe_values: np.ndarray,
        n_probe: int,
        quad: QuadratureConfig = DEFAULT_CONFIG,
    ):
        p = problem.greens
        self.p = p
        self.problem = problem
        self.nodes = nodes
        self.m = len(nodes)
        probe = SolutionGrid(p, nodes, probe_values)
        interp = probe.interpolate
        f = problem.f
        a = p.interval.a
        shift = 1.0 / n_probe
        sigma_parts: list[np.ndarray] = []
        weight_parts: list[np.ndarray] = []
        slices: list[slice] = [slice(0, 0)]  # boundary node 0
        pos = 0
        for i in range(1, self.m - 1):
            st = float(nodes[i])
            left_factor, right_factor = _greens_pieces(p, st)

            def f_part(sigma):
                tau = _interior(a * np.exp(sigma), p.interval)
                return f(tau, np.abs(interp(sigma)) + shift)

            node_sigma = []
            node_weight = []
            for factor, lo, hi in ((left_factor, 0.0, st), (right_factor, st, p.L)):

                def fun(sigma, dlo, dhi, factor=factor):
                    return factor(dhi) * f_part(sigma)

                res = tanh_sinh_segment(fun, lo, hi, quad)
                if not res.converged:
                    raise ConvergenceError(
                        f"operator quadrature probe did not converge at node {i}", res
                    )
                level = min(res.levels_used + 1, quad.max_levels)
                phi_tab, psi_tab, wfrac = _tables(level)
                h = 2.0 ** (1 - level)
                length = hi - lo
                dlo = length * phi_tab
                dhi = length * psi_tab
                sigma = np.where(phi_tab <= 0.5, lo + dlo, hi - dhi)
                w = h * length * wfrac
                w[0] *= 0.5
                w[-1] *= 0.5
                node_sigma.append(sigma)
                node_weight.append(w * factor(dhi))
            sig = np.concatenate(node_sigma)
            wgt = np.concatenate(node_weight)
            sigma_parts.append(sig)
            weight_parts.append(wgt)
            slices.append(slice(pos, pos + sig.size))
            pos += sig.size
        slices.append(slice(pos, pos))  # boundary node m-1
        self._sigma = np.concatenate(sigma_parts) if sigma_parts else np.empty(0)
        self._weights = np.concatenate(weight_parts) if weight_parts else np.empty(0)
        self._tau = _interior(a * np.exp(self._sigma), p.interval)
        self._slices = slices
        # weighted interpolation machinery, precomputed at the frozen nodes
        inner = nodes[1:-1]
        e = p.mu.mu - 1.0
        self._inner = inner
        self._inner_w = _general_barycentric_weights(inner)
        self._phi_nodes = inner**e * (p.L - inner)
        self._phi_sigma = pow0(self._sigma, e) * (p.L - self._sigma)

    def apply(self, values: np.ndarray, n: int) -> np.ndarray:
        shift = 1.0 / n
        y = values[1:-1] / self._phi_nodes
        xv = self._phi_sigma * _bary_eval(self._inner, self._inner_w, y, self._sigma)
        fv = self.problem.f(self._tau, np.abs(xv) + shift)
        out = np.zeros(self.m)
        for i in range(1, self.m - 1):
            sl = self._slices[i]
            out[i] = self.p.norm * float(np.dot(self._weights[sl], fv[sl]))
        return out


@dataclass(frozen=True)
class FixedPointInfo:
    iterations: int
    final_change: float
    enclosure_widths: tuple[float, ...]
    containment_ok: Optional[bool]


def _iterate(
    op: _FrozenTn,
    x0: np.ndarray,
    n: int,
    cfg: SolveConfig,
    rail_start: Optional[np.ndarray],
) -> tuple[np.ndarray, FixedPointInfo]:
    x = np.asarray(x0, dtype=float).copy()
    d = cfg.damping
    widths: list[float] = []
    rail_prev = None
    rail_pair_lo = rail_pair_hi = None
    if rail_start is not None:
        rail_prev = np.asarray(rail_start, dtype=float).copy()
    change = math.inf
    for k in range(cfg.max_iters):
        tx = op.apply(x, n)
        x_next = (1.0 - d) * x + d * tx
        change = float(np.max(np.abs(x_next - x)))
        x = x_next
        if rail_prev is not None:
            rail_next = op.apply(rail_prev, n)
            if k % 2 == 1:
                widths.append(float(np.max(np.abs(rail_next - rail_prev))))
                rail_pair_lo = np.minimum(rail_next, rail_prev)
                rail_pair_hi = np.maximum(rail_next, rail_prev)
            rail_prev = rail_next
        if change <= cfg.fp_tol:
            break
    else:
        raise FixedPointError(
            f"no fixed point within {cfg.max_iters} iterations at n={n}",
            change,
            widths[-1] if widths else None,
        )
    containment = None
    if rail_pair_lo is not None:
        slack = 10.0 * cfg.fp_tol
        containment = bool(
            np.all(x >= rail_pair_lo - slack) and np.all(x <= rail_pair_hi + slack)
        )
    return x, FixedPointInfo(k + 1, change, tuple(widths), containment)


def solve_fixed_n(
    x0: SolutionGrid,
    n: int,
    problem: Problem,
    cfg: SolveConfig,
    quad: QuadratureConfig = DEFAULT_CONFIG,
    rail_start: Optional[np.ndarray] = None,
) -> tuple[SolutionGrid, FixedPointInfo]:
    """Damped Picard iteration to a fixed point of the operator at fixed n.

    When ``rail_start`` is given (canonically (R - epsilon) * w), the
    undamped iterate sequence from it is tracked alongside: with f
    non-increasing below rho the operator is order-reversing, so
    consecutive undamped iterates bracket the fixed point and the bracket
    widths measure convergence; the accepted iterate is checked against
    the final bracket.
    """
    op = _FrozenTn(problem, x0.nodes, x0.values, n, quad)
    values, info = _iterate(op, x0.values, n, cfg, rail_start)
    return SolutionGrid(x0.params, x0.nodes, values), info


@dataclass(frozen=True)
class ResidualReport:
    residual_sup: float
    boundary_residuals: tuple[float, float, float]
    probes_t: tuple[float, ...]
    residuals: tuple[float, ...]

    def to_text(self) -> str:
        b = self.boundary_residuals
        lines = [
            "Residual report",
            f"  interior residual sup: {self.residual_sup:.6e} over {len(self.probes_t)} probes",
            f"  boundary |x(a)|      : {b[0]:.6e}",
            f"  boundary |a x'(a)|   : {b[1]:.6e}",
            f"  boundary |x(b)|      : {b[2]:.6e}",
        ]
        return "\n".join(lines)


def _derivative_plateau(
    fn: Callable,
    mu: Order,
    t: float,
    p: GreensParams,
    quad: QuadratureConfig,
    ladder: int = 6,
) -> float:
    """Fractional derivative with the difference step chosen on a ladder.

    The step trades truncation (grows with h) against amplified
    interpolation noise (grows as h^-3), so the estimate is taken where
    consecutive ladder entries agree best; selection uses only internal
    consistency of the derivative values.
    """
    s = math.log(t / p.interval.a)
    h_max = min(s, p.L - s) / 3.05
    values = []
    for j in range(ladder):
        h = h_max / 1.6**j
        values.append(
            hadamard_derivative(fn, mu, t, p.interval, quad=quad, h=h, s_max=p.L)
        )
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    j_best = int(np.argmin(diffs))
    return values[j_best + 1]


def verify_residual(
    x: SolutionGrid,
    problem: Problem,
    quad: QuadratureConfig = DEFAULT_CONFIG,
    n_probes: int = 21,
    probe_window: tuple[float, float] = (0.05, 0.95),
    x_fn: Optional[Callable] = None,
) -> ResidualReport:
    """Differential-equation residual of a candidate solution.

    Evaluates |D^mu x(t) + f(t, x(t))| at interior probes (s within
    ``probe_window`` of [0, L]) with the fractional derivative applied to
    the interpolant (or to ``x_fn`` when given, e.g. a closed form), and
    the three boundary residuals |x(a)|, |a x'(a)|, |x(b)|; x'(a) uses a
    one-sided difference of the interpolant in s.
    """
    p = x.params
    iv = p.interval
    fn = x_fn if x_fn is not None else x.as_t_function()
    f = problem.f
    lo, hi = probe_window
    probes_s = np.linspace(lo * p.L, hi * p.L, n_probes)
    residuals = []
    for s in probes_s:
        t = float(iv.from_log(s))
        d = _derivative_plateau(fn, p.mu, t, p, quad)
        x_here = float(np.abs(fn(t)))
        residuals.append(d + float(f(t, x_here)))
    residual_sup = float(np.max(np.abs(residuals)))

    # a x'(a) = dx/ds at s = 0: one-sided difference of the interpolant.
    # The step sits far below the first node, where the interpolant's
    # boundary factor s^(mu-1) dominates any polynomial variation.
    h0 = 1e-8 * p.L
    dxds0 = (float(x.interpolate(h0)) - float(x.values[0])) / h0
    boundary = (abs(float(x.values[0])), abs(dxds0), abs(float(x.values[-1])))
    return ResidualReport(
        residual_sup,
        boundary,
        tuple(float(iv.from_log(s)) for s in probes_s),
        tuple(float(r) for r in residuals),
    )


@dataclass(frozen=True)
class SolveReport:
    """Everything solve() establishes about the returned solution."""

    solution: SolutionGrid
    r_lower: float
    radius: float
    epsilon: float
    envelope_ok: bool
    cone_ok: bool
    positive_interior: bool
    residual_sup: float
    boundary_residuals: tuple[float, float, float]
    n_final: int
    converged: bool
    certificate_sup: float
    stages: tuple[int, ...]
    drifts: tuple[float, ...]
    iterations: tuple[int, ...]
    enclosure_widths: tuple[float, ...]
    containment_ok: Optional[bool]
    residual: ResidualReport

    def to_text(self) -> str:
        mark = lambda ok: "PASS" if ok else "FAIL"
        sol = self.solution
        lines = [
            "Solve report",
            f"  grid: m={sol.m} Chebyshev-Lobatto nodes on [0, L]",
            f"  regularization: n_final={self.n_final} after stages {list(self.stages)}",
            f"  converged: {mark(self.converged)} "
            f"(stage drifts {['%.2e' % d for d in self.drifts]})",
            f"  fixed-point certificate |T x - x|: {self.certificate_sup:.3e}",
            f"  sup norm: {sol.norm_sup:.12g} (radius R - eps = {self.radius - self.epsilon:.12g})",
            f"  positivity envelope r*w <= x <= R - eps: {mark(self.envelope_ok)} "
            f"(r = {self.r_lower:.12g})",
            f"  cone membership x >= w*||x||: {mark(self.cone_ok)}",
            f"  positive on interior nodes: {mark(self.positive_interior)}",
            f"  enclosure widths: {['%.2e' % w for w in self.enclosure_widths]}",
            f"  solution inside final bracket: {self.containment_ok}",
        ]
        lines.append("  " + self.residual.to_text().replace("\n", "\n  "))
        return "\n".join(lines)


def _auto_schedule(n0: int, max_stages: int):
    n = n0
    for _ in range(max_stages):
        yield n
        n *= 2


def solve(
    problem: Problem,
    cfg: SolveConfig,
    conditions: ConditionReport,
    quad: QuadratureConfig = DEFAULT_CONFIG,
) -> SolveReport:
    """Continuation in the regularization index until stabilization.

    Runs the fixed-point iteration along the n-schedule (auto: n0, 2*n0,
    4*n0, ... up to max_stages), warm-starting each stage, until two
    successive fixed points differ by at most fp_tol in sup norm.  An
    exhausted schedule yields converged=False with the partial results.
    """
    if not conditions.a3_ok:
        raise DomainError("solve requires the threshold condition to hold")
    p = problem.greens
    radius, eps, n0 = conditions.R, conditions.epsilon, conditions.n0
    r_lower = (
        problem.f_anchor * p.L**p.mu.mu / math.gamma(p.mu.mu + 2.0)
    )
    nodes = chebyshev_lobatto(cfg.m, p.L)
    w_nodes = envelope_w_s(p, nodes)
    x0 = (radius - eps) * w_nodes

    if cfg.n_schedule is not None:
        if cfg.n_schedule[0] < n0:
            raise DomainError(
                f"n_schedule must start at or above n0={n0}, got {cfg.n_schedule[0]}"
            )
        schedule = iter(cfg.n_schedule)
    else:
        schedule = _auto_schedule(n0, cfg.max_stages)

    op = _FrozenTn(problem, nodes, x0, n0, quad)
    x_cur = x0
    prev: Optional[np.ndarray] = None
    stages: list[int] = []
    drifts: list[float] = []
    iterations: list[int] = []
    widths: tuple[float, ...] = ()
    containment: Optional[bool] = None
    converged = False
    n_final = n0
    for stage_idx, n in enumerate(schedule):
        rail = x0 if stage_idx == 0 else None
        x_new, info = _iterate(op, x_cur, n, cfg, rail)
        stages.append(n)
        iterations.append(info.iterations)
        if stage_idx == 0:
            widths = info.enclosure_widths
            containment = info.containment_ok
        if prev is not None:
            drift = float(np.max(np.abs(x_new - prev)))
            drifts.append(drift)
            if drift <= cfg.fp_tol:
                converged = True
                x_cur = x_new
                n_final = n
                break
        prev = x_new
        x_cur = x_new
        n_final = n

    solution = SolutionGrid(p, nodes, x_cur)
    cert = apply_tn(solution, n_final, problem, quad)
    certificate_sup = float(np.max(np.abs(cert.values - solution.values)))

    envelope_ok = bool(
        np.all(solution.values >= r_lower * w_nodes - ENVELOPE_TOL)
        and np.all(solution.values <= radius - eps + ENVELOPE_TOL)
    )
    cone_ok = bool(
        np.all(solution.values >= w_nodes * solution.norm_sup - CONE_TOL)
    )
    positive_interior = bool(np.all(solution.values[1:-1] > 0.0))
    residual = verify_residual(solution, problem, quad)
    return SolveReport(
        solution=solution,
        r_lower=r_lower,
        radius=radius,
        epsilon=eps,
        envelope_ok=envelope_ok,
        cone_ok=cone_ok,
        positive_interior=positive_interior,
        residual_sup=residual.residual_sup,
        boundary_residuals=residual.boundary_residuals,
        n_final=n_final,
        converged=converged,
        certificate_sup=certificate_sup,
        stages=tuple(stages),
        drifts=tuple(drifts),
        iterations=tuple(iterations),
        enclosure_widths=widths,
        containment_ok=containment,
        residual=residual,
    )


def write_solution_csv(report: SolveReport, path: str) -> None:
    """CSV columns t, s, x, w, r_lower*w with lossless float formatting."""
    sol = report.solution
    w = envelope_w_s(sol.params, sol.nodes)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for t, s, xv, wv in zip(sol.t_nodes, sol.nodes, sol.values, w):
            fh.write(
                f"{t:.17g},{s:.17g},{xv:.17g},{wv:.17g},{report.r_lower * wv:.17g}\n"
            )


def read_solution_csv(path: str, params: GreensParams) -> SolutionGrid:
    """Rebuild a SolutionGrid from a solve CSV; the s-nodes must match the
    Chebyshev-Lobatto family for the given parameters."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise DomainError(f"unexpected CSV header {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    s = np.array([float(r[1]) for r in rows])
    x = np.array([float(r[2]) for r in rows])
    expected = chebyshev_lobatto(len(s), params.L)
    if not np.allclose(s, expected, rtol=0.0, atol=1e-12 * max(params.L, 1.0)):
        raise DomainError("CSV s-nodes do not match the Chebyshev-Lobatto grid")
    return SolutionGrid(params, expected, x)
