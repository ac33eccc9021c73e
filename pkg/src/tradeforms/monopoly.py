"""Monopoly and conduct-parameterized first-order conditions over power sums.

The FOC P + theta*q*P' = MC collapses to a polynomial after the power
substitution, so candidate optima come straight out of the radical solver.
Also houses surplus accounting (appropriability), the closed-form
pass-through rate from log-quantity derivatives of consumer surplus, and
the spline interpolation between analytically solvable exponent ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import NoInteriorOptimum, NonIntegrable, ZeroSecondDerivative
from .forms import PowerSum, am_transform, consumer_surplus, tractability_level, to_polynomial
from .roots import real_positive_roots


@dataclass
class MonopolyProblem:
    """Inverse demand P, marginal cost MC, conduct theta (1 = monopoly,
    1/n = symmetric Cournot), on the domain (0, q_max]."""

    P: PowerSum
    MC: PowerSum
    theta: float = 1.0
    q_max: float = math.inf

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("conduct parameter must be positive")

    def foc_gap(self) -> PowerSum:
        """G = P + theta*q*P' - MC; zero at candidate optima."""
        return am_transform(self.P, 1.0, self.theta) - self.MC

    def objective(self, q: float) -> float:
        """Antiderivative of the FOC gap: theta*q*P + (1-theta)*int P - int MC.

        Equals revenue minus variable cost at theta = 1; for other conduct
        values it is the scalar potential whose stationary points are the
        conduct-FOC roots, which is what candidate ranking needs.
        """
        qP = sum(t.coeff * q ** (t.exponent + 1.0) for t in self.P.terms)
        val = self.theta * qP - self.MC.antiderivative()(q)
        if self.theta != 1.0:
            val += (1.0 - self.theta) * self.P.antiderivative()(q)
        return float(val)


@dataclass
class Solution:
    q_star: float
    profit: float
    soc_ok: bool
    all_candidates: list = field(default_factory=list)


def solve_foc(problem: MonopolyProblem, max_level: int = 100) -> Solution:
    """Candidate optima from the polynomial route, ranked by the objective.

    Candidates are positive real roots of the substituted polynomial mapped
    back through q = x**(1/gap); the second-order condition is G'(q) < 0.
    If no candidate passes the SOC the problem has no interior optimum; if
    the best interior value does not beat the zero-production limit, the
    solution is q* = 0 with zero profit.
    """
    G = problem.foc_gap()
    rep = tractability_level(G, max_level=max_level)
    poly = to_polynomial(G, rep)
    Gprime = G.derivative()
    candidates = []
    for x in real_positive_roots(poly):
        q = x ** (1.0 / rep.gap)
        if 0.0 < q <= problem.q_max:
            candidates.append((q, problem.objective(q), Gprime(q) < 0.0))
    candidates.sort()
    pool = [c for c in candidates if c[2]]
    if math.isfinite(problem.q_max) and G(problem.q_max) > 0.0:
        boundary = (problem.q_max, problem.objective(problem.q_max), True)
        candidates.append(boundary)
        pool.append(boundary)
    if not pool:
        # constant-sign FOC gap: margins negative everywhere means shut
        # down, positive at the far end means no optimum exists
        probe = max((c[0] for c in candidates), default=1.0) * 1e3
        if G(probe) > 0.0:
            raise NoInteriorOptimum("objective increases without bound")
        return Solution(q_star=0.0, profit=0.0, soc_ok=False, all_candidates=candidates)
    best = max(pool, key=lambda c: (c[1], -c[0]))
    if best[1] <= 0.0:
        return Solution(q_star=0.0, profit=0.0, soc_ok=False, all_candidates=candidates)
    return Solution(q_star=best[0], profit=best[1], soc_ok=True, all_candidates=candidates)


def surplus_report(problem: MonopolyProblem, q: float) -> dict:
    """Per-unit producer surplus, consumer surplus, and appropriability at q.

    PS-bar is price minus average cost of the produced units; the
    appropriability ratio is PS/(PS + CS).
    """
    if q <= 0 or q > problem.q_max:
        raise ValueError("q outside the problem domain")
    ps_bar = problem.P(q) - problem.MC.antiderivative()(q) / q
    cs_bar = consumer_surplus(problem.P, per_unit=True)(q)
    total = ps_bar + cs_bar
    return {
        "ps_bar": float(ps_bar),
        "cs_bar": float(cs_bar),
        "appropriability": float(ps_bar / total),
    }


def pass_through(problem: MonopolyProblem, q: float) -> float:
    """Pass-through rate of a constant marginal-cost shift at optimum q.

    Computed as CS'(s)/CS''(s) in s = log q: each surplus term
    gamma*q**mu contributes gamma*mu*q**mu and gamma*mu^2*q**mu.
    """
    cs = consumer_surplus(problem.P)
    d1 = sum(t.coeff * t.exponent * q**t.exponent for t in cs.terms)
    d2 = sum(t.coeff * t.exponent**2 * q**t.exponent for t in cs.terms)
    if abs(d2) < 1e-300 or abs(d2) < 1e-14 * abs(d1):
        raise ZeroSecondDerivative("CS''(s) vanishes at this quantity")
    return float(d1 / d2)


# exponent ratios b = b_C/b_R at which MC0 + MC1*x**b = MR0*x is solvable
# by radicals; the second-order condition holds only below one
TRACTABLE_B_KNOTS = (-3.0, -2.0, -1.0, -0.5, -1.0 / 3.0, 0.0, 0.25, 1.0 / 3.0, 0.5)


def _foc_value(q, b, mc0, mc1, mr0):
    return mr0 / q - mc0 - mc1 * q ** (-b)


def solve_knot(b: float, mc0: float, mc1: float, mr0: float) -> float:
    """Closed-form q solving MR0/q = MC0 + MC1*q**(-b) for a tractable b."""
    if b == 0.0:
        return mr0 / (mc0 + mc1)
    G = PowerSum([(mr0, -1.0), (-mc0, 0.0), (-mc1, -b)])
    rep = tractability_level(G)
    poly = to_polynomial(G, rep)
    best = None
    for x in real_positive_roots(poly):
        q = x ** (1.0 / rep.gap)
        dG = -mr0 / q**2 + b * mc1 * q ** (-b - 1.0)
        if dG < 0.0:
            obj = mr0 * math.log(q) - mc0 * q - mc1 * q ** (1.0 - b) / (1.0 - b)
            if best is None or obj > best[1]:
                best = (q, obj)
    if best is None:
        raise NoInteriorOptimum(f"no SOC-valid root at b={b}")
    return best[0]


def _bisection_solution(b, mc0, mc1, mr0):
    lo, hi = 1e-12, 1.0
    while _foc_value(hi, b, mc0, mc1, mr0) > 0.0:
        hi *= 4.0
        if hi > 1e12:
            raise NoInteriorOptimum("no sign change for the bisection oracle")
    return brentq(_foc_value, lo, hi, args=(b, mc0, mc1, mr0), xtol=1e-15, rtol=1e-15)


@dataclass
class InterpolationResult:
    knots_b: np.ndarray
    knots_q: np.ndarray
    grid_b: np.ndarray
    q_interp: np.ndarray
    q_true: np.ndarray
    rel_err: np.ndarray
    mean_abs_rel: float
    max_abs_rel: float
    spline: CubicSpline


def interpolate_tractable(
    mc0: float, mc1: float, mr0: float, n_grid: int = 200
) -> InterpolationResult:
    """Cubic-spline interpolation of q(b) through the 9 radical-solvable knots.

    A cubic spline (not-a-knot ends; natural ends lose accuracy near the
    b = 1/2 boundary) is fit through the closed-form solutions and compared
    against bisection solutions on a uniform grid of n_grid exponent ratios
    spanning the knots.
    """
    if mc1 <= 0 or mr0 <= 0:
        raise ValueError("MC1 and MR0 must be positive")
    knots_b = np.array(TRACTABLE_B_KNOTS)
    knots_q = np.array([solve_knot(b, mc0, mc1, mr0) for b in knots_b])
    spline = CubicSpline(knots_b, knots_q, bc_type="not-a-knot")
    grid_b = np.linspace(knots_b[0], knots_b[-1], n_grid)
    q_true = np.array([_bisection_solution(b, mc0, mc1, mr0) for b in grid_b])
    q_interp = spline(grid_b)
    rel = (q_interp - q_true) / q_true
    return InterpolationResult(
        knots_b=knots_b,
        knots_q=knots_q,
        grid_b=grid_b,
        q_interp=q_interp,
        q_true=q_true,
        rel_err=rel,
        mean_abs_rel=float(np.mean(np.abs(rel))),
        max_abs_rel=float(np.max(np.abs(rel))),
        spline=spline,
    )
