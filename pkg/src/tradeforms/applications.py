"""Closed-form applications of the power-sum calculus: wage bargaining
with labor hoarding, sequential supply-chain sourcing thresholds, and
multi-stage oligopoly chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (
    DomainViolation,
    EmptyInsourcingRegion,
    NegativeDenominator,
    SingularTerm,
)
from .forms import PowerSum, am_transform
from .laplace import LaplaceMeasure


@dataclass(frozen=True)
class BargainingParams:
    lam: float           # worker bargaining weight
    W0: float = 0.0      # outside wage

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("bargaining weight must be positive")


def sz_hoarding_bp(lam: float, t: float) -> float:
    """Labor hoarding ((1+lam)/(1+lam-t*lam))**(1/t) - 1 under single-power
    marginal revenue with exponent -t: constant over the cycle."""
    denom = 1.0 + lam - t * lam
    if denom <= 0.0:
        raise DomainViolation("1 + lam - t*lam must be positive")
    return ((1.0 + lam) / denom) ** (1.0 / t) - 1.0


def sz_wage_transform(MR: PowerSum, lam: float) -> PowerSum:
    """Bargaining-adjusted marginal revenue: the term with exponent e picks
    up the factor (1+lam)/(1+lam+e*lam).

    This is the partial average-marginal transform the bargaining round
    applies; at lam -> 0 it is the identity.
    """
    out = []
    for term in MR.terms:
        denom = 1.0 + lam + term.exponent * lam
        if denom == 0.0:
            raise SingularTerm(f"exponent {term.exponent} is singular at lam={lam}")
        out.append(((1.0 + lam) / denom * term.coeff, term.exponent))
    return PowerSum(out)


# exact constants of the income-calibrated hoarding formula: demand
# 50000*(q**-0.4/2 + 2 - 2.5*q**0.4) with equal bargaining weights
SZ_INCOME_M = 100_000.0
SZ_INCOME_A_MINUS = -0.25
SZ_INCOME_A_PLUS = 1.25
SZ_INCOME_B = 0.4


def sz_income_demand() -> PowerSum:
    m, am_, ap, b = SZ_INCOME_M, SZ_INCOME_A_MINUS, SZ_INCOME_A_PLUS, SZ_INCOME_B
    return PowerSum([(m, 0.0), (-m * am_, -b), (-m * ap, b)])


def sz_hoarding_income_form(W0: float, lam: float = 1.0) -> float:
    """Hoarding under the income-distribution demand calibration.

    Solves the bargaining-adjusted and the neoclassical first-order
    conditions (both quadratic in q**b) and returns q*/q** - 1.  The
    two-radical closed form has prefactor 1.2**(5/2) (printed as 1.6 at
    two significant digits) and inner constants 1.09375e10 and 1.05e10.
    """
    if not (0.0 < W0 < SZ_INCOME_M):
        raise DomainViolation(f"outside wage must lie in (0, {SZ_INCOME_M:g})")
    MR = am_transform(sz_income_demand(), 1.0, 1.0)
    RHS = sz_wage_transform(MR, lam)

    def positive_root(ps: PowerSum, level: float) -> float:
        # c0 + cm*x^-1 + cp*x = level with x = q**b, cp < 0
        terms = {round(t.exponent, 12): t.coeff for t in ps.terms}
        c0 = terms.get(0.0, 0.0)
        cm = terms[-SZ_INCOME_B]
        cp = terms[SZ_INCOME_B]
        disc = (c0 - level) ** 2 - 4.0 * cp * cm
        return ((level - c0) - math.sqrt(disc)) / (2.0 * cp)

    x_star = positive_root(RHS, W0)
    x_dblstar = positive_root(MR, W0)
    return (x_star / x_dblstar) ** (1.0 / SZ_INCOME_B) - 1.0


@dataclass(frozen=True)
class SourcingParams:
    """Bi-power demand/cost primitives of the sequential sourcing model:
    P = p_mt*q**t + p_mu*q**u, MC = mc_mu*q**u, with 0 < t < u and the
    high-power demand coefficient negative."""

    t: float
    u: float
    ratio: float              # p_mu / mc_mu (negative in the saturation case)
    beta_O: float = 0.3
    beta_I: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.t < self.u):
            raise ValueError("need 0 < t < u")
        if not (0.0 < self.beta_O < 1.0 and 0.0 < self.beta_I < 1.0):
            raise ValueError("bargaining powers must lie in (0,1)")


def ac_beta_star(j: float, params: SourcingParams) -> float:
    """Relaxed-problem bargaining power along the chain:
    1 - 1/((1+u) [(1-ratio) j**t + ratio j**u])."""
    if not (0.0 < j <= 1.0):
        raise ValueError("stage index must lie in (0, 1]")
    denom = (1.0 + params.u) * (
        (1.0 - params.ratio) * j**params.t + params.ratio * j**params.u
    )
    if denom <= 0.0:
        raise NegativeDenominator(f"denominator {denom} at stage {j}")
    return 1.0 - 1.0 / denom


def ac_threshold_constant(t: float, beta_O: float, beta_I: float) -> float:
    """k = ((1-b_O)^(1/t) - (1-b_I)^(1/t)) /
    ((1-b_O)^((1+t)/t) - (1-b_I)^((1+t)/t)); the insourcing rule is
    MR(q) > lam*k."""
    if beta_O == beta_I:
        raise DomainViolation("identical sourcing modes have no threshold")
    num = (1.0 - beta_O) ** (1.0 / t) - (1.0 - beta_I) ** (1.0 / t)
    den = (1.0 - beta_O) ** ((1.0 + t) / t) - (1.0 - beta_I) ** ((1.0 + t) / t)
    return num / den


@dataclass
class RestrictedSourcing:
    k: float
    lam: float
    q_total: float
    q_low: float
    q_high: float

    @property
    def has_interior_band(self) -> bool:
        return self.q_high > self.q_low > 0.0


def ac_restricted_thresholds(
    p0: float,
    p_mt: float,
    p_m2t: float,
    mc_mt: float,
    t: float,
    beta_O: float,
    beta_I: float,
) -> RestrictedSourcing:
    """Insourcing band of the restricted sourcing problem with
    P = p0 + p_mt q**t + p_m2t q**(2t) and MC = mc_mt q**t.

    The shadow price lam is closed by MR(q_lam) = lam where q_lam is total
    production; given lam, insourcing happens where MR(q) > lam*k, i.e.
    between the two roots of the marginal-revenue quadratic in q**t.
    """
    if p_m2t >= 0.0:
        raise DomainViolation("the q**(2t) demand coefficient must be negative")
    k = ac_threshold_constant(t, beta_O, beta_I)

    def mr(q):
        return (
            p0
            + (1.0 + t) * p_mt * q**t
            + (1.0 + 2.0 * t) * p_m2t * q ** (2.0 * t)
        )

    def roots_at(level):
        a = (1.0 + 2.0 * t) * p_m2t
        b = (1.0 + t) * p_mt
        c = p0 - level
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            raise EmptyInsourcingRegion("marginal revenue never reaches the threshold")
        lo_y = (-b + math.sqrt(disc)) / (2.0 * a)   # a < 0: this is the smaller y
        hi_y = (-b - math.sqrt(disc)) / (2.0 * a)
        lo = 0.0 if lo_y <= 0.0 else lo_y ** (1.0 / t)
        hi = 0.0 if hi_y <= 0.0 else hi_y ** (1.0 / t)
        return min(lo, hi), max(lo, hi)

    def supply(p):
        # S = MC^{-1}
        return (p / mc_mt) ** (1.0 / t) if p > 0.0 else 0.0

    # marginal revenue turns negative at finite q (the q**(2t) coefficient
    # is negative); production can never pass that point because the stage
    # requirement 1/S((1-beta) MR) blows up there
    y_mr0 = (-(1.0 + t) * p_mt - math.sqrt(
        (1.0 + t) ** 2 * p_mt**2 - 4.0 * (1.0 + 2.0 * t) * p_m2t * p0
    )) / (2.0 * (1.0 + 2.0 * t) * p_m2t)
    q_mr0 = y_mr0 ** (1.0 / t)

    def q_of_lambda(lam):
        """Total production: integral of 1/S over stages equals one."""
        level = lam * k
        try:
            q_lo, q_hi = roots_at(level)
        except EmptyInsourcingRegion:
            q_lo = q_hi = -1.0  # outsource everywhere

        def beta_at(q):
            return beta_I if q_lo <= q <= q_hi else beta_O

        def j_integrand(q):
            return 1.0 / supply((1.0 - beta_at(q)) * mr(q))

        def j_of_q(q_top):
            pieces = sorted({0.0, q_lo, q_hi, q_top})
            total = 0.0
            for a_, b_ in zip(pieces[:-1], pieces[1:]):
                if b_ <= 0.0 or a_ >= q_top:
                    continue
                lo_, hi_ = max(a_, 0.0), min(b_, q_top)
                if hi_ > lo_:
                    total += quad(j_integrand, lo_, hi_, limit=100)[0]
            return total

        # the stage requirement diverges at the marginal-revenue root, so
        # approach it geometrically until the chain length reaches one
        # (pushing the top too close to the root starves the quadrature)
        lo = 1e-9
        hi = min(1.0, 0.5 * q_mr0)
        gap = q_mr0 - hi
        for _ in range(60):
            if j_of_q(hi) >= 1.0:
                break
            gap *= 0.5
            hi = q_mr0 - gap
        else:
            raise DomainViolation("production never exhausts the chain")
        return brentq(lambda q: j_of_q(q) - 1.0, lo, hi, xtol=1e-13, rtol=1e-12)

    def excess(lam):
        return mr(q_of_lambda(lam)) - lam

    lam_lo = 1e-6
    lam_hi = max(mr(q_mr0 * 0.5), p0, 1e-3)
    while excess(lam_hi) > 0.0:
        lam_hi *= 2.0
        if lam_hi > 1e9:
            raise DomainViolation("no shadow price balances the chain")
    lam = brentq(excess, lam_lo, lam_hi, xtol=1e-12, rtol=1e-11)
    q_total = q_of_lambda(lam)
    try:
        q_low, q_high = roots_at(lam * k)
    except EmptyInsourcingRegion:
        q_low = q_high = 0.0
    return RestrictedSourcing(k=k, lam=lam, q_total=q_total, q_low=q_low, q_high=q_high)


def salinger_chain(p_m: LaplaceMeasure, ac_list, n_list) -> LaplaceMeasure:
    """First-stage FOC measure of an m-stage imperfectly competitive chain.

    Stages are ordered upstream to downstream: ac_list[0] belongs to the
    first stage (whose FOC this is), ac_list[-1] to the consumer-facing
    stage whose inverse demand is p_m.  Each stage with n_i symmetric
    competitors applies the per-mass multiplier (1 - t/n_i), and the cost
    entering at stage i passes through its own stage and every stage
    upstream of it:

        f1(t) = p_m(t) prod_i (1 - t/n_i)
                - sum_i ac_i(t) prod_{j<=i} (1 - t/n_j)
    """
    ac_list = list(ac_list)
    n_list = [float(n) for n in n_list]
    if len(ac_list) != len(n_list):
        raise ValueError("need one average-cost measure per stage")
    if any(n < 1.0 for n in n_list):
        raise ValueError("stage competitor counts must be >= 1")

    def scaled(measure, stages):
        out = {}
        for t0, wgt in measure.masses:
            factor = 1.0
            for n in stages:
                factor *= 1.0 - t0 / n
            out[t0] = out.get(t0, 0.0) + wgt * factor
        return out

    total = scaled(p_m, n_list)
    for i, ac in enumerate(ac_list):
        for t0, wgt in scaled(ac, n_list[: i + 1]).items():
            total[t0] = total.get(t0, 0.0) - wgt
    masses = tuple((t0, w) for t0, w in sorted(total.items()) if w != 0.0)
    return LaplaceMeasure(masses=masses)
