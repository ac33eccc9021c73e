"""Hypergeometric machinery for closed-form aggregation over heterogeneous
firms.

With demand, both marginal-cost pieces, and the productivity density all
power sums (and the factorization precondition holding), integrals of
powers of the firm-level quantity against the productivity distribution
reduce to Gauss, Appell, or Lauricella functions of the substituted
variable x = q**common_power.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    Divergent,
    ParameterDomain,
    PreconditionViolated,
    SingularIntegrand,
)
from .forms import PowerSum, am_transform
from .roots import Polynomial, solve_iterative, solve_radicals

SERIES_STOP = 1e-16
SERIES_CAP = 100_000


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1 by power series, with the Euler
    transformation pulling arguments near one back into fast-convergence
    territory.  Targets 1e-12 relative error."""
    if c <= 0.0 and c == int(c):
        raise ParameterDomain("c must not be a nonpositive integer")
    if z == 1.0:
        if c - a - b <= 0:
            raise Divergent("2F1 diverges at z = 1 when c - a - b <= 0")
        return float(
            math.gamma(c) * math.gamma(c - a - b) / (math.gamma(c - a) * math.gamma(c - b))
        )
    if z > 1.0:
        raise ParameterDomain("real z > 1 is outside the supported region")
    if abs(z) <= 0.9:
        return _hyp2f1_series(a, b, c, z)
    # Euler transformation: (1-z)^(c-a-b) 2F1(c-a, c-b; c; z)
    return (1.0 - z) ** (c - a - b) * _hyp2f1_series(c - a, c - b, c, z)


def _hyp2f1_series(a, b, c, z):
    if abs(z) >= 1.0:
        # Pfaff: map z < -1 into (0, 1)
        if z < -1.0:
            return (1.0 - z) ** (-a) * _hyp2f1_series(a, c - b, c, z / (z - 1.0))
        raise Divergent(f"series does not converge at z={z}")
    term = 1.0
    total = 1.0
    small = 0
    for n in range(SERIES_CAP):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if abs(term) < SERIES_STOP * max(1.0, abs(total)):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise Divergent("2F1 series failed to converge")


def appell_f1(a: float, b1: float, b2: float, c: float, x: float, y: float) -> float:
    """Appell F1 by double series inside the unit bidisk, otherwise by the
    Euler integral (valid for c > a > 0)."""
    if abs(x) < 1.0 and abs(y) < 1.0 and abs(x) + abs(y) < 1.8:
        return _appell_series(a, b1, b2, c, x, y)
    if not (c > a > 0.0):
        raise ParameterDomain("integral path needs c > a > 0")
    return _appell_integral(a, b1, b2, c, x, y)


def _appell_series(a, b1, b2, c, x, y):
    # sum over m with an inner 2F1 in y: F1 = sum_m (a)_m (b1)_m /((c)_m m!)
    #   x^m 2F1(a+m, b2; c+m; y)
    total = 0.0
    coef = 1.0
    small = 0
    for m in range(SERIES_CAP // 100):
        inner = _hyp2f1_series(a + m, b2, c + m, y)
        term = coef * inner
        total += term
        if abs(term) < SERIES_STOP * max(1.0, abs(total)):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
        coef *= (a + m) * (b1 + m) / ((c + m) * (m + 1.0)) * x
    raise Divergent("Appell F1 series failed to converge")


def _appell_integral(a, b1, b2, c, x, y):
    gamma = math.gamma
    pref = gamma(c) / (gamma(a) * gamma(c - a))

    def integrand(u):
        return (
            u ** (a - 1.0)
            * (1.0 - u) ** (c - a - 1.0)
            * (1.0 - x * u) ** (-b1)
            * (1.0 - y * u) ** (-b2)
        )

    val, err = quad(integrand, 0.0, 1.0, limit=400, epsabs=1e-12, epsrel=1e-12)
    if err > 1e-8 * max(1.0, abs(val)):
        raise Divergent(f"Appell integral error {err:.1e}")
    return pref * val


def lauricella_fd(b: float, b_vec, x_vec) -> float:
    """Lauricella F_D^(n)(b; b_1..b_n; b+1; x_1..x_n) via its Euler
    integral b * int_0^1 y^(b-1) prod (1 - x_i y)^(-b_i) dy.

    Complex parameters are allowed in conjugate pairs (the integral stays
    real); the y**(b-1) endpoint singularity for b < 1 is removed by the
    substitution y = u**(1/b)."""
    b_vec = list(b_vec)
    x_vec = list(x_vec)
    if b <= 0.0:
        raise ParameterDomain("b must be positive")
    for bi, xi in zip(b_vec, x_vec):
        if isinstance(xi, complex) or isinstance(bi, complex):
            continue
        if xi >= 1.0 - 1e-9 and bi >= 1.0:
            raise SingularIntegrand(
                f"factor (1 - {xi} y)^(-{bi}) is not integrable at y = 1"
            )
        if xi > 1.0:
            raise ParameterDomain("real x_i must lie at or below one")

    def integrand(u):
        y = u ** (1.0 / b)
        prod = 1.0 + 0.0j
        for bi, xi in zip(b_vec, x_vec):
            prod *= (1.0 - xi * y) ** (-bi)
        return prod

    re, re_err = quad(lambda u: integrand(u).real, 0.0, 1.0, limit=400, epsabs=1e-12, epsrel=1e-12)
    im, _ = quad(lambda u: integrand(u).imag, 0.0, 1.0, limit=400, epsabs=1e-12, epsrel=1e-12)
    if abs(im) > 1e-8 * max(1.0, abs(re)):
        raise SingularIntegrand("Lauricella integral has a residual imaginary part")
    if re_err > 1e-8 * max(1.0, abs(re)):
        raise Divergent(f"Lauricella integral error {re_err:.1e}")
    return re


@dataclass(frozen=True)
class AggregationSpec:
    """Inverse demand P, the two marginal-cost pieces (MC = MC0 + a*MC1),
    and the productivity density G' as a power sum in a, integrated over
    [a_lo, a_hi]."""

    P: PowerSum
    MC0: PowerSum
    MC1: PowerSum
    G_prime: PowerSum
    a_lo: float
    a_hi: float


def _common_alpha(ps: PowerSum, ps2: PowerSum):
    """Common positive grid step alpha such that both power sums factor as
    q**beta * N(q**alpha); the smallest exponent gap divided by a small
    integer."""
    def gaps(p):
        e = sorted(p.exponents())
        return [e[i + 1] - e[i] for i in range(len(e) - 1)]

    all_gaps = gaps(ps) + gaps(ps2)
    if not all_gaps:
        return 1.0
    base = min(all_gaps)
    for denom in range(1, 13):
        alpha = base / denom
        if alpha <= 1e-12:
            continue
        if all(abs(g / alpha - round(g / alpha)) < 1e-9 for g in all_gaps):
            return alpha
    raise PreconditionViolated("no common exponent grid for MC1 and MR - MC0")


def _as_poly(ps: PowerSum, alpha: float):
    """Write ps = q**beta * N(q**alpha); returns (beta, Polynomial N)."""
    beta = min(ps.exponents())
    degs = [round((t.exponent - beta) / alpha) for t in ps.terms]
    for t, d in zip(ps.terms, degs):
        if abs(beta + d * alpha - t.exponent) > 1e-9:
            raise PreconditionViolated(
                f"exponent {t.exponent} off the q**{alpha} grid"
            )
    coeffs = [0.0] * (max(degs) + 1)
    for t, d in zip(ps.terms, degs):
        coeffs[d] += t.coeff
    return beta, Polynomial(coeffs)


def _poly_root_factors(poly: Polynomial):
    """(lead coefficient, reciprocal roots u_i with (1 - u_i x) factors)."""
    if poly.degree == 0:
        return poly.coeffs[0], []
    roots = solve_radicals(poly) if poly.degree <= 4 else solve_iterative(poly)
    lead = poly.coeffs[-1]
    const = lead
    factors = []
    for r in roots:
        if r == 0:
            raise PreconditionViolated("polynomial factor vanishes at x = 0")
        const *= -r
        factors.append(1.0 / r)
    return const, factors


def _power_integral(gamma11, n1_pow, poly1, n2_pow, poly2, x_start, x_end):
    """Oriented integral of x^gamma11 N1(x)^n1_pow N2(x)^n2_pow from
    x_start to x_end via the Lauricella antiderivative
    x^b/b F_D(b; ...; b+1; u x)."""
    c1, f1 = _poly_root_factors(poly1)
    c2, f2 = _poly_root_factors(poly2)
    const = complex(c1) ** n1_pow * complex(c2) ** n2_pow
    if abs(const.imag) > 1e-9 * max(1.0, abs(const.real)):
        raise PreconditionViolated("polynomial factor is negative on the range")
    u = [(u_i, -n1_pow) for u_i in f1] + [(u_i, -n2_pow) for u_i in f2]
    b = gamma11 + 1.0
    if b <= 0:
        raise PreconditionViolated("integral diverges at x = 0")

    def F(x):
        if x == 0.0:
            return 0.0
        xs = [complex(ui) * x for ui, _ in u]
        bs = [p for _, p in u]  # stored as b_i = -(polynomial power)
        return x**b / b * lauricella_fd(b, bs, xs)

    return const.real * (F(x_end) - F(x_start))


def aggregate_power(spec: AggregationSpec, gamma1: float) -> float:
    """int q(a)^gamma1 dG(a) over [a_lo, a_hi] in closed form.

    Uses the substitution a(q) = (MR(q) - MC0(q))/MC1(q) from the firm's
    first-order condition, expands G'(a(q)) a'(q) dq term by term into
    power-times-polynomial-power integrals, and evaluates each with the
    hypergeometric antiderivatives."""
    MR = am_transform(spec.P, 1.0, 1.0)
    D = MR - spec.MC0
    alpha = _common_alpha(spec.MC1, D)
    beta1, N1 = _as_poly(spec.MC1, alpha)
    beta2, N2 = _as_poly(D, alpha)

    # a(q), a'(q) in power-sum pieces:
    #   a = q^(beta2-beta1) N2/N1
    #   a' = (D' MC1 - D MC1')/MC1^2
    Dp = D.derivative()
    M1p = spec.MC1.derivative()

    total = 0.0
    for g_term in spec.G_prime.terms:
        eta = g_term.exponent  # G'(a) term coefficient * a^eta
        g_c = g_term.coeff
        # two pieces of a^eta * a'(q):
        #   D^eta MC1^(-eta-1) D'  and  -D^(eta+1) MC1^(-eta-2) MC1'
        for lead_ps, extra_D, extra_M1 in ((Dp, eta, -eta - 1.0), (M1p, eta + 1.0, -eta - 2.0)):
            sign = 1.0 if lead_ps is Dp else -1.0
            for t in lead_ps.terms:
                # integrand piece: coeff q^(gamma1 + t.e) D^extra_D MC1^extra_M1
                gamma5 = gamma1 + t.exponent
                # pull out the q^beta prefactors of D and MC1
                gamma8 = gamma5 + beta2 * extra_D + beta1 * extra_M1
                # substitute x = q^alpha (orientation a_lo -> a_hi kept)
                gamma11 = (gamma8 + 1.0) / alpha - 1.0
                x_start, x_end = _integration_range(spec, alpha)
                val = _power_integral(gamma11, extra_M1, N1, extra_D, N2, x_start, x_end)
                total += sign * g_c * t.coeff * val / alpha
    return total


def _integration_range(spec, alpha):
    """Oriented x-range (q(a_lo)^alpha, q(a_hi)^alpha): a(q) inverted by
    geometric bisection (monotone on the valid range under the SOC)."""
    def a_of_q(q):
        MR = am_transform(spec.P, 1.0, 1.0)
        return (MR(q) - spec.MC0(q)) / spec.MC1(q)

    qs = []
    for a_target in (spec.a_lo, spec.a_hi):
        lo, hi = 1e-9, 1e9
        f = lambda q: a_of_q(q) - a_target
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            raise PreconditionViolated("productivity bound outside the FOC range")
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if f(mid) * flo <= 0:
                hi = mid
            else:
                lo = mid
                flo = f(lo)
        qs.append(math.sqrt(lo * hi))
    return qs[0] ** alpha, qs[1] ** alpha


def aggregate_firm_integrals(spec: AggregationSpec) -> dict:
    """Closed-form revenue, cost, and profit aggregates over the
    productivity range, cross-checked against direct quadrature of the
    change-of-variables integral."""
    revenue_ps = PowerSum([(t.coeff, t.exponent + 1.0) for t in spec.P.terms])
    cost0_ps = spec.MC0.antiderivative()
    cost1_ps = spec.MC1.antiderivative()

    def aggregate_ps(ps: PowerSum, with_a: bool = False) -> float:
        return sum(
            t.coeff * aggregate_power_with_a(spec, t.exponent, with_a)
            for t in ps.terms
        )

    def aggregate_power_with_a(spec, gamma1, with_a):
        if not with_a:
            return aggregate_power(spec, gamma1)
        # int a * q(a)^gamma1 dG(a): fold one power of a into G'
        lifted = AggregationSpec(
            P=spec.P,
            MC0=spec.MC0,
            MC1=spec.MC1,
            G_prime=PowerSum([(t.coeff, t.exponent + 1.0) for t in spec.G_prime.terms]),
            a_lo=spec.a_lo,
            a_hi=spec.a_hi,
        )
        return aggregate_power(lifted, gamma1)

    revenue = aggregate_ps(revenue_ps)
    cost = aggregate_ps(cost0_ps) + aggregate_ps(cost1_ps, with_a=True)
    oracle = _quadrature_oracle(spec)
    if abs(revenue - oracle["revenue"]) > 1e-6 * max(1.0, abs(oracle["revenue"])):
        raise PreconditionViolated(
            f"closed-form revenue {revenue} disagrees with quadrature {oracle['revenue']}"
        )
    return {
        "revenue": revenue,
        "cost": cost,
        "profit": revenue - cost,
        "oracle_revenue": oracle["revenue"],
        "oracle_cost": oracle["cost"],
    }


def _quadrature_oracle(spec: AggregationSpec) -> dict:
    """Direct quadrature of the aggregates in the productivity variable."""
    MR = am_transform(spec.P, 1.0, 1.0)

    def q_of_a(a_val):
        lo, hi = 1e-9, 1e9
        f = lambda q: (MR(q) - spec.MC0(q)) / spec.MC1(q) - a_val
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if f(lo) * f(mid) <= 0:
                hi = mid
            else:
                lo = mid
        return math.sqrt(lo * hi)

    def rev_integrand(a_val):
        q = q_of_a(a_val)
        return q * spec.P(q) * spec.G_prime(a_val)

    def cost_integrand(a_val):
        q = q_of_a(a_val)
        return (
            spec.MC0.antiderivative()(q) + a_val * spec.MC1.antiderivative()(q)
        ) * spec.G_prime(a_val)

    rev, _ = quad(rev_integrand, spec.a_lo, spec.a_hi, limit=200)
    cost, _ = quad(cost_integrand, spec.a_lo, spec.a_hi, limit=200)
    return {"revenue": rev, "cost": cost}
