"""Inverse Laplace-log representations, the discrete approximation with
Euler-Maclaurin remainder accounting, and complete-monotonicity /
pass-through classification of demand forms.

A function of q is represented as an integral of q**(-t) against a measure
on the exponent axis: point masses, delta-derivative terms (an order-n term
at t0 contributes weight * (log q)**n * q**(-t0)), and sampled densities.
Complete monotonicity of consumer surplus in -log q pins down whether the
constant-cost pass-through rate falls with quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.integrate import quad

from .errors import CatalogMiss, DivergentDensity, GridTooCoarse
from .forms import PowerSum, consumer_surplus

EULER_GAMMA = float(mp.euler)


@dataclass(frozen=True)
class DensityPart:
    """Sampled density over an exponent interval.

    With ``subtract_indicator`` the kernel is q**(-t) - 1_{t > -1}, the
    computable regularization for densities behaving like 1/t near zero.
    """

    fn: object
    support: tuple
    subtract_indicator: bool = False


@dataclass(frozen=True)
class LaplaceMeasure:
    masses: tuple = ()             # (t, weight)
    delta_derivs: tuple = ()       # (t, order, weight)
    density: DensityPart | None = None

    def __post_init__(self):
        locs = [t for t, _ in self.masses]
        if len(set(locs)) != len(locs):
            raise ValueError("mass locations must be distinct")
        for _, order, _ in self.delta_derivs:
            if order < 1:
                raise ValueError("delta-derivative order must be >= 1")


def synthesize(measure: LaplaceMeasure, q: float) -> float:
    """Value at q of the function the measure represents."""
    if q <= 0:
        raise ValueError("q must be positive")
    s = math.log(q)
    total = 0.0
    for t, wgt in measure.masses:
        total += wgt * q ** (-t)
    for t, order, wgt in measure.delta_derivs:
        total += wgt * s**order * q ** (-t)
    if measure.density is not None:
        dens = measure.density
        lo, hi = dens.support
        if dens.subtract_indicator:
            integrand = lambda t: dens.fn(t) * (q ** (-t) - (1.0 if t > -1.0 else 0.0))
        else:
            integrand = lambda t: dens.fn(t) * q ** (-t)
        cuts = sorted([lo] + [p for p in (-1.0, 0.0) if lo < p < hi] + [hi])
        val = err = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            piece, perr = quad(integrand, a, b, limit=200)
            val += piece
            err += perr
        if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise DivergentDensity(
                f"density quadrature error {err:.2e} at q={q}"
            )
        total += val
    return total


def power_sum_to_measure(P: PowerSum) -> LaplaceMeasure:
    """Exponent e with coefficient c maps to a mass of weight c at t = -e."""
    return LaplaceMeasure(masses=tuple((-t.exponent, t.coeff) for t in P.terms))


def measure_to_power_sum(measure: LaplaceMeasure) -> PowerSum:
    if measure.delta_derivs or measure.density is not None:
        raise ValueError("only pure point-mass measures are power sums")
    return PowerSum([(wgt, -t) for t, wgt in measure.masses])


def utility_to_price_measure(u: LaplaceMeasure) -> LaplaceMeasure:
    """p(t) = (1 - t) * u(t - 1): differentiate U(q) term by term."""
    return LaplaceMeasure(
        masses=tuple(
            ((t + 1.0), (1.0 - (t + 1.0)) * wgt) for t, wgt in u.masses if t != 0.0
        )
    )


# ---------------------------------------------------------------------------
# discrete approximation (trapezoid + Euler-Maclaurin corrections)

_BERNOULLI = {2: 1.0 / 6.0, 4: -1.0 / 30.0, 6: 1.0 / 42.0, 8: -1.0 / 30.0, 10: 5.0 / 66.0}


def _h_derivative(f, q, t, order, scale):
    """order-th derivative of h(t) = f(t) q**(-t) by central differences."""
    h = scale * (0.3 if order > 2 else 0.05)
    fn = lambda x: f(x) * q ** (-x)
    if order == 0:
        return fn(t)
    coeffs = {
        1: ([-0.5, 0.0, 0.5], 1),
        2: ([1.0, -2.0, 1.0], 1),
        3: ([-0.5, 1.0, 0.0, -1.0, 0.5], 2),
        4: ([1.0, -4.0, 6.0, -4.0, 1.0], 2),
        5: ([-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5], 3),
    }
    if order not in coeffs:
        raise ValueError("derivative order too high for the stencil table")
    c, half = coeffs[order]
    val = sum(ci * fn(t + (i - half) * h) for i, ci in enumerate(c))
    return val / h**order


@dataclass
class DiscreteApprox:
    approx: float
    trapezoid: float
    r2_correction: float
    r3_bound: float


def discrete_approx(f, t_min: float, t_max: float, dt: float, q: float, m: int = 1,
                    tol: float | None = None) -> DiscreteApprox:
    """Trapezoid sum of q**(-t) f(t) over the grid with endpoint
    half-weights, the order-m Euler-Maclaurin correction, and the
    remainder bound |R3| <= 2 zeta(2m+1) dt^(2m+1) (2 pi)^(-2m-1) int|h^(2m+1)|.
    """
    n_steps = int(round((t_max - t_min) / dt))
    if n_steps < 1 or abs(t_min + n_steps * dt - t_max) > 1e-9 * max(1.0, abs(t_max)):
        raise ValueError("grid must have at least two points and integer steps")
    grid = t_min + dt * np.arange(n_steps + 1)
    vals = np.array([f(t) * q ** (-t) for t in grid])
    trap = dt * (vals.sum() - 0.5 * vals[0] - 0.5 * vals[-1])
    r2 = 0.0
    for k in range(1, m + 1):
        b2k = _BERNOULLI[2 * k]
        d_lo = _h_derivative(f, q, t_min, 2 * k - 1, dt)
        d_hi = _h_derivative(f, q, t_max, 2 * k - 1, dt)
        r2 += b2k / math.factorial(2 * k) * dt ** (2 * k) * (d_lo - d_hi)
    order = 2 * m + 1
    n_samp = max(64, 4 * n_steps)
    ts = np.linspace(t_min, t_max, n_samp)
    dvals = np.abs([_h_derivative(f, q, t, order, dt) for t in ts])
    integral_abs = float(np.trapezoid(dvals, ts))
    r3 = (
        2.0
        * float(mp.zeta(order))
        * dt**order
        / (2.0 * math.pi) ** order
        * integral_abs
    )
    if tol is not None and r3 > tol:
        raise GridTooCoarse(f"remainder bound {r3:.2e} exceeds tolerance {tol:.2e}")
    return DiscreteApprox(approx=trap + r2, trapezoid=trap, r2_correction=r2, r3_bound=r3)


# ---------------------------------------------------------------------------
# named demand catalog and complete monotonicity


@dataclass(frozen=True)
class CatalogForm:
    """Named inverse demand with an mpmath-evaluable quantile closure and,
    where available, the structure of its Laplace representation.

    ``structure`` carries the leading terms of p(t): point masses,
    delta-derivative terms, and the sign of t*density(t) on any continuous
    part.  Complete monotonicity is equivalent to t*p(t) being a
    nonnegative measure supported left of one, which the structure decides
    exactly even when the violation sits too deep for finite-difference
    derivatives ladders."""

    name: str
    price: object                  # mpmath-friendly P(q)
    q_range: tuple
    cm_expected: bool | None       # Theorem membership, None = unlisted
    params: dict = field(default_factory=dict)
    structure: LaplaceMeasure | None = None
    density_tp_sign: int = 0       # sign of t*density(t) on the support


def classify_measure(measure: LaplaceMeasure, density_tp_sign: int = 0) -> dict:
    """Apply the t*p(t) test to a Laplace price representation.

    Multiplying by t kills a mass at zero, turns a mass at t0 != 0 into
    t0*weight there, and maps an order-n delta derivative at t0 into
    t0*delta^(n) - n*delta^(n-1).  The result is a nonnegative measure --
    the complete-monotonicity condition -- only if no derivative component
    of order >= 1 survives, every remaining mass is nonnegative, and every
    mass sits at t <= 1 (consumer-surplus support left of zero).
    """
    reasons = []
    for t0, order, wgt in measure.delta_derivs:
        if wgt == 0.0:
            continue
        surviving = order if t0 != 0.0 else order - 1
        if surviving >= 1:
            reasons.append(f"delta^{order} term at t={t0} leaves a derivative component")
        elif t0 == 0.0 and -order * wgt < 0.0:
            reasons.append(f"delta' at zero contributes a negative mass ({-order * wgt:g})")
    for t0, wgt in measure.masses:
        if t0 > 1.0 + 1e-12:
            reasons.append(f"mass at t={t0} beyond the integrability boundary")
        elif t0 != 0.0 and t0 * wgt < 0.0:
            reasons.append(f"mass {wgt:g} at t={t0} makes t*p negative")
    if measure.density is not None and density_tp_sign < 0:
        reasons.append("density part has negative t*p")
    return {"cm": "no" if reasons else "yes", "reasons": reasons}


def _normal_quantile(u):
    return mp.sqrt(2) * mp.erfinv(2 * u - 1)


def gumbel_measure(alpha: float, beta: float) -> LaplaceMeasure:
    """Regularized representation of P(q) = alpha + beta*log(-log q): a
    mass alpha - beta*euler_gamma at zero plus the density beta/t under the
    indicator-subtracted kernel."""
    return LaplaceMeasure(
        masses=((0.0, alpha - beta * EULER_GAMMA),),
        density=DensityPart(
            fn=lambda t, b=beta: b / t, support=(-math.inf, 0.0), subtract_indicator=True
        ),
    )


def bp_measure(p0: float, p_t: float, t: float) -> LaplaceMeasure:
    return LaplaceMeasure(masses=((0.0, p0), (t, p_t)))


def _logistic_structure(mu, beta, n_terms=8):
    masses = ((0.0, mu),) + tuple((-float(j), -beta / j) for j in range(1, n_terms + 1))
    return LaplaceMeasure(masses=masses, delta_derivs=((0.0, 1, -beta),))


def _log_logistic_structure(sigma, g, n_terms=6):
    masses = []
    for n in range(n_terms):
        w = sigma * (-1.0) ** n * float(mp.binomial(1.0 / g, n))
        masses.append((1.0 / g - n, w))
    return LaplaceMeasure(masses=tuple(masses))


def _normal_structure(mu, sigma):
    # Taylor weights of P(exp(s)) at the median: the delta-derivative
    # representation of the normal quantile demand
    w1 = -math.sqrt(math.pi / 2.0) * sigma
    w2 = -0.5 * math.sqrt(math.pi / 2.0) * sigma
    w3 = (-math.sqrt(2.0) * math.pi**1.5 - 2.0 * math.sqrt(2.0 * math.pi)) * sigma / 24.0
    return LaplaceMeasure(
        masses=((0.0, mu),),
        delta_derivs=((0.0, 1, w1), (0.0, 2, w2), (0.0, 3, w3)),
    )


def _lognormal_structure(mu, sigma):
    w1 = -math.sqrt(math.pi / 2.0) * math.exp(mu) * sigma
    w2 = 0.25 * math.pi * math.exp(mu) * sigma**2 - 0.5 * math.sqrt(math.pi / 2.0) * math.exp(mu) * sigma
    return LaplaceMeasure(
        masses=((0.0, math.exp(mu)),),
        delta_derivs=((0.0, 1, w1), (0.0, 2, w2)),
    )


def _aids_structure(alpha, beta, n_terms=5):
    # masses (m+1)^(m-1) c^(m+1) / (m! beta^m) at t = -m, c = exp(-alpha/beta)
    c = math.exp(-alpha / beta)
    masses = [(0.0, c)]
    for m_ in range(1, n_terms):
        w = (m_ + 1.0) ** (m_ - 1) * c ** (m_ + 1) / (math.factorial(m_) * beta**m_)
        masses.append((-float(m_), w))
    return LaplaceMeasure(masses=tuple(masses))


def build_catalog() -> dict:
    forms = [
        CatalogForm(
            "constant_elasticity",
            lambda q, eps=4.0: 2.0 * q ** (-1.0 / eps),
            (0.05, 0.95),
            True,
            {"eps": 4.0},
            structure=LaplaceMeasure(masses=((0.25, 2.0),)),
        ),
        CatalogForm(
            "bp",
            lambda q, eps=4.0: 1.0 + 2.0 * q ** (-1.0 / eps),
            (0.05, 0.95),
            True,
            {"eps": 4.0, "p0": 1.0},
            structure=LaplaceMeasure(masses=((0.0, 1.0), (0.25, 2.0))),
        ),
        CatalogForm(
            "linear",
            lambda q: 2.0 - q,
            (0.05, 0.95),
            True,
            {"a": 2.0, "b": 1.0},
            structure=LaplaceMeasure(masses=((0.0, 2.0), (-1.0, -1.0))),
        ),
        CatalogForm(
            "gumbel",
            lambda q: 6.0 + mp.log(-mp.log(q)),
            (0.05, 0.7),
            True,
            {"alpha": 6.0, "beta": 1.0},
            structure=gumbel_measure(6.0, 1.0),
            density_tp_sign=+1,  # t * (beta/t) = beta > 0
        ),
        CatalogForm(
            "logistic",
            lambda q: 6.0 - mp.log(q / (1 - q)),
            (0.05, 0.95),
            True,
            {"mu": 6.0, "beta": 1.0},
            structure=_logistic_structure(6.0, 1.0),
        ),
        CatalogForm(
            "log_logistic",
            lambda q, g=2.5: (q / (1 - q)) ** (-1.0 / g),
            (0.05, 0.95),
            True,
            {"gamma": 2.5},
            structure=_log_logistic_structure(1.0, 2.5),
        ),
        CatalogForm(
            "weibull",
            lambda q, a=2.0: 2.0 * (-mp.log(q)) ** (1.0 / a),
            (0.05, 0.95),
            True,
            {"alpha": 2.0},
            structure=LaplaceMeasure(
                masses=(),
                density=DensityPart(
                    fn=lambda t: float("nan"), support=(-math.inf, 0.0)
                ),
            ),
            density_tp_sign=+1,  # fractional-power density, t*p > 0 for alpha > 1
        ),
        CatalogForm(
            "normal",
            lambda q: 6.0 - _normal_quantile(q),
            (0.1, 0.9),
            False,
            {"mu": 6.0, "sigma": 1.0},
            structure=_normal_structure(6.0, 1.0),
        ),
        CatalogForm(
            "lognormal",
            lambda q: mp.exp(1.0 - 0.8 * _normal_quantile(q)),
            (0.1, 0.9),
            False,
            {"mu": 1.0, "sigma": 0.8},
            structure=_lognormal_structure(1.0, 0.8),
        ),
        CatalogForm(
            "aids",
            lambda q: -(-2.0) * mp.lambertw(-q * mp.exp(-1.0 / -2.0) / -2.0) / q,
            (0.1, 0.9),
            False,
            {"alpha": 1.0, "beta": -2.0},
            structure=_aids_structure(1.0, -2.0),
        ),
    ]
    return {f.name: f for f in forms}


CATALOG = build_catalog()


def _cs_s_derivative_coeffs(max_order: int):
    """Coefficients a[n][k] in d^n CS/ds^n = sum_k a[n][k] q^(k+1) P^(k)(q).

    From CS'(s) = -q^2 P'(q) and the recursion a[n+1][k] =
    (k+1) a[n][k] + a[n][k-1] induced by applying q d/dq.
    """
    rows = {1: {1: -1.0}}
    for n in range(1, max_order):
        nxt = {}
        for k, c in rows[n].items():
            nxt[k] = nxt.get(k, 0.0) + (k + 1) * c
            nxt[k + 1] = nxt.get(k + 1, 0.0) + c
        rows[n + 1] = nxt
    return rows


def _price_derivatives(form: CatalogForm, q: float, max_k: int, dps: int = 40):
    """P^(k)(q) for k = 1..max_k by arbitrary-precision differentiation."""
    with mp.workdps(dps):
        return [
            float(mp.diff(form.price, mp.mpf(q), n=k, relative=True, h=mp.mpf("1e-6")))
            for k in range(1, max_k + 1)
        ]


def cs_s_derivatives(form: CatalogForm, q: float, max_order: int):
    """d^n CS/ds^n at s = log q for n = 1..max_order (all must be >= 0 for
    the complete monotonicity criterion)."""
    coeffs = _cs_s_derivative_coeffs(max_order)
    derivs = _price_derivatives(form, q, max_k=max_order)
    out = []
    for n in range(1, max_order + 1):
        out.append(
            sum(c * q ** (k + 1) * derivs[k - 1] for k, c in coeffs[n].items())
        )
    return out


def numeric_cm_test(form: CatalogForm, order: int = 10, n_grid: int = 7) -> dict:
    """Derivative-ladder CM test on a log-spaced quantity grid.

    Finite-difference ladders can only see violations that surface at the
    tested orders and quantities; a "yes" from this path is therefore a
    failure to find a violation, not a proof.
    """
    lo, hi = form.q_range
    qs = np.exp(np.linspace(math.log(lo), math.log(hi), n_grid))
    first_violation = None
    inconclusive = False
    for q in qs:
        derivs = cs_s_derivatives(form, float(q), order)
        scale = max(abs(d) for d in derivs)
        floor = 1e3 * 1e-30 * max(1.0, scale)
        for n, d in enumerate(derivs, start=1):
            if d < -max(floor, 1e-18 * scale):
                if first_violation is None or n < first_violation:
                    first_violation = n
            elif abs(d) <= floor and d < 0:
                inconclusive = True
    if first_violation is not None:
        return {"cm": "no", "first_violation_order": first_violation, "path": "numeric"}
    if inconclusive:
        return {"cm": "inconclusive", "first_violation_order": None, "path": "numeric"}
    return {"cm": "yes", "first_violation_order": None, "path": "numeric"}


def complete_monotonicity_test(form, order: int = 10, n_grid: int = 7) -> dict:
    """CM verdict for a PowerSum (exact), or a named catalog form.

    PowerSums are CM exactly when every consumer-surplus term has a
    nonnegative coefficient and positive exponent (mass support on the
    negative t axis).  Catalog forms combine the numeric derivative ladder
    with the structural t*p(t) test on the registered Laplace
    representation: the structural test decides violations that sit deeper
    than finite-difference ladders can reach (normal and lognormal are the
    canonical cases).
    """
    if isinstance(form, PowerSum):
        cs = consumer_surplus(form)
        ok = all(t.coeff >= 0.0 and t.exponent > 0.0 for t in cs.terms)
        return {"cm": "yes" if ok else "no", "first_violation_order": None, "path": "exact"}
    if isinstance(form, str):
        if form not in CATALOG:
            raise CatalogMiss(f"unknown demand form {form!r}")
        form = CATALOG[form]
    numeric = numeric_cm_test(form, order=order, n_grid=n_grid)
    if numeric["cm"] == "no":
        return numeric
    if form.structure is not None:
        structural = classify_measure(form.structure, form.density_tp_sign)
        if structural["cm"] == "no":
            return {
                "cm": "no",
                "first_violation_order": None,
                "path": "structure",
                "reasons": structural["reasons"],
            }
    return numeric


def passthrough_profile(form, q_grid=None, tol: float = 1e-8) -> dict:
    """rho(q) = CS'(s)/CS''(s) on a grid plus a monotonicity verdict in
    {constant, decreasing, increasing, mixed}."""
    if isinstance(form, str):
        if form not in CATALOG:
            raise CatalogMiss(f"unknown demand form {form!r}")
        form = CATALOG[form]
    if isinstance(form, PowerSum):
        cs = consumer_surplus(form)
        if q_grid is None:
            q_grid = np.logspace(-2, 0, 25)
        rho = []
        for q in q_grid:
            d1 = sum(t.coeff * t.exponent * q**t.exponent for t in cs.terms)
            d2 = sum(t.coeff * t.exponent**2 * q**t.exponent for t in cs.terms)
            rho.append(d1 / d2)
    else:
        if q_grid is None:
            lo, hi = form.q_range
            q_grid = np.exp(np.linspace(math.log(lo), math.log(hi), 25))
        rho = []
        for q in q_grid:
            d1, d2 = cs_s_derivatives(form, float(q), 2)
            rho.append(d1 / d2)
    rho = np.asarray(rho)
    scale = max(1.0, float(np.max(np.abs(rho))))
    diffs = np.diff(rho)
    if np.all(np.abs(rho - rho[0]) <= tol * scale):
        verdict = "constant"
    elif np.all(diffs <= tol * scale):
        verdict = "decreasing"
    elif np.all(diffs >= -tol * scale):
        verdict = "increasing"
    else:
        verdict = "mixed"
    return {"q": np.asarray(q_grid), "rho": rho, "verdict": verdict}


