"""Algebra of finite power sums.

A power sum is a finite linear combination sum_j c_j * q**e_j with real
coefficients and real exponents, defined for q > 0.  This family is closed
under the average-marginal transform F -> a*F + b*q*F', which is what makes
demand, marginal revenue, cost, and surplus all live in the same class and
lets first-order conditions collapse to polynomials after substituting a
power of q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InconsistentReport,
    LogTermRejected,
    NonIntegrable,
    NonPositiveArgument,
    NotEvenlySpaced,
    SingularDesign,
)
from .roots import Polynomial

MERGE_TOL = 1e-12
MAX_LEVEL = 100


@dataclass(frozen=True)
class PowerTerm:
    """One term coeff * q**exponent."""

    coeff: float
    exponent: float

    def __post_init__(self):
        if not (math.isfinite(self.coeff) and math.isfinite(self.exponent)):
            raise ValueError("power term requires finite coefficient and exponent")


class PowerSum:
    """Immutable ordered sum of power terms, exponents strictly increasing.

    Terms whose exponents agree to within ``MERGE_TOL`` are merged at
    construction, and zero coefficients are dropped.  Log-multiplied terms
    (``log_power != 0``) are outside the supported class and rejected.
    """

    __slots__ = ("terms",)

    def __init__(self, terms):
        cleaned = []
        for t in terms:
            if isinstance(t, PowerTerm):
                c, e = t.coeff, t.exponent
            elif len(t) == 3:
                c, e, lp = t
                if lp != 0:
                    raise LogTermRejected(
                        "log-multiplied power terms are not supported"
                    )
            else:
                c, e = t
            if not (math.isfinite(c) and math.isfinite(e)):
                raise ValueError("non-finite term")
            cleaned.append((float(e), float(c)))
        cleaned.sort()
        merged = []
        for e, c in cleaned:
            if merged and abs(e - merged[-1][0]) <= MERGE_TOL:
                merged[-1][1] += c
            else:
                merged.append([e, c])
        object.__setattr__(
            self,
            "terms",
            tuple(PowerTerm(c, e) for e, c in merged if c != 0.0),
        )

    def __setattr__(self, *a):  # immutability
        raise AttributeError("PowerSum is immutable")

    # -- basic algebra -------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other):
        return isinstance(other, PowerSum) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        body = " + ".join(f"{t.coeff:g}*q^{t.exponent:g}" for t in self.terms)
        return f"PowerSum({body or '0'})"

    def __add__(self, other):
        return PowerSum(list(self.terms) + list(other.terms))

    def __sub__(self, other):
        return PowerSum(
            list(self.terms) + [(-t.coeff, t.exponent) for t in other.terms]
        )

    def __neg__(self):
        return PowerSum([(-t.coeff, t.exponent) for t in self.terms])

    def scale(self, k: float) -> "PowerSum":
        return PowerSum([(k * t.coeff, t.exponent) for t in self.terms])

    def exponents(self):
        return tuple(t.exponent for t in self.terms)

    def coeffs(self):
        return tuple(t.coeff for t in self.terms)

    def derivative(self) -> "PowerSum":
        """d/dq as a power sum."""
        return PowerSum([(t.coeff * t.exponent, t.exponent - 1.0) for t in self.terms])

    def antiderivative(self) -> "PowerSum":
        """Integral from 0, valid when all exponents exceed -1."""
        for t in self.terms:
            if t.exponent <= -1.0:
                raise NonIntegrable(
                    f"exponent {t.exponent} is not integrable at zero"
                )
        return PowerSum([(t.coeff / (t.exponent + 1.0), t.exponent + 1.0) for t in self.terms])

    def shift_exponents(self, delta: float) -> "PowerSum":
        return PowerSum([(t.coeff, t.exponent + delta) for t in self.terms])

    def __call__(self, q):
        return evaluate(self, q)

    def to_json(self):
        return {"terms": [{"coeff": t.coeff, "exponent": t.exponent} for t in self.terms]}

    @classmethod
    def from_json(cls, obj):
        return cls([(t["coeff"], t["exponent"]) for t in obj["terms"]])


@dataclass(frozen=True)
class TractabilityReport:
    """Even grid a + gap*i, i in index_set, covering a power sum's exponents."""

    level: int
    base: float
    gap: float
    index_set: tuple

    def grid_exponent(self, i: int) -> float:
        return self.base + self.gap * i


def evaluate(F: PowerSum, q) -> float:
    """Value of the power sum at q > 0 (arrays allowed)."""
    qa = np.asarray(q, dtype=float)
    if np.any(qa <= 0.0):
        raise NonPositiveArgument("power sums are defined for q > 0 only")
    out = np.zeros_like(qa)
    for t in F.terms:
        out = out + t.coeff * qa**t.exponent
    if np.isscalar(q) or qa.ndim == 0:
        return float(out)
    return out


def am_transform(F: PowerSum, a: float, b: float) -> PowerSum:
    """Average-marginal transform a*F + b*q*F'.

    Term-wise c*q**e maps to (a + b*e)*c*q**e; marginal revenue of inverse
    demand P is am_transform(P, 1, 1).
    """
    return PowerSum([((a + b * t.exponent) * t.coeff, t.exponent) for t in F.terms])


def consumer_surplus(P: PowerSum, per_unit: bool = False) -> PowerSum:
    """Consumer surplus int_0^q P - q*P(q) of inverse demand P.

    Term-wise c*q**e maps to (-e/(e+1))*c*q**(e+1); requires every exponent
    above -1 for integrability at zero.  With ``per_unit`` the result is
    divided by q (all exponents shifted down by one).
    """
    for t in P.terms:
        if t.exponent <= -1.0:
            raise NonIntegrable(
                f"demand exponent {t.exponent} <= -1 is not integrable at 0"
            )
    cs = PowerSum(
        [
            (-t.exponent / (t.exponent + 1.0) * t.coeff, t.exponent + 1.0)
            for t in P.terms
        ]
    )
    return cs.shift_exponents(-1.0) if per_unit else cs


def tractability_level(G: PowerSum, tol: float = 1e-9, max_level: int = MAX_LEVEL) -> TractabilityReport:
    """Smallest k such that the exponents sit on an even grid base + gap*{0..k}.

    The level counts grid slots spanned, including missing interior powers,
    so {1, 0, -1/2} is level 3 (gap 1/2 with q**(1/2) missing) while
    {1/2, 0, -1/2} is level 2.  Raises NotEvenlySpaced when no grid with
    level <= max_level fits within tol.
    """
    if len(G) == 0:
        raise ValueError("empty power sum has no tractability level")
    exps = sorted(G.exponents())
    if len(exps) == 1:
        return TractabilityReport(level=0, base=exps[0], gap=1.0, index_set=(0,))
    base = exps[0]
    span = exps[-1] - base
    for level in range(len(exps) - 1, max_level + 1):
        gap = span / level
        if gap <= tol:
            continue
        idx = []
        ok = True
        for e in exps:
            i = round((e - base) / gap)
            if abs(base + i * gap - e) > tol:
                ok = False
                break
            idx.append(i)
        if ok and len(set(idx)) == len(idx):
            return TractabilityReport(level=level, base=base, gap=gap, index_set=tuple(idx))
    raise NotEvenlySpaced(
        f"exponents {exps} do not fit an even grid with level <= {max_level}"
    )


def to_polynomial(G: PowerSum, report: TractabilityReport) -> Polynomial:
    """Polynomial in x = q**gap obtained by factoring q**base out of G.

    A root x maps back through q = x**(1/gap).
    """
    coeffs = [0.0] * (report.level + 1)
    for t in G.terms:
        i = round((t.exponent - report.base) / report.gap)
        if not (0 <= i <= report.level) or abs(
            report.base + i * report.gap - t.exponent
        ) > 1e-9 * max(1.0, abs(t.exponent)):
            raise InconsistentReport(
                f"exponent {t.exponent} does not fit the reported grid"
            )
        coeffs[i] += t.coeff
    return Polynomial(coeffs)


@dataclass
class FitResult:
    power_sum: PowerSum
    exponents: tuple
    rmse: float
    max_abs_dev: float


def _lstsq_fit(q, v, exponents):
    X = np.column_stack([q**e for e in exponents])
    rank = np.linalg.matrix_rank(X)
    if rank < len(exponents):
        raise SingularDesign(
            f"design matrix for exponents {exponents} is rank deficient ({rank})"
        )
    beta, *_ = np.linalg.lstsq(X, v, rcond=None)
    resid = X @ beta - v
    return beta, float(np.sqrt(np.mean(resid**2))), float(np.max(np.abs(resid)))


def fit_power_sum(samples, exponents=None, exponent_grid=None) -> FitResult:
    """Least-squares power-sum fit on (q, value) samples.

    Either ``exponents`` (a fixed list) or ``exponent_grid`` (an iterable of
    candidate exponent lists searched by residual norm) must be given.  The
    sample moments are plain quantile-grid residuals with uniform weights.
    """
    samples = [(float(q), float(v)) for q, v in samples]
    if any(q <= 0 for q, _ in samples):
        raise NonPositiveArgument("fit requires q > 0 samples")
    q = np.array([s[0] for s in samples])
    v = np.array([s[1] for s in samples])
    if exponents is not None:
        candidates = [tuple(exponents)]
    elif exponent_grid is not None:
        candidates = [tuple(c) for c in exponent_grid]
    else:
        raise ValueError("either exponents or exponent_grid is required")
    best = None
    for cand in candidates:
        if len(samples) < len(cand):
            raise SingularDesign("fewer samples than free coefficients")
        try:
            beta, rmse, maxdev = _lstsq_fit(q, v, cand)
        except SingularDesign:
            if len(candidates) == 1:
                raise
            continue
        if best is None or rmse < best[1]:
            best = (beta, rmse, maxdev, cand)
    if best is None:
        raise SingularDesign("no candidate exponent set had full rank")
    beta, rmse, maxdev, cand = best
    ps = PowerSum([(b, e) for b, e in zip(beta, cand)])
    return FitResult(power_sum=ps, exponents=cand, rmse=rmse, max_abs_dev=maxdev)


def income_form(m: float, a_minus: float, a_plus: float, b: float, q0: float = 1.0) -> PowerSum:
    """Three-power inverse demand m*(1 - a_minus*(q/q0)**-b - a_plus*(q/q0)**b)."""
    return PowerSum(
        [
            (m, 0.0),
            (-m * a_minus * q0**b, -b),
            (-m * a_plus * q0 ** (-b), b),
        ]
    )


def fit_income_form(samples, b_grid) -> dict:
    """Grid search over b for the constrained three-power income form.

    The constraint a_minus = 1 - a_plus is imposed by the two-column design
    [1 - q**-b, q**-b - q**b], so the fitted curve always passes through
    zero at q = 1.
    """
    q = np.array([float(s[0]) for s in samples])
    v = np.array([float(s[1]) for s in samples])
    if np.any(q <= 0):
        raise NonPositiveArgument("fit requires q > 0 samples")
    best = None
    for b in b_grid:
        X = np.column_stack([1.0 - q ** (-b), q ** (-b) - q**b])
        beta, *_ = np.linalg.lstsq(X, v, rcond=None)
        resid = X @ beta - v
        rmse = float(np.sqrt(np.mean(resid**2)))
        if best is None or rmse < best["rmse"]:
            m, ma_plus = beta
            best = {
                "b": float(b),
                "m": float(m),
                "a_plus": float(ma_plus / m),
                "a_minus": float(1.0 - ma_plus / m),
                "rmse": rmse,
                "max_abs_dev": float(np.max(np.abs(resid))),
            }
    if best is None:
        raise ValueError("empty b grid")
    return best
