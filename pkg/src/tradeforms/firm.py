"""Single-firm export machinery under increasing marginal production cost.

With demand elasticity fixed at five, per-destination revenue is
R(q) = kappa_R*q**0.8/0.8 and shipping labor kappa_LT*q**0.6/0.6, so the
destination FOC is quadratic in q**(-1/5) and the delivered quantity has a
closed form in the firm's marginal production cost.  Total output solves a
scalar fixed point; destination choice is an unconstrained submodular
maximization handled by randomized double greedy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NoPositiveRoot

SIGMA = 5.0
NU_R = 1.0 - 1.0 / SIGMA      # 0.8
NU_LT = 0.6
PROFIT_CUTOFF_COEF = 15.0 / 64.0
DISC_CUTOFF_COEF = 0.25


@dataclass(frozen=True)
class DestinationParams:
    """Revenue prefactor, shipping-cost prefactor, iceberg factor, origin
    wage, and export fixed cost (labor units) for one market."""

    kappa_R: float
    kappa_LT: float = 0.0
    tau: float = 1.0
    w_origin: float = 1.0
    f_x: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kappa_R < 0 or self.kappa_LT < 0 or self.tau < 1.0 or self.w_origin <= 0:
            raise ValueError("invalid destination parameters")

    @property
    def is_frictionless(self) -> bool:
        return self.kappa_LT == 0.0

    def mc_cutoff(self) -> float:
        """Marginal production cost above which exporting here earns
        nothing: 15*kappa_R^2 / (64*w*tau*kappa_LT)."""
        if self.is_frictionless:
            return math.inf
        return PROFIT_CUTOFF_COEF * self.kappa_R**2 / (self.w_origin * self.tau * self.kappa_LT)

    def disc_cutoff(self) -> float:
        """Cost level where the destination FOC stops having real roots."""
        if self.is_frictionless:
            return math.inf
        return DISC_CUTOFF_COEF * self.kappa_R**2 / (self.w_origin * self.tau * self.kappa_LT)


@dataclass(frozen=True)
class FirmParams:
    """Variable-cost prefactor and marginal-cost elasticity; marginal cost
    of production is kappa_C * w * q**alpha."""

    kappa_C: float
    alpha: float = 0.0
    f_o: float = 0.0
    origin: str = ""

    def __post_init__(self):
        if self.kappa_C <= 0 or self.alpha < 0:
            raise ValueError("invalid firm parameters")

    def mc(self, w: float, q: float) -> float:
        return self.kappa_C * w * q**self.alpha


def single_export_quantity(dest: DestinationParams, mc: float) -> float:
    """Delivered quantity maximizing R(q) - tau*mc*q - w*L_T(q) at marginal
    cost mc; zero when exporting cannot earn a positive profit.

    The profitability cutoff sits strictly inside the region where the FOC
    still has real roots, so exporting shuts down before the closed form
    degenerates; zero-profit ties break to not exporting.
    """
    if mc <= 0:
        raise ValueError("marginal cost must be positive")
    if dest.kappa_R == 0.0:
        return 0.0
    if dest.is_frictionless:
        return (dest.kappa_R / (dest.tau * mc)) ** SIGMA
    if mc >= dest.mc_cutoff():
        return 0.0
    disc = dest.kappa_R**2 - 4.0 * dest.w_origin * dest.kappa_LT * dest.tau * mc
    return ((dest.kappa_R + math.sqrt(disc)) / (2.0 * dest.tau * mc)) ** SIGMA


def destination_surplus(dest: DestinationParams, q_f: float) -> float:
    """Revenue minus shipping labor for delivered quantity q_f (excluding
    production cost and the export fixed cost)."""
    if q_f == 0.0:
        return 0.0
    rev = dest.kappa_R * q_f**NU_R / NU_R
    ship = dest.w_origin * dest.kappa_LT * q_f**NU_LT / NU_LT
    return rev - ship


def rank_destinations(dests) -> list:
    """Cutoff-descending order: markets that stay profitable at higher
    marginal cost come first."""
    return sorted(dests, key=lambda d: (-d.mc_cutoff(), d.name))


@dataclass
class TotalQuantitySolution:
    q_total: float
    mc: float
    q_domestic: float
    deliveries: dict          # destination name -> delivered quantity
    served: tuple             # names actually shipped to, cutoff order
    profit_gross: float       # before f_o and f_x


def _prefix_root(firm, w, domestic, prefix):
    """Unique root of q = q_dom(MC(q)) + sum tau*q_f(MC(q)) with every
    prefix destination forced active, or None when the prefix cannot be
    supported below its discriminant cutoff."""

    def allocation(mc):
        try:
            total = (domestic.kappa_R / mc) ** SIGMA
            for d in prefix:
                disc = d.kappa_R**2 - 4.0 * d.w_origin * d.kappa_LT * d.tau * mc
                total += d.tau * (
                    (d.kappa_R + math.sqrt(max(disc, 0.0))) / (2.0 * d.tau * mc)
                ) ** SIGMA
        except OverflowError:
            return math.inf
        return total

    def h(q):
        return q - allocation(firm.mc(w, q))

    if firm.alpha == 0.0:
        mc = firm.kappa_C * w
        if prefix and mc >= min(d.disc_cutoff() for d in prefix):
            return None
        return allocation(mc)
    mc_max = min([d.disc_cutoff() for d in prefix], default=math.inf)
    if math.isinf(mc_max):
        # domestic only: closed form q = (kR/(kC*w))^(sigma/(1+sigma*alpha))
        return (domestic.kappa_R / (firm.kappa_C * w)) ** (
            SIGMA / (1.0 + SIGMA * firm.alpha)
        )
    q_hi = (mc_max / (firm.kappa_C * w)) ** (1.0 / firm.alpha)
    if h(q_hi) < 0.0:
        return None
    q_lo = q_hi
    for _ in range(400):
        q_lo /= 8.0
        if h(q_lo) < 0.0:
            break
    else:
        return None
    return brentq(h, q_lo, q_hi, xtol=1e-300, rtol=1e-15)


def total_quantity_solve(firm: FirmParams, domestic: DestinationParams, exports) -> TotalQuantitySolution:
    """Total output and per-destination deliveries for a committed set.

    Candidate optima are the fixed points obtained by serving each prefix
    of the cutoff-descending ranking; the gross-profit-best candidate wins
    (a committed destination the firm leaves unserved still sank its fixed
    cost, which is outside this gross measure).
    """
    if domestic.kappa_R <= 0.0:
        raise NoPositiveRoot("domestic revenue prefactor must be positive")
    w = domestic.w_origin
    ranked = rank_destinations(exports)
    best = None
    for j in range(len(ranked) + 1):
        prefix = ranked[:j]
        q_total = _prefix_root(firm, w, domestic, prefix)
        if q_total is None or q_total <= 0.0:
            continue
        mc = firm.mc(w, q_total)
        q_dom = (domestic.kappa_R / mc) ** SIGMA
        deliveries = {}
        gross = destination_surplus(domestic, q_dom)
        for d in prefix:
            disc = d.kappa_R**2 - 4.0 * d.w_origin * d.kappa_LT * d.tau * mc
            if disc < -1e-9 * d.kappa_R**2:
                gross = -math.inf
                break
            q_f = ((d.kappa_R + math.sqrt(max(disc, 0.0))) / (2.0 * d.tau * mc)) ** SIGMA
            deliveries[d.name] = q_f
            gross += destination_surplus(d, q_f)
        if not math.isfinite(gross):
            continue
        gross -= w * firm.kappa_C * q_total ** (1.0 + firm.alpha) / (1.0 + firm.alpha)
        cand = TotalQuantitySolution(
            q_total=q_total,
            mc=mc,
            q_domestic=q_dom,
            deliveries=deliveries,
            served=tuple(d.name for d in prefix),
            profit_gross=gross,
        )
        if best is None or cand.profit_gross > best.profit_gross:
            best = cand
    if best is None:
        raise NoPositiveRoot("no prefix admits a positive fixed point")
    return best


def profit(firm: FirmParams, domestic: DestinationParams, exports) -> float:
    """Per-period profit for the committed export set: gross surplus minus
    operating and export fixed costs (all fixed costs in origin labor)."""
    sol = total_quantity_solve(firm, domestic, exports)
    w = domestic.w_origin
    fixed = w * firm.f_o + w * sum(d.f_x for d in exports)
    return sol.profit_gross - fixed


class _ProfitCache:
    def __init__(self, firm, domestic, universe):
        self.firm = firm
        self.domestic = domestic
        self.universe = tuple(universe)
        self.cache = {}

    def __call__(self, names: frozenset) -> float:
        if names not in self.cache:
            dests = [d for d in self.universe if d.name in names]
            self.cache[names] = profit(self.firm, self.domestic, dests)
        return self.cache[names]


def export_set_value(cache: _ProfitCache, names: frozenset) -> float:
    """Submodular objective: profit of exporting to the set minus the
    domestic-only profit, so the empty set is worth exactly zero."""
    return cache(names) - cache(frozenset())


def choose_destinations(
    firm: FirmParams,
    domestic: DestinationParams,
    universe,
    seed: int = 0,
    runs: int = 9,
    incumbent: frozenset | None = None,
    firm_key: int = 0,
):
    """Best-of-``runs`` randomized double greedy over export destinations.

    Each run scans the cutoff-descending ranking keeping a growing set X
    and a shrinking set Y, includes element e with probability
    a+/(a+ + b+) where a and b are the two marginal values (probability
    one when both are nonpositive), and the best run is compared against
    the incumbent set.  RNG streams are counter-based per (firm, run).

    Returns (best set, its profit including fixed costs, profit cache).
    """
    universe = rank_destinations(universe)
    value = _ProfitCache(firm, domestic, universe)
    names_ranked = [d.name for d in universe]
    candidates = []
    if incumbent is not None:
        candidates.append(frozenset(incumbent))
    for run in range(runs):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(firm_key, run))
        )
        X = frozenset()
        Y = frozenset(names_ranked)
        for name in names_ranked:
            a = export_set_value(value, X | {name}) - export_set_value(value, X)
            b = export_set_value(value, Y - {name}) - export_set_value(value, Y)
            a_pos, b_pos = max(a, 0.0), max(b, 0.0)
            p_include = 1.0 if a_pos + b_pos == 0.0 else a_pos / (a_pos + b_pos)
            if rng.random() < p_include:
                X = X | {name}
            else:
                Y = Y - {name}
        candidates.append(X)
    best = max(candidates, key=lambda s: (export_set_value(value, s), -len(s)))
    # a committed destination the firm ships nothing to should not have
    # paid its fixed cost: prune to the served set (never lowers profit)
    dests = [d for d in universe if d.name in best]
    served = frozenset(total_quantity_solve(firm, domestic, dests).served)
    if export_set_value(value, served) >= export_set_value(value, best):
        best = served
    return best, value(best), value


def exhaustive_best(firm, domestic, universe):
    """Enumerate all export subsets; ground-truth oracle for small worlds."""
    universe = rank_destinations(universe)
    value = _ProfitCache(firm, domestic, universe)
    names = [d.name for d in universe]
    best, best_val = frozenset(), 0.0
    for mask in range(1 << len(names)):
        s = frozenset(n for i, n in enumerate(names) if mask >> i & 1)
        v = export_set_value(value, s)
        if v > best_val:
            best, best_val = s, v
    return best, best_val, value


def submodularity_check(firm, domestic, universe, trials: int = 200, seed: int = 0, tol: float = 1e-9):
    """Count violations of pi(S2+A) - pi(S2) <= pi(S1+A) - pi(S1) over
    random nested pairs S1 within S2 and disjoint add-on sets A."""
    universe = rank_destinations(universe)
    value = _ProfitCache(firm, domestic, universe)
    names = [d.name for d in universe]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    violations = 0
    for _ in range(trials):
        perm = rng.permutation(len(names))
        n2 = rng.integers(0, len(names))
        n1 = rng.integers(0, n2 + 1)
        S2 = frozenset(names[i] for i in perm[:n2])
        S1 = frozenset(names[i] for i in perm[:n1])
        rest = [names[i] for i in perm[n2:]]
        if not rest:
            continue
        k = rng.integers(1, len(rest) + 1)
        A = frozenset(rest[:k])
        lhs = value(S2 | A) - value(S2)
        rhs = value(S1 | A) - value(S1)
        scale = max(1.0, abs(lhs), abs(rhs))
        if lhs - rhs > tol * scale:
            violations += 1
    return violations
