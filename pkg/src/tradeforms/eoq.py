"""Generalized economic order quantity model and the shipping-scale estimator.

A shipper trades inventory cost kappa_i*q_s against per-shipment
coordination cost kappa_t*q_s**gamma, giving effective trade cost
proportional to q**(1/(2-gamma)) and a log-log slope
beta = (1-gamma)/(2-gamma) of shipping frequency on annual quantity.
The estimator recovers beta from a monthly shipment panel, industry by
industry, pooling across industries under a normal random-effects model.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGamma, NoQualifyingIndustries


@dataclass(frozen=True)
class EoqParams:
    kappa_i: float
    kappa_t: float
    gamma: float

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise InvalidGamma(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.kappa_i <= 0 or self.kappa_t <= 0:
            raise ValueError("cost prefactors must be positive")

    @property
    def beta(self) -> float:
        return (1.0 - self.gamma) / (2.0 - self.gamma)


def optimal_shipment(params: EoqParams, q: float) -> dict:
    """Cost-minimizing shipment size, frequency, and minimized cost for
    annual quantity q."""
    if q <= 0:
        raise ValueError("annual quantity must be positive")
    g = params.gamma
    q_s = ((1.0 - g) * params.kappa_t * q / params.kappa_i) ** (1.0 / (2.0 - g))
    f_s = q / q_s
    min_cost = (
        (2.0 - g)
        * (1.0 - g) ** (-(1.0 - g) / (2.0 - g))
        * params.kappa_i ** ((1.0 - g) / (2.0 - g))
        * params.kappa_t ** (1.0 / (2.0 - g))
        * q ** (1.0 / (2.0 - g))
    )
    return {"q_s": q_s, "f_s": f_s, "min_cost": min_cost}


def shipping_cost(params: EoqParams, q_s: float, q: float) -> float:
    """Annual inventory plus coordination cost at shipment size q_s."""
    return params.kappa_i * q_s + params.kappa_t * q * q_s ** (params.gamma - 1.0)


@dataclass(frozen=True)
class ShipmentRecord:
    firm_id: str
    hs8: str
    year: int
    month: int
    quantity: float


class ShipmentPanel:
    """Monthly shipment records keyed by (firm, industry, year, month)."""

    def __init__(self, records):
        seen = set()
        rows = []
        for r in records:
            if not isinstance(r, ShipmentRecord):
                r = ShipmentRecord(*r)
            if not (1 <= r.month <= 12):
                raise ValueError(f"month out of range: {r.month}")
            if not math.isfinite(r.quantity) or r.quantity < 0:
                raise ValueError(f"bad quantity {r.quantity}")
            key = (r.firm_id, r.hs8, r.year, r.month)
            if key in seen:
                raise ValueError(f"duplicate record key {key}")
            seen.add(key)
            rows.append(r)
        self.records = tuple(rows)

    def __len__(self):
        return len(self.records)

    def industries(self):
        return sorted({r.hs8 for r in self.records})


DEFAULT_RULES = {"min_years_active": 2, "min_firms_per_industry": 10}


def _firm_measures(panel: ShipmentPanel):
    """Per (hs8, firm): average active months per year and mean annual
    quantity over years with at least one positive shipment."""
    by_firm = defaultdict(lambda: defaultdict(lambda: [0, 0.0]))  # (hs8, firm) -> year -> [months, qty]
    for r in panel.records:
        if r.quantity > 0:
            cell = by_firm[(r.hs8, r.firm_id)][r.year]
            cell[0] += 1
            cell[1] += r.quantity
    out = {}
    for key, years in by_firm.items():
        active = [(m, q) for m, q in years.values() if m > 0]
        if not active:
            continue
        f_s = float(np.mean([m for m, _ in active]))
        q = float(np.mean([q for _, q in active]))
        out[key] = (f_s, q, len(active))
    return out


def _ols_loglog(f_s, q):
    x = np.log(np.asarray(q))
    y = np.log(np.asarray(f_s))
    n = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0:
        return None
    beta = float(xc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - beta * xc
    dof = n - 2
    if dof <= 0:
        return None
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return beta, se


def estimate_beta(panel: ShipmentPanel, rules: dict | None = None) -> dict:
    """Industry-level log f_s on log q regressions with a DerSimonian-Laird
    random-effects pooling of the slopes.

    Firms need at least ``min_years_active`` years with a positive shipment;
    industries need ``min_firms_per_industry`` qualifying firms.
    """
    rules = {**DEFAULT_RULES, **(rules or {})}
    measures = _firm_measures(panel)
    by_industry = defaultdict(list)
    for (hs8, _firm), (f_s, q, n_years) in measures.items():
        if n_years >= rules["min_years_active"] and q > 0 and f_s > 0:
            by_industry[hs8].append((f_s, q))
    per_industry = {}
    for hs8, firms in sorted(by_industry.items()):
        if len(firms) < rules["min_firms_per_industry"]:
            continue
        fit = _ols_loglog([f for f, _ in firms], [q for _, q in firms])
        if fit is not None:
            per_industry[hs8] = {"beta": fit[0], "se": fit[1], "n_firms": len(firms)}
    if not per_industry:
        raise NoQualifyingIndustries(
            "no industry satisfies the selection rules"
        )
    betas = np.array([v["beta"] for v in per_industry.values()])
    ses = np.array([v["se"] for v in per_industry.values()])
    k = len(betas)
    if k == 1:
        pooled_beta = float(betas[0])
        pooled_se = float(ses[0])
        tau2 = 0.0
    else:
        w = 1.0 / np.maximum(ses, 1e-12) ** 2
        fixed = float(w @ betas / w.sum())
        Q = float(w @ (betas - fixed) ** 2)
        C = float(w.sum() - (w**2).sum() / w.sum())
        tau2 = max(0.0, (Q - (k - 1)) / C) if C > 0 else 0.0
        w_star = 1.0 / (ses**2 + tau2)
        pooled_beta = float(w_star @ betas / w_star.sum())
        pooled_se = float(1.0 / math.sqrt(w_star.sum()))
    return {
        "per_industry": per_industry,
        "pooled": {
            "beta": pooled_beta,
            "se": pooled_se,
            "tau2": tau2,
            "ci95": (pooled_beta - 1.96 * pooled_se, pooled_beta + 1.96 * pooled_se),
        },
        "sigma_beta": float(np.std(betas, ddof=1)) if k > 1 else 0.0,
        "n_industries": k,
    }


def seasonality_index(panel: ShipmentPanel) -> dict:
    """Herfindahl of average monthly trade shares, H_s = sum_i v_i^2, per
    industry; 1/12 for perfectly uniform trade, 1 for single-month trade."""
    totals = defaultdict(lambda: defaultdict(lambda: np.zeros(12)))
    for r in panel.records:
        totals[r.hs8][r.year][r.month - 1] += r.quantity
    out = {}
    for hs8, years in sorted(totals.items()):
        shares = []
        for monthly in years.values():
            tot = monthly.sum()
            if tot > 0:
                shares.append(monthly / tot)
        if shares:
            v = np.mean(shares, axis=0)
            out[hs8] = float(np.sum(v**2))
    return out


def sensitivity_table(panel: ShipmentPanel, cutoffs, rules: dict | None = None) -> list:
    """Re-run the pooled estimate per firms-per-industry cutoff.

    Returns rows (cutoff, n_industries, pooled beta, sd of industry betas);
    cutoffs that empty the sample produce a row with zero industries.
    """
    rules = {**DEFAULT_RULES, **(rules or {})}
    rows = []
    for cutoff in cutoffs:
        try:
            est = estimate_beta(panel, {**rules, "min_firms_per_industry": cutoff})
            rows.append(
                {
                    "min_firms": cutoff,
                    "n_industries": est["n_industries"],
                    "beta": est["pooled"]["beta"],
                    "sigma_beta": est["sigma_beta"],
                }
            )
        except NoQualifyingIndustries:
            rows.append(
                {"min_firms": cutoff, "n_industries": 0, "beta": None, "sigma_beta": None}
            )
    return rows
