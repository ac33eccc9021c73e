"""Synthetic data generators: income quantile targets and shipment panels.

Everything is seeded and deterministic; generators exist so estimators and
fitters can be exercised against data whose true parameters are known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eoq import ShipmentPanel


@dataclass(frozen=True)
class IncomeTargetSpec:
    """Income-distribution target for demand fitting.

    dPln draws are mu + sigma*Z + E1/alpha - E2/beta with standard normal Z
    and unit exponentials E1, E2 (lognormal body, Pareto upper tail of
    index alpha, lower tail of index beta); incomes are exp of that.
    """

    family: str = "dPln"
    alpha: float = 3.0
    beta: float = 1.43
    mu: float = 10.9
    sigma: float = 0.5
    n_samples: int = 100_000

    def __post_init__(self):
        if self.family not in ("dPln", "lognormal"):
            raise ValueError(f"unknown income family {self.family!r}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.family == "dPln" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("dPln tail indices must be positive")
        if self.n_samples < 10_000:
            raise ValueError("need at least 1e4 samples for stable quantiles")


def generate_income_quantiles(spec: IncomeTargetSpec, seed: int = 0):
    """Reversed-quantile samples (q, income): q is the population share
    richer than the income level, by large-sample order statistics."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    n = spec.n_samples
    y = spec.mu + spec.sigma * rng.standard_normal(n)
    if spec.family == "dPln":
        y = y + rng.exponential(1.0 / spec.alpha, n) - rng.exponential(1.0 / spec.beta, n)
    values = np.exp(y)
    values.sort()
    values = values[::-1]  # richest first
    q = (np.arange(n) + 0.5) / n
    return q, values


def make_eoq_panel(
    n_industries: int = 70,
    firms_per_industry: int = 14,
    years=(2000, 2001, 2002, 2003),
    beta_mean: float = 0.39,
    beta_sd: float = 0.105,
    firm_noise_sd: float = 0.18,
    logq_sd: float = 0.8,
    seed: int = 0,
    exact: bool = False,
) -> ShipmentPanel:
    """Monthly shipment panel generated from the shipping-scale model.

    Per industry a slope beta is drawn from a normal distribution (clipped
    to the model-admissible (0, 1/2]); per firm, annual quantity is
    lognormal and shipping frequency follows f_s = A * q**beta times a
    lognormal disturbance, rounded to 1..12 active months per year.  With
    ``exact`` the frequencies are integer by construction (q is solved from
    the model), so the regression recovers beta to machine precision.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(202,)))
    records = []
    for i in range(n_industries):
        hs8 = f"{10000000 + i:08d}"
        if exact:
            beta_i = beta_mean
        else:
            beta_i = float(np.clip(rng.normal(beta_mean, beta_sd), 0.04, 0.5))
        for j in range(firms_per_industry):
            firm = f"F{i:03d}_{j:03d}"
            if exact:
                # place the firm exactly on the model: integer months 2..11
                months_true = 2 + (j % 10)
                q_base = (months_true / 4.0) ** (1.0 / beta_i)
                month_counts = {y: months_true for y in years}
                annual = {y: q_base for y in years}
            else:
                q_base = float(np.exp(rng.normal(0.0, logq_sd)))
                f_true = 4.0 * q_base**beta_i * float(
                    np.exp(rng.normal(0.0, firm_noise_sd))
                )
                month_counts, annual = {}, {}
                for y in years:
                    f_y = f_true * float(np.exp(rng.normal(0.0, 0.05)))
                    month_counts[y] = int(np.clip(round(f_y), 1, 12))
                    annual[y] = q_base * float(np.exp(rng.normal(0.0, 0.08)))
            for y in years:
                m = month_counts[y]
                chosen = rng.choice(12, size=m, replace=False) + 1
                weights = rng.dirichlet(np.full(m, 8.0)) if m > 1 else np.array([1.0])
                for month, w in zip(sorted(chosen), weights):
                    records.append((firm, hs8, int(y), int(month), annual[y] * float(w)))
    return ShipmentPanel(records)


def make_export_instance(n_dest: int = 10, alpha: float = 0.25, seed: int = 0):
    """Random destination-choice instance with a typically interior optimal
    export set.  Returns (firm, domestic, universe)."""
    from .firm import DestinationParams, FirmParams

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(55,)))
    firm = FirmParams(kappa_C=float(rng.uniform(0.25, 0.55)), alpha=alpha)
    domestic = DestinationParams(kappa_R=1.0, name="home")
    universe = [
        DestinationParams(
            kappa_R=float(rng.uniform(0.65, 1.15)),
            kappa_LT=float(rng.uniform(0.06, 0.4)),
            tau=float(rng.uniform(1.02, 1.25)),
            w_origin=1.0,
            f_x=float(rng.uniform(0.0005, 0.02)),
            name=f"d{i}",
        )
        for i in range(n_dest)
    ]
    return firm, domestic, universe


def make_circle_world(
    n_countries: int = 8,
    n_prod: int = 8,
    n_versions: int = 2,
    alpha: float = 0.225,
    klt_base: float = 0.05,
    klt_dist_exp: float = 0.05,
    klt_noise_sd: float = 0.02,
    le_spread: float = 0.35,
    seed: int = 0,
    geometry: str = "circle",
):
    """Desk-scale world: countries on a circle (or scattered in a square),
    shipping prefactors with a mild distance elasticity, lognormal labor
    endowments.

    Returns (WorldConfig, distances) with distances in arbitrary km-like
    units.
    """
    from .equilibrium import WorldConfig

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(303,)))
    n = n_countries
    if geometry == "circle":
        idx = np.arange(n)
        hops = np.minimum(
            np.abs(idx[:, None] - idx[None, :]), n - np.abs(idx[:, None] - idx[None, :])
        )
        distances = 1000.0 * hops.astype(float)
    elif geometry == "scatter":
        pos = rng.uniform(0.0, 4000.0, (n, 2))
        diff = pos[:, None, :] - pos[None, :, :]
        distances = np.sqrt((diff**2).sum(axis=-1))
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    np.fill_diagonal(distances, 1.0)  # unused, keeps logs finite
    off = ~np.eye(n, dtype=bool)
    d_med = float(np.median(distances[off]))
    noise = rng.normal(0.0, klt_noise_sd, (n, n))
    noise = 0.5 * (noise + noise.T)
    kappa_LT = klt_base * (distances / d_med) ** klt_dist_exp * np.exp(noise)
    np.fill_diagonal(kappa_LT, 0.0)
    L_E = np.exp(rng.normal(0.0, le_spread, n))
    L_E *= n / L_E.sum()
    config = WorldConfig(
        n_countries=n,
        n_prod=n_prod,
        n_versions=n_versions,
        alpha=alpha,
        L_E=L_E,
        kappa_LT=kappa_LT,
    )
    return config, distances
