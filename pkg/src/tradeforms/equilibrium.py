"""World trade general equilibrium at desk scale.

The unknowns are wages, expenditures, cohort measures, and revenue
prefactors per country plus total output per firm cell (origin,
productivity class, version).  Destination commitments are frozen inside
the inner loop, which drives the squared residual system to zero with Adam
on log-transformed unknowns and exact forward-mode gradients; the outer
loop lets one version-cohort of firms redo its destination choices per
iteration against frozen aggregates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from . import dual
from .dual import Dual
from .errors import NoConvergence, NonFiniteState, RankDeficient
from .firm import (
    DISC_CUTOFF_COEF,
    PROFIT_CUTOFF_COEF,
    SIGMA,
    DestinationParams,
    FirmParams,
    choose_destinations,
    profit as firm_profit,
)

NU_R = 1.0 - 1.0 / SIGMA
NU_LT = 0.6


@dataclass
class AdamParams:
    """Adam with plateau-triggered learning-rate decay; the decay is what
    lets a first-order method push the squared residual to 1e-12."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_steps: int = 120_000
    tol: float = 1e-12
    patience: int = 250
    lr_decay: float = 0.5
    min_lr: float = 1e-11

    def to_json(self):
        return self.__dict__.copy()


@dataclass
class WorldConfig:
    n_countries: int
    n_prod: int = 4
    n_versions: int = 1
    alpha: float = 0.225
    sigma: float = 5.0
    nu_R: float = 0.8
    nu_LT: float = 0.6
    mu_R: float = 1.05
    delta_e_f_e: float = 0.05
    f_o: float = 0.1
    f_x: float = 1e-5
    tau_default: float = 1.05
    L_E: np.ndarray | None = None
    kappa_LT: np.ndarray | None = None
    tau: np.ndarray | None = None
    adam: AdamParams = field(default_factory=AdamParams)

    def __post_init__(self):
        n = self.n_countries
        if self.sigma != SIGMA:
            raise ValueError("the allocation closed forms require sigma = 5")
        if self.L_E is None:
            self.L_E = np.ones(n)
        self.L_E = np.asarray(self.L_E, dtype=float)
        if self.kappa_LT is None:
            k = np.full((n, n), 0.05)
            np.fill_diagonal(k, 0.0)
            self.kappa_LT = k
        self.kappa_LT = np.asarray(self.kappa_LT, dtype=float)
        if self.tau is None:
            t = np.full((n, n), self.tau_default)
            np.fill_diagonal(t, 1.0)
            self.tau = np.asarray(t)
        self.tau = np.asarray(self.tau, dtype=float)

    @property
    def pareto_index(self) -> float:
        """Productivity tail index mu_R*(sigma-1)/(1+sigma*alpha): maps the
        model's revenue distribution onto a Pareto with index mu_R."""
        return self.mu_R * (self.sigma - 1.0) / (1.0 + self.sigma * self.alpha)

    def productivity_grid(self) -> np.ndarray:
        """Equal-mass quantile discretization: kappa_C values whose
        reciprocals are Pareto with the required index, midpoint masses."""
        u = (np.arange(self.n_prod) + 0.5) / self.n_prod
        return (1.0 - u) ** (1.0 / self.pareto_index)

    def n_cells(self) -> int:
        return self.n_countries * self.n_prod * self.n_versions

    def to_json(self):
        return {
            "N_c": self.n_countries,
            "N_p": self.n_prod,
            "N_v": self.n_versions,
            "alpha": self.alpha,
            "sigma": self.sigma,
            "nu_R": self.nu_R,
            "nu_LT": self.nu_LT,
            "mu_R": self.mu_R,
            "delta_e_f_e": self.delta_e_f_e,
            "f_o": self.f_o,
            "f_x": self.f_x,
            "tau": self.tau_default,
            "L_E": self.L_E.tolist(),
            "kappa_LT": self.kappa_LT.tolist(),
            "tau_matrix": self.tau.tolist(),
            "adam": self.adam.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        adam = AdamParams(**obj.get("adam", {}))
        return cls(
            n_countries=obj["N_c"],
            n_prod=obj.get("N_p", 4),
            n_versions=obj.get("N_v", 1),
            alpha=obj.get("alpha", 0.225),
            sigma=obj.get("sigma", 5.0),
            nu_R=obj.get("nu_R", 0.8),
            nu_LT=obj.get("nu_LT", 0.6),
            mu_R=obj.get("mu_R", 1.05),
            delta_e_f_e=obj.get("delta_e_f_e", 0.05),
            f_o=obj.get("f_o", 0.1),
            f_x=obj.get("f_x", 1e-5),
            tau_default=obj.get("tau", 1.05),
            L_E=np.asarray(obj["L_E"]) if "L_E" in obj else None,
            kappa_LT=np.asarray(obj["kappa_LT"]) if "kappa_LT" in obj else None,
            tau=np.asarray(obj["tau_matrix"]) if "tau_matrix" in obj else None,
            adam=adam,
        )


@dataclass
class EquilibriumState:
    """Continuous unknowns plus frozen destination commitments.

    commits[o, p, v, d] is True when the (o, p, v) cell ships to country d
    (diagonal entries are ignored; domestic shipping is implied by
    activity); active[o, p, v] False means the cell exited.
    """

    w: np.ndarray
    E: np.ndarray
    M: np.ndarray
    kappa_R: np.ndarray
    q: np.ndarray
    commits: np.ndarray
    active: np.ndarray

    def copy(self) -> "EquilibriumState":
        return EquilibriumState(
            self.w.copy(),
            self.E.copy(),
            self.M.copy(),
            self.kappa_R.copy(),
            self.q.copy(),
            self.commits.copy(),
            self.active.copy(),
        )

    def pack(self) -> np.ndarray:
        return np.log(
            np.concatenate([self.w, self.E, self.M, self.kappa_R, self.q.ravel()])
        )

    def unpack(self, theta: np.ndarray) -> "EquilibriumState":
        n = len(self.w)
        vals = np.exp(theta)
        out = self.copy()
        out.w = vals[:n]
        out.E = vals[n : 2 * n]
        out.M = vals[2 * n : 3 * n]
        out.kappa_R = vals[3 * n : 4 * n]
        out.q = vals[4 * n :].reshape(self.q.shape)
        return out

    def to_json(self):
        return {
            "w": self.w.tolist(),
            "E": self.E.tolist(),
            "M": self.M.tolist(),
            "kappa_R": self.kappa_R.tolist(),
            "q": self.q.tolist(),
            "commits": self.commits.astype(int).tolist(),
            "active": self.active.astype(int).tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            w=np.asarray(obj["w"], dtype=float),
            E=np.asarray(obj["E"], dtype=float),
            M=np.asarray(obj["M"], dtype=float),
            kappa_R=np.asarray(obj["kappa_R"], dtype=float),
            q=np.asarray(obj["q"], dtype=float),
            commits=np.asarray(obj["commits"]).astype(bool),
            active=np.asarray(obj["active"]).astype(bool),
        )


def closed_economy_solution(config: WorldConfig, L_E: float) -> dict:
    """Analytic autarky equilibrium for one country at wage one.

    Classes whose operating profit would be negative exit; the active set
    is found by scanning productivity suffixes until the free-entry level
    is consistent with every sign.
    """
    a = config.alpha
    kC = config.productivity_grid()
    x = kC ** (-4.0 / (1.0 + 5.0 * a))
    D = 1.0 / config.nu_R - 1.0 / (1.0 + a)
    n_p = config.n_prod
    order = np.argsort(-x)  # most productive first
    for n_active in range(n_p, 0, -1):
        active_idx = order[:n_active]
        # (1/Np) sum_active (A*x_p - f_o) = delta_e*f_e with A = kR^power*D
        target = config.delta_e_f_e + n_active / n_p * config.f_o
        A = target * n_p / x[active_idx].sum()
        profits = A * x - config.f_o
        ok = all(profits[p] >= -1e-12 for p in active_idx) and all(
            profits[p] <= 1e-12 for p in order[n_active:]
        )
        if ok:
            power = 5.0 * (1.0 + a) / (1.0 + 5.0 * a)
            kR = (A / D) ** (1.0 / power)
            q = np.where(
                np.isin(np.arange(n_p), active_idx),
                (kR / kC) ** (5.0 / (1.0 + 5.0 * a)),
                1.0,
            )
            vc_labor = np.where(
                np.isin(np.arange(n_p), active_idx),
                kC * q ** (1.0 + a) / (1.0 + a),
                0.0,
            )
            denom = config.delta_e_f_e + (
                n_active / n_p * config.f_o + vc_labor.mean() * 1.0
            )
            M = L_E / denom
            return {
                "w": 1.0,
                "E": L_E,
                "M": M,
                "kappa_R": kR,
                "q": q,
                "active": np.isin(np.arange(n_p), active_idx),
            }
    raise NoConvergence("no productivity class can operate in autarky")


def initial_state(config: WorldConfig) -> EquilibriumState:
    """Autarky warm start: closed-economy analytics per country, no export
    commitments."""
    n, n_p, n_v = config.n_countries, config.n_prod, config.n_versions
    w = np.ones(n)
    E = config.L_E.copy()
    M = np.zeros(n)
    kR = np.zeros(n)
    q = np.ones((n, n_p, n_v))
    active = np.zeros((n, n_p, n_v), dtype=bool)
    for k in range(n):
        sol = closed_economy_solution(config, config.L_E[k])
        M[k] = sol["M"]
        kR[k] = sol["kappa_R"]
        q[k] = sol["q"][:, None]
        active[k] = sol["active"][:, None]
    commits = np.zeros((n, n_p, n_v, n), dtype=bool)
    return EquilibriumState(w=w, E=E, M=M, kappa_R=kR, q=q, commits=commits, active=active)


def _expand(x):
    """Append a broadcast axis before the tangent directions."""
    if isinstance(x, Dual):
        return Dual(x.val[..., None], x.tan[..., None, :])
    return np.asarray(x)[..., None]


def _reshape(x, shape):
    return x.reshape_value(shape) if isinstance(x, Dual) else np.asarray(x).reshape(shape)


def _where(cond, a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        return dual.where(cond, a, b)
    return np.where(cond, a, b)


def _log(x):
    return x.log() if isinstance(x, Dual) else np.log(x)


def _sqrt(x):
    return x.sqrt() if isinstance(x, Dual) else np.sqrt(x)


def _value(x):
    return x.val if isinstance(x, Dual) else np.asarray(x)


def _residual_parts(w, E, M, kR, q, state, config):
    """Residual blocks; one code path for plain arrays and seeded duals.

    Country vectors have shape (n,), the cell array (n, n_p, n_v), and the
    per-destination axis is appended last.
    """
    n, n_p, n_v = config.n_countries, config.n_prod, config.n_versions
    kC = config.productivity_grid()[None, :, None]
    active = state.active
    a = config.alpha

    w_cell = _reshape(w, (n, 1, 1))
    mc = kC * w_cell * q**a

    # delivery mask: committed exports plus the domestic diagonal
    eye = np.eye(n, dtype=bool)[:, None, None, :]
    mask = state.commits | (eye & active[..., None])
    tauM = config.tau[:, None, None, :]
    kltM = config.kappa_LT[:, None, None, :]
    kRd = _reshape(kR, (1, 1, 1, n))
    mc4 = _expand(mc)

    disc = kRd * kRd - 4.0 * _expand(w_cell) * kltM * tauM * mc4
    ship = mask & (_value(disc) > 0.0)
    disc_safe = _where(ship, disc, np.ones(ship.shape))
    # powers are taken on the safe branch before masking so that masked
    # entries never produce non-finite tangents
    q_f_safe = ((kRd + _sqrt(disc_safe)) / (2.0 * tauM * mc4)) ** SIGMA
    zeros = np.zeros(ship.shape)
    q_f = _where(ship, q_f_safe, zeros)

    # (a) per-cell fixed point of total output (inactive cells pin q = 1)
    shipped = (q_f * tauM).sum(axis=-1)  # domestic tau is one
    resid_cells = _where(active, 1.0 - shipped / q, _log(q))

    # (b) expenditure: spending in each destination adds up to E
    rev = kRd * _where(ship, q_f_safe**NU_R, zeros) / NU_R
    measure = _expand(_reshape(M, (n, 1, 1)) / (n_p * n_v) * np.ones((n, n_p, n_v)))
    spent = _reshape(rev * measure, (n * n_p * n_v, n)).sum(axis=0)
    resid_expend = 1.0 - spent / E

    # (c) labor clearing: entry + fixed + variable + shipping
    n_exports = state.commits.sum(axis=-1)
    fixed_labor = np.where(active, config.f_o + config.f_x * n_exports, 0.0)
    var_labor = _where(active, kC * q ** (1.0 + a) / (1.0 + a), np.zeros(active.shape))
    ship_labor = (_where(ship, q_f_safe**NU_LT, zeros) * kltM).sum(axis=-1) * (
        1.0 / NU_LT
    )
    per_cell = var_labor + ship_labor + fixed_labor
    labor = M * (_reshape(per_cell, (n, n_p * n_v)).mean(axis=1) + config.delta_e_f_e)
    resid_labor = 1.0 - labor / config.L_E

    # (d) free entry: mean cell profit equals delta_e*f_e*w
    pi = rev.sum(axis=-1) - w_cell * (var_labor + ship_labor + fixed_labor)
    pi = _where(active, pi, np.zeros(active.shape))
    mean_pi = _reshape(pi, (n, n_p * n_v)).mean(axis=1)
    resid_entry = (mean_pi - config.delta_e_f_e * w) / (
        w * (config.delta_e_f_e + config.f_o)
    )

    # (e) budget plus the world numeraire
    resid_budget = 1.0 - E / (w * config.L_E)
    resid_numeraire = ((w * config.L_E).sum() - config.L_E.sum()) / config.L_E.sum()

    return resid_cells, resid_expend, resid_labor, resid_entry, resid_budget, resid_numeraire


def residuals(state: EquilibriumState, config: WorldConfig) -> np.ndarray:
    """Stacked scaled residual vector at the state's own unknowns."""
    for arr in (state.w, state.E, state.M, state.kappa_R, state.q):
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise NonFiniteState("state has nonpositive or non-finite unknowns")
    parts = _residual_parts(state.w, state.E, state.M, state.kappa_R, state.q, state, config)
    flat = [np.atleast_1d(np.asarray(p, dtype=float)).ravel() for p in parts]
    return np.concatenate(flat)


def residuals_and_jacobian(state: EquilibriumState, config: WorldConfig, theta: np.ndarray):
    """Residual vector and Jacobian with respect to the packed log
    unknowns, by one vectorized forward-mode pass."""
    n = config.n_countries
    packed = Dual.seed(theta)
    vals = packed.exp()
    w = vals[:n]
    E = vals[n : 2 * n]
    M = vals[2 * n : 3 * n]
    kR = vals[3 * n : 4 * n]
    q = vals[4 * n :].reshape_value(state.q.shape)
    parts = _residual_parts(w, E, M, kR, q, state, config)
    parts = [p if isinstance(p, Dual) else Dual.constant(np.atleast_1d(p), packed.n_dirs) for p in parts]
    parts = [p.ravel() for p in parts]
    stacked = dual.concat(parts)
    return stacked.val, stacked.tan


def inner_solve(state: EquilibriumState, config: WorldConfig, verbose: bool = False):
    """Adam on the log unknowns until the squared residual norm reaches
    tol; learning rate halves after ``patience`` non-improving steps.

    Raises NoConvergence with the best state attached when the step or
    learning-rate budget runs out first.
    """
    ap = config.adam
    theta = state.pack()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr = ap.lr
    best_loss = math.inf
    best_theta = theta.copy()
    stall = 0
    t = 0
    loss = math.inf
    while t < ap.max_steps:
        t += 1
        r, J = residuals_and_jacobian(state, config, theta)
        loss = float(r @ r)
        if loss < best_loss * (1.0 - 1e-9):
            best_loss = loss
            best_theta = theta.copy()
            stall = 0
        else:
            stall += 1
            if stall > ap.patience:
                lr *= ap.lr_decay
                stall = 0
                theta = best_theta.copy()
                m[:] = 0.0
                v[:] = 0.0
                if lr < ap.min_lr:
                    break
        if best_loss <= ap.tol:
            break
        g = 2.0 * (J.T @ r)
        m = ap.beta1 * m + (1.0 - ap.beta1) * g
        v = ap.beta2 * v + (1.0 - ap.beta2) * g * g
        m_hat = m / (1.0 - ap.beta1**t)
        v_hat = v / (1.0 - ap.beta2**t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + ap.eps)
        if verbose and t % 2000 == 0:
            print(f"  step {t:7d} loss {best_loss:.3e} lr {lr:.1e}")
    out = state.unpack(best_theta)
    info = {"loss": best_loss, "steps": t, "converged": best_loss <= ap.tol}
    if not info["converged"]:
        raise NoConvergence(
            f"inner loop stalled at loss {best_loss:.3e} after {t} steps", best=(out, info)
        )
    return out, info


def _destinations_for(state: EquilibriumState, config: WorldConfig, origin: int):
    """DestinationParams per country from the current aggregates."""
    dests = []
    for d in range(config.n_countries):
        if d == origin:
            continue
        dests.append(
            DestinationParams(
                kappa_R=float(state.kappa_R[d]),
                kappa_LT=float(config.kappa_LT[origin, d]),
                tau=float(config.tau[origin, d]),
                w_origin=float(state.w[origin]),
                f_x=config.f_x,
                name=str(d),
            )
        )
    return dests


def outer_iterate(
    state: EquilibriumState, config: WorldConfig, cohort: int, seed: int = 0,
    runs: int = 9,
):
    """One cohort update: every firm cell of the given version redoes its
    destination choice against frozen aggregates; commitments change only
    when strictly profit-improving, then the inner loop re-solves.

    Returns (state, n_changed).
    """
    n, n_p = config.n_countries, config.n_prod
    new_state = state.copy()
    changed = 0
    for o in range(n):
        universe = _destinations_for(state, config, o)
        domestic = DestinationParams(
            kappa_R=float(state.kappa_R[o]), w_origin=float(state.w[o]), name=str(o)
        )
        for p in range(n_p):
            firm = FirmParams(
                kappa_C=float(config.productivity_grid()[p]),
                alpha=config.alpha,
                f_o=config.f_o,
            )
            incumbent_mask = state.commits[o, p, cohort]
            incumbent = frozenset(
                str(d) for d in range(n) if d != o and incumbent_mask[d]
            )
            if not state.active[o, p, cohort]:
                incumbent = frozenset()
            firm_key = (o * n_p + p) * config.n_versions + cohort
            best, best_profit, cache = choose_destinations(
                firm,
                domestic,
                universe,
                seed=seed,
                runs=runs,
                incumbent=incumbent if state.active[o, p, cohort] else None,
                firm_key=firm_key,
            )
            old_profit = (
                cache(incumbent) if state.active[o, p, cohort] else 0.0
            )
            new_active = best_profit >= 0.0
            new_mask = np.zeros(n, dtype=bool)
            for name in best:
                new_mask[int(name)] = True
            improved = best_profit > old_profit * (1.0 + 1e-12) + 1e-15
            if (not state.active[o, p, cohort] and new_active and best_profit > 0.0) or (
                state.active[o, p, cohort] and not new_active
            ) or (state.active[o, p, cohort] and improved and best != incumbent):
                new_state.commits[o, p, cohort] = new_mask if new_active else False
                new_state.active[o, p, cohort] = new_active
                if new_active:
                    # warm-start the cell at its own fixed point under the
                    # frozen aggregates; the inner loop then only has to
                    # absorb the aggregate feedback
                    from .firm import total_quantity_solve

                    sol = total_quantity_solve(
                        firm, domestic, [d for d in universe if d.name in best]
                    )
                    new_state.q[o, p, cohort] = sol.q_total
                else:
                    new_state.q[o, p, cohort] = 1.0
                changed += 1
    if changed:
        try:
            new_state, _ = inner_solve(new_state, config)
        except NoConvergence as exc:
            # commitments frozen from stale aggregates can be jointly
            # infeasible; carry the best state forward and let the next
            # cohort update repair them
            new_state, _ = exc.best
    return new_state, changed


def solve_world(
    config: WorldConfig,
    seed: int = 0,
    max_sweeps: int = 12,
    runs: int = 9,
    state: EquilibriumState | None = None,
    checkpoint_fn=None,
    quick_tol: float | None = None,
):
    """Full solve: autarky warm start, inner convergence, then cohort
    sweeps until one full sweep changes no commitment.

    ``quick_tol`` loosens the inner tolerance during intermediate cohort
    updates (aggregates only steer discrete choices there); the final
    state is always polished at the configured tolerance."""
    if state is None:
        state = initial_state(config)
    quick_cfg = config
    if quick_tol is not None and quick_tol > config.adam.tol:
        quick_cfg = replace(config, adam=replace(config.adam, tol=quick_tol))
    state, info = inner_solve(state, quick_cfg)
    outer_steps = 0
    for sweep in range(max_sweeps):
        sweep_changes = 0
        for cohort in range(config.n_versions):
            state, changed = outer_iterate(state, quick_cfg, cohort, seed=seed, runs=runs)
            sweep_changes += changed
            outer_steps += 1
            if checkpoint_fn is not None:
                checkpoint_fn(state, sweep, cohort)
        if sweep_changes == 0:
            break
    r = residuals(state, config)
    loss = float(r @ r)
    for _repair in range(3):
        if loss <= config.adam.tol:
            break
        # final polish: the accepted commitments must admit a converged
        # inner solution at the configured tolerance; when they do not
        # (aggregates drifted since the commitments were chosen), let the
        # firms drop the orphaned destinations and try again
        try:
            state, _ = inner_solve(state, config)
        except NoConvergence as exc:
            state, _ = exc.best
            for cohort in range(config.n_versions):
                state, _ = outer_iterate(state, quick_cfg, cohort, seed=seed, runs=runs)
                outer_steps += 1
        r = residuals(state, config)
        loss = float(r @ r)
    return state, {"loss": loss, "sweeps": sweep + 1, "outer_steps": outer_steps}


# ---------------------------------------------------------------------------
# diagnostics


def trade_flows(state: EquilibriumState, config: WorldConfig) -> np.ndarray:
    """Value of goods from origin row to destination column (spending at
    destination prices), diagonal = domestic sales."""
    n, n_p, n_v = config.n_countries, config.n_prod, config.n_versions
    kC = config.productivity_grid()[None, :, None]
    mc = kC * state.w[:, None, None] * state.q**config.alpha
    eye = np.eye(n, dtype=bool)[:, None, None, :]
    mask = state.commits | (eye & state.active[..., None])
    disc = state.kappa_R[None, None, None, :] ** 2 - 4.0 * state.w[
        :, None, None, None
    ] * config.kappa_LT[:, None, None, :] * config.tau[:, None, None, :] * mc[..., None]
    ok = mask & (disc > 0)
    q_f = np.where(
        ok,
        (
            (state.kappa_R[None, None, None, :] + np.sqrt(np.where(ok, disc, 1.0)))
            / (2.0 * config.tau[:, None, None, :] * mc[..., None])
        )
        ** SIGMA,
        0.0,
    )
    rev = state.kappa_R[None, None, None, :] * q_f**NU_R / NU_R
    measure = (state.M / (n_p * n_v))[:, None, None, None]
    return (rev * measure).sum(axis=(1, 2))


def gravity_fit(flows: np.ndarray, distances: np.ndarray, gdp: np.ndarray) -> dict:
    """OLS of log bilateral flows on log distance and the two log GDPs.

    Zero flows are dropped; raises RankDeficient when the design loses
    rank (e.g. all distances equal)."""
    n = flows.shape[0]
    rows, y = [], []
    for i in range(n):
        for j in range(n):
            if i == j or flows[i, j] <= 0:
                continue
            rows.append([1.0, math.log(distances[i, j]), math.log(gdp[i]), math.log(gdp[j])])
            y.append(math.log(flows[i, j]))
    X = np.asarray(rows)
    y = np.asarray(y)
    if X.shape[0] < 4 or np.linalg.matrix_rank(X) < 4:
        raise RankDeficient("gravity design matrix is rank deficient")
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return {
        "const": float(beta[0]),
        "distance": float(beta[1]),
        "gdp_origin": float(beta[2]),
        "gdp_dest": float(beta[3]),
        "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        "n_obs": len(y),
    }


def kappa_lt_distance_elasticity(config: WorldConfig, distances: np.ndarray) -> float:
    """Slope of log kappa_LT on log distance across country pairs."""
    n = config.n_countries
    x, y = [], []
    for i in range(n):
        for j in range(n):
            if i != j and config.kappa_LT[i, j] > 0:
                x.append(math.log(distances[i, j]))
                y.append(math.log(config.kappa_LT[i, j]))
    x, y = np.asarray(x), np.asarray(y)
    xc = x - x.mean()
    return float(xc @ (y - y.mean()) / (xc @ xc))


def median_revenue_by_rank(state: EquilibriumState, config: WorldConfig, origin: int) -> dict:
    """Median log10 firm revenue of exporters by destination popularity.

    Destinations are ranked by the fraction of the origin country's firm
    cells exporting there; the median (over exporters to the destination)
    of total firm revenue is reported in log10, normalized to zero at the
    most popular destination, with a c0*rank^(-c1) + c2 fit."""
    n, n_p, n_v = config.n_countries, config.n_prod, config.n_versions
    flows_cells = _cell_revenues(state, config, origin)
    total_rev = flows_cells.sum(axis=-1)
    rows = []
    for d in range(n):
        if d == origin:
            continue
        exporters = [
            (p, v)
            for p in range(n_p)
            for v in range(n_v)
            if state.commits[origin, p, v, d] and flows_cells[p, v, d] > 0
        ]
        if not exporters:
            continue
        popularity = len(exporters) / (n_p * n_v)
        med = float(np.median([math.log10(total_rev[p, v]) for p, v in exporters]))
        rows.append({"dest": d, "popularity": popularity, "median_log10_rev": med})
    rows.sort(key=lambda r: (-r["popularity"], r["dest"]))
    for rank, r in enumerate(rows, start=1):
        r["rank"] = rank
    if not rows:
        return {"rows": [], "fit": None}
    base = rows[0]["median_log10_rev"]
    for r in rows:
        r["median_log10_rev"] -= base
    fit = None
    ranks = np.array([r["rank"] for r in rows], dtype=float)
    meds = np.array([r["median_log10_rev"] for r in rows])
    if len(rows) >= 3 and np.ptp(meds) > 1e-12:
        try:
            popt, _ = curve_fit(
                lambda x, c0, c1, c2: c0 * x ** (-c1) + c2,
                ranks,
                meds,
                p0=(meds[0] - meds[-1], 1.0, meds[-1]),
                maxfev=20000,
            )
            fit = {"c0": float(popt[0]), "c1": float(popt[1]), "c2": float(popt[2])}
        except RuntimeError:
            fit = None
    return {"rows": rows, "fit": fit, "degenerate": np.ptp(meds) <= 1e-12}


def _cell_revenues(state, config, origin):
    """(n_p, n_v, n) revenues of origin's cells by destination."""
    n = config.n_countries
    kC = config.productivity_grid()[:, None]
    mc = kC * state.w[origin] * state.q[origin] ** config.alpha
    out = np.zeros((config.n_prod, config.n_versions, n))
    for d in range(n):
        if d == origin:
            mask = state.active[origin]
            disc = np.full(mc.shape, state.kappa_R[d] ** 2)
            tau = 1.0
            klt = 0.0
        else:
            mask = state.commits[origin, :, :, d]
            tau = config.tau[origin, d]
            klt = config.kappa_LT[origin, d]
            disc = state.kappa_R[d] ** 2 - 4.0 * state.w[origin] * klt * tau * mc
        ok = mask & (disc > 0)
        q_f = np.where(
            ok,
            ((state.kappa_R[d] + np.sqrt(np.where(ok, disc, 1.0))) / (2.0 * tau * mc))
            ** SIGMA,
            0.0,
        )
        out[:, :, d] = state.kappa_R[d] * q_f**NU_R / NU_R
    return out
