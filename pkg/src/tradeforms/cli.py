"""Batch command-line interface: every subcommand reads files or flags,
writes CSV/JSON artifacts plus a run manifest, and exits nonzero with a
machine-readable error on stderr when something goes wrong.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import AggregationSpec, aggregate_firm_integrals
from .applications import (
    ac_beta_star,
    ac_restricted_thresholds,
    salinger_chain,
    sz_hoarding_bp,
    sz_hoarding_income_form,
    SourcingParams,
)
from .datagen import IncomeTargetSpec, generate_income_quantiles, make_circle_world
from .eoq import ShipmentPanel, estimate_beta, seasonality_index, sensitivity_table
from .equilibrium import (
    EquilibriumState,
    WorldConfig,
    gravity_fit,
    kappa_lt_distance_elasticity,
    median_revenue_by_rank,
    solve_world,
    trade_flows,
)
from .errors import DataError, TradeFormsError, UsageError
from .forms import PowerSum, fit_income_form
from .laplace import CATALOG, LaplaceMeasure, complete_monotonicity_test, passthrough_profile
from .monopoly import MonopolyProblem, interpolate_tractable, solve_foc, surplus_report

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _out_dir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("TRADEFORMS_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, argv, seed, config_obj, outputs):
    manifest = {
        "version": __version__,
        "command": list(argv),
        "seed": seed,
        "config_hash": hashlib.sha256(
            json.dumps(config_obj, sort_keys=True).encode()
        ).hexdigest(),
        "outputs": {name: _sha256(out / name) for name in outputs},
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def _write_json(out: Path, name: str, obj) -> str:
    (out / name).write_text(json.dumps(obj, indent=2, sort_keys=True))
    return name


def _write_csv(out: Path, name: str, header, rows) -> str:
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return name


def _load_power_sum(text: str) -> PowerSum:
    try:
        return PowerSum.from_json(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"bad power-sum JSON: {exc}") from exc


# -- subcommands -----------------------------------------------------------


def cmd_monopoly(args, argv):
    out = _out_dir(args)
    problem = MonopolyProblem(
        P=_load_power_sum(args.demand),
        MC=_load_power_sum(args.mc),
        theta=args.theta,
    )
    sol = solve_foc(problem)
    record = {
        "q_star": sol.q_star,
        "profit": sol.profit,
        "soc_ok": sol.soc_ok,
        "candidates": [
            {"q": q, "objective": obj, "soc_ok": soc} for q, obj, soc in sol.all_candidates
        ],
    }
    if sol.q_star > 0:
        record["surplus"] = surplus_report(problem, sol.q_star)
    outputs = [_write_json(out, "monopoly_solution.json", record)]
    _write_manifest(out, argv, None, {"demand": args.demand, "mc": args.mc, "theta": args.theta}, outputs)
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


def cmd_interp(args, argv):
    out = _out_dir(args)
    res = interpolate_tractable(args.mc0, args.mc1, args.mr0, n_grid=args.grid)
    rows = [
        (b, qi, qt, (qi - qt) / qt)
        for b, qi, qt in zip(res.grid_b, res.q_interp, res.q_true)
    ]
    outputs = [
        _write_csv(out, "interp_knots.csv", ["b", "q_closed_form"], zip(res.knots_b, res.knots_q)),
        _write_csv(out, "interp_grid.csv", ["b", "q_interp", "q_true", "rel_err"], rows),
        _write_json(
            out,
            "interp_stats.json",
            {"mean_abs_rel": res.mean_abs_rel, "max_abs_rel": res.max_abs_rel},
        ),
    ]
    _write_manifest(out, argv, None, vars(args) | {"out": None}, outputs)
    print(json.dumps({"mean_abs_rel": res.mean_abs_rel, "max_abs_rel": res.max_abs_rel}))
    return 0


def read_shipments_csv(path) -> ShipmentPanel:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"firm_id", "hs8", "year", "month", "quantity"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise DataError(
                    f"shipments file needs columns {sorted(required)}, got {reader.fieldnames}"
                )
            records = [
                (
                    row["firm_id"],
                    row["hs8"],
                    int(row["year"]),
                    int(row["month"]),
                    float(row["quantity"]),
                )
                for row in reader
            ]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"malformed shipments row: {exc}") from exc
    try:
        return ShipmentPanel(records)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def cmd_eoq(args, argv):
    out = _out_dir(args)
    panel = read_shipments_csv(args.input)
    rules = {
        "min_firms_per_industry": args.min_firms,
        "min_years_active": args.min_years,
    }
    est = estimate_beta(panel, rules)
    cutoffs = [int(c) for c in args.cutoffs.split(",")] if args.cutoffs else [5, 10, 15, 20]
    table = sensitivity_table(panel, cutoffs, rules)
    seasonality = seasonality_index(panel)
    report = {
        "pooled": est["pooled"],
        "sigma_beta": est["sigma_beta"],
        "n_industries": est["n_industries"],
        "per_industry": est["per_industry"],
        "seasonality": seasonality,
    }
    outputs = [
        _write_json(out, "eoq_report.json", report),
        _write_csv(
            out,
            "eoq_sensitivity.csv",
            ["min_firms", "n_industries", "beta", "sigma_beta"],
            [(r["min_firms"], r["n_industries"], r["beta"], r["sigma_beta"]) for r in table],
        ),
    ]
    _write_manifest(out, argv, None, {"input": str(args.input), **rules}, outputs)
    print(json.dumps({"pooled": est["pooled"], "n_industries": est["n_industries"]}))
    return 0


def load_world_inputs(config_obj, seed):
    """WorldConfig + distances from a config dict: either synthetic
    (circle/scatter generator) or ingested from countries/distances CSVs."""
    if "countries_csv" in config_obj:
        countries = []
        with open(config_obj["countries_csv"], newline="") as fh:
            for row in csv.DictReader(fh):
                countries.append(
                    (row["code"], float(row["gdp"]), float(row["tradable_share"]))
                )
        codes = [c[0] for c in countries]
        tradable = np.array([gdp * share for _, gdp, share in countries])
        if config_obj.get("consumption_floor", True) and "trade_flows_csv" in config_obj:
            exports = dict.fromkeys(codes, 0.0)
            with open(config_obj["trade_flows_csv"], newline="") as fh:
                for row in csv.DictReader(fh):
                    if row["exporter"] in exports and row["importer"] != row["exporter"]:
                        exports[row["exporter"]] += float(row["value"])
            for i, code in enumerate(codes):
                # domestic use must stay above five percent of tradable GDP
                floor = exports[code] / 0.95
                if tradable[i] - exports[code] < 0.05 * tradable[i]:
                    tradable[i] = floor
        n = len(codes)
        distances = np.ones((n, n))
        index = {c: i for i, c in enumerate(codes)}
        with open(config_obj["distances_csv"], newline="") as fh:
            for row in csv.DictReader(fh):
                i, j = index[row["code_i"]], index[row["code_j"]]
                distances[i, j] = distances[j, i] = float(row["km"])
        L_E = tradable * n / tradable.sum()
        d_med = float(np.median(distances[~np.eye(n, dtype=bool)]))
        klt = config_obj.get("klt_base", 0.05) * (distances / d_med) ** config_obj.get(
            "klt_dist_exp", 0.05
        )
        np.fill_diagonal(klt, 0.0)
        config = WorldConfig.from_json(
            {**config_obj, "N_c": n, "L_E": L_E.tolist(), "kappa_LT": klt.tolist()}
        )
        return config, distances, codes
    synth = config_obj.get("synthetic", {})
    config, distances = make_circle_world(
        n_countries=config_obj.get("N_c", 4),
        n_prod=config_obj.get("N_p", 4),
        n_versions=config_obj.get("N_v", 1),
        alpha=config_obj.get("alpha", 0.225),
        klt_base=synth.get("klt_base", 0.05),
        klt_dist_exp=synth.get("klt_dist_exp", 0.05),
        klt_noise_sd=synth.get("klt_noise_sd", 0.02),
        le_spread=synth.get("le_spread", 0.35),
        geometry=synth.get("geometry", "circle"),
        seed=seed,
    )
    base = config.to_json()
    for key in ("sigma", "nu_R", "nu_LT", "mu_R", "delta_e_f_e", "f_o", "f_x", "tau", "adam"):
        if key in config_obj:
            base[key] = config_obj[key]
    config = WorldConfig.from_json(base)
    codes = [f"C{i}" for i in range(config.n_countries)]
    return config, distances, codes


def cmd_trade_run(args, argv):
    out = _out_dir(args)
    try:
        config_obj = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load config: {exc}") from exc
    config, distances, codes = load_world_inputs(config_obj, args.seed)
    checkpoint_every = config_obj.get("checkpoint_every", 1)
    counter = {"n": 0}

    def checkpoint(state, sweep, cohort):
        counter["n"] += 1
        if counter["n"] % checkpoint_every == 0:
            payload = _state_payload(state, config, distances, codes, args.seed)
            _write_json(out, f"checkpoint_{sweep:02d}_{cohort:02d}.json", payload)

    state, info = solve_world(
        config,
        seed=args.seed,
        quick_tol=config_obj.get("quick_tol"),
        max_sweeps=config_obj.get("max_sweeps", 12),
        runs=config_obj.get("runs", 9),
        checkpoint_fn=checkpoint,
    )
    payload = _state_payload(state, config, distances, codes, args.seed)
    outputs = [_write_json(out, "equilibrium.json", payload)]
    flows = trade_flows(state, config)
    outputs.append(
        _write_csv(
            out,
            "trade_flows.csv",
            ["exporter", "importer", "value"],
            [
                (codes[i], codes[j], flows[i, j])
                for i in range(len(codes))
                for j in range(len(codes))
            ],
        )
    )
    _write_manifest(out, argv, args.seed, config.to_json(), outputs)
    print(json.dumps({"loss": info["loss"], "sweeps": info["sweeps"]}))
    return 0


def _state_payload(state, config, distances, codes, seed):
    return {
        "seed": seed,
        "codes": codes,
        "config": config.to_json(),
        "distances": np.asarray(distances).tolist(),
        "state": state.to_json(),
    }


def cmd_trade_gravity(args, argv):
    out = _out_dir(args)
    try:
        payload = json.loads(Path(args.state).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load state: {exc}") from exc
    config = WorldConfig.from_json(payload["config"])
    state = EquilibriumState.from_json(payload["state"])
    distances = np.asarray(payload["distances"])
    flows = trade_flows(state, config)
    gdp = state.w * config.L_E
    fit = gravity_fit(flows, distances, gdp)
    fit["kappa_lt_distance_elasticity"] = kappa_lt_distance_elasticity(config, distances)
    ranks = median_revenue_by_rank(state, config, origin=args.origin)
    outputs = [
        _write_json(out, "gravity.json", fit),
        _write_csv(
            out,
            "median_revenue_by_rank.csv",
            ["rank", "dest", "popularity", "median_log10_rev"],
            [
                (r["rank"], r["dest"], r["popularity"], r["median_log10_rev"])
                for r in ranks["rows"]
            ],
        ),
    ]
    _write_manifest(out, argv, payload.get("seed"), payload["config"], outputs)
    print(json.dumps(fit))
    return 0


def cmd_laplace(args, argv):
    out = _out_dir(args)
    if args.action == "classify":
        if not args.form:
            raise UsageError("classify needs --form")
        res = complete_monotonicity_test(args.form, order=args.order)
        prof = passthrough_profile(args.form)
        record = {
            "form": args.form,
            "cm": res["cm"],
            "first_violation_order": res["first_violation_order"],
            "path": res["path"],
            "passthrough_verdict": prof["verdict"],
        }
        outputs = [_write_json(out, f"laplace_{args.form}.json", record)]
        _write_manifest(out, argv, None, vars(args) | {"out": None}, outputs)
        print(json.dumps(record))
        return 0
    rows = []
    for name, form in sorted(CATALOG.items()):
        res = complete_monotonicity_test(name, order=args.order)
        prof = passthrough_profile(name)
        rows.append(
            (
                name,
                res["cm"],
                "cm" if form.cm_expected else "non-cm",
                res["first_violation_order"] or "",
                prof["verdict"],
            )
        )
    outputs = [
        _write_csv(
            out,
            "laplace_table.csv",
            ["form", "cm_verdict", "theorem_membership", "violation_order", "passthrough"],
            rows,
        )
    ]
    _write_manifest(out, argv, None, {"order": args.order}, outputs)
    print(f"wrote {outputs[0]} with {len(rows)} forms")
    return 0


def cmd_aggregate(args, argv):
    out = _out_dir(args)
    try:
        spec_obj = json.loads(Path(args.spec).read_text())
        spec = AggregationSpec(
            P=PowerSum.from_json(spec_obj["P"]),
            MC0=PowerSum.from_json(spec_obj["MC0"]),
            MC1=PowerSum.from_json(spec_obj["MC1"]),
            G_prime=PowerSum.from_json(spec_obj["G_prime"]),
            a_lo=float(spec_obj["a_lo"]),
            a_hi=float(spec_obj["a_hi"]),
        )
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"bad aggregation spec: {exc}") from exc
    agg = aggregate_firm_integrals(spec)
    record = {
        **{k: v for k, v in agg.items()},
        "revenue_oracle_delta": agg["revenue"] - agg["oracle_revenue"],
        "cost_oracle_delta": agg["cost"] - agg["oracle_cost"],
    }
    outputs = [_write_json(out, "aggregates.json", record)]
    _write_manifest(out, argv, None, spec_obj, outputs)
    print(json.dumps(record))
    return 0


def cmd_apps(args, argv):
    out = _out_dir(args)
    if args.model == "sz":
        if args.income:
            grid = np.linspace(args.w0_min, args.w0_max, args.points)
            rows = [(w0, sz_hoarding_income_form(float(w0))) for w0 in grid]
            outputs = [_write_csv(out, "sz_income_hoarding.csv", ["W0", "hoarding"], rows)]
            record = {"points": len(rows), "h_first": rows[0][1], "h_last": rows[-1][1]}
        else:
            record = {"lam": args.lam, "t": args.t, "hoarding": sz_hoarding_bp(args.lam, args.t)}
            outputs = [_write_json(out, "sz_bp.json", record)]
    elif args.model == "ac":
        params = SourcingParams(t=args.t, u=args.u, ratio=args.ratio)
        grid = np.linspace(0.02, 1.0, args.points)
        rows = [(j, ac_beta_star(float(j), params)) for j in grid]
        outputs = [_write_csv(out, "ac_beta_star.csv", ["j", "beta_star"], rows)]
        record = {"points": len(rows)}
        if args.restricted:
            res = ac_restricted_thresholds(
                p0=args.p0,
                p_mt=args.p_mt,
                p_m2t=args.p_m2t,
                mc_mt=args.mc_mt,
                t=args.t,
                beta_O=args.beta_o,
                beta_I=args.beta_i,
            )
            record["restricted"] = {
                "k": res.k,
                "lam": res.lam,
                "q_low": res.q_low,
                "q_high": res.q_high,
                "interior_band": res.has_interior_band,
            }
            outputs.append(_write_json(out, "ac_restricted.json", record["restricted"]))
    else:  # chain
        try:
            spec = json.loads(Path(args.spec).read_text())
            p_m = LaplaceMeasure(masses=tuple(map(tuple, spec["p_m"])))
            acs = [LaplaceMeasure(masses=tuple(map(tuple, m))) for m in spec["ac"]]
            ns = spec["n"]
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"bad chain spec: {exc}") from exc
        f1 = salinger_chain(p_m, acs, ns)
        record = {"f1_masses": [[t, w] for t, w in f1.masses]}
        outputs = [_write_json(out, "chain_foc.json", record)]
    _write_manifest(out, argv, None, {"model": args.model}, outputs)
    print(json.dumps(record))
    return 0


def cmd_fit_demand(args, argv):
    out = _out_dir(args)
    spec = IncomeTargetSpec(
        family=args.family,
        alpha=args.alpha,
        beta=args.beta,
        mu=args.mu,
        sigma=args.sigma,
        n_samples=args.samples,
    )
    q, values = generate_income_quantiles(spec, seed=args.seed)
    step = max(1, len(q) // args.fit_points)
    fit = fit_income_form(
        list(zip(q[::step], values[::step])),
        b_grid=np.arange(args.b_min, args.b_max + 1e-9, args.b_step),
    )
    outputs = [
        _write_json(out, "demand_fit.json", fit),
        _write_csv(
            out,
            "income_quantiles.csv",
            ["quantile_from_top", "income"],
            list(zip(q[::step], values[::step])),
        ),
    ]
    _write_manifest(out, argv, args.seed, vars(args) | {"out": None}, outputs)
    print(json.dumps(fit))
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tradeforms", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    mono = sub.add_parser("monopoly", help="solve one monopoly/conduct FOC")
    mono.add_argument("--demand", required=True, help="inverse demand power-sum JSON")
    mono.add_argument("--mc", required=True, help="marginal cost power-sum JSON")
    mono.add_argument("--theta", type=float, default=1.0)
    mono.add_argument("--out")
    mono.set_defaults(fn=cmd_monopoly)

    interp = sub.add_parser("interp", help="spline interpolation across solvable exponents")
    interp.add_argument("--mc0", type=float, required=True)
    interp.add_argument("--mc1", type=float, required=True)
    interp.add_argument("--mr0", type=float, required=True)
    interp.add_argument("--grid", type=int, default=200)
    interp.add_argument("--out")
    interp.set_defaults(fn=cmd_interp)

    eoq = sub.add_parser("eoq", help="shipping-scale estimation")
    eoq_sub = eoq.add_subparsers(dest="action", required=True)
    est = eoq_sub.add_parser("estimate")
    est.add_argument("--input", required=True)
    est.add_argument("--min-firms", type=int, default=10)
    est.add_argument("--min-years", type=int, default=2)
    est.add_argument("--cutoffs")
    est.add_argument("--out")
    est.set_defaults(fn=cmd_eoq)

    trade = sub.add_parser("trade", help="world equilibrium runs")
    trade_sub = trade.add_subparsers(dest="action", required=True)
    run = trade_sub.add_parser("run")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out")
    run.set_defaults(fn=cmd_trade_run)
    grav = trade_sub.add_parser("gravity")
    grav.add_argument("--state", required=True)
    grav.add_argument("--origin", type=int, default=0)
    grav.add_argument("--out")
    grav.set_defaults(fn=cmd_trade_gravity)

    grav_alias = sub.add_parser("gravity", help="gravity fit from a saved equilibrium")
    grav_alias.add_argument("--state", required=True)
    grav_alias.add_argument("--origin", type=int, default=0)
    grav_alias.add_argument("--out")
    grav_alias.set_defaults(fn=cmd_trade_gravity)

    lap = sub.add_parser("laplace", help="demand-form classification")
    lap_sub = lap.add_subparsers(dest="action", required=True)
    cls = lap_sub.add_parser("classify")
    cls.add_argument("--form", required=True)
    cls.add_argument("--order", type=int, default=10)
    cls.add_argument("--out")
    cls.set_defaults(fn=cmd_laplace)
    tab = lap_sub.add_parser("table")
    tab.add_argument("--order", type=int, default=10)
    tab.add_argument("--out")
    tab.set_defaults(fn=cmd_laplace, form=None)

    agg = sub.add_parser("aggregate", help="heterogeneous-firm aggregation integrals")
    agg.add_argument("--spec", required=True)
    agg.add_argument("--out")
    agg.set_defaults(fn=cmd_aggregate)

    apps = sub.add_parser("apps", help="application closed forms")
    apps_sub = apps.add_subparsers(dest="model", required=True)
    sz = apps_sub.add_parser("sz")
    sz.add_argument("--lam", type=float, default=1.0)
    sz.add_argument("--t", type=float, default=0.5)
    sz.add_argument("--income", action="store_true")
    sz.add_argument("--w0-min", type=float, default=10_000.0)
    sz.add_argument("--w0-max", type=float, default=50_000.0)
    sz.add_argument("--points", type=int, default=100)
    sz.add_argument("--out")
    sz.set_defaults(fn=cmd_apps)
    ac = apps_sub.add_parser("ac")
    ac.add_argument("--t", type=float, default=0.35)
    ac.add_argument("--u", type=float, default=0.7)
    ac.add_argument("--ratio", type=float, default=-4.0)
    ac.add_argument("--points", type=int, default=50)
    ac.add_argument("--restricted", action="store_true")
    ac.add_argument("--p0", type=float, default=0.2)
    ac.add_argument("--p-mt", type=float, default=2.0)
    ac.add_argument("--p-m2t", type=float, default=-4.0)
    ac.add_argument("--mc-mt", type=float, default=0.5)
    ac.add_argument("--beta-o", type=float, default=0.3)
    ac.add_argument("--beta-i", type=float, default=0.8)
    ac.add_argument("--out")
    ac.set_defaults(fn=cmd_apps)
    chain = apps_sub.add_parser("chain")
    chain.add_argument("--spec", required=True)
    chain.add_argument("--out")
    chain.set_defaults(fn=cmd_apps)

    fit = sub.add_parser("fit-demand", help="income-distribution demand fit")
    fit.add_argument("--family", default="dPln", choices=["dPln", "lognormal"])
    fit.add_argument("--alpha", type=float, default=3.0)
    fit.add_argument("--beta", type=float, default=1.43)
    fit.add_argument("--mu", type=float, default=10.9)
    fit.add_argument("--sigma", type=float, default=0.5)
    fit.add_argument("--samples", type=int, default=200_000)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--fit-points", type=int, default=2000)
    fit.add_argument("--b-min", type=float, default=0.25)
    fit.add_argument("--b-max", type=float, default=0.55)
    fit.add_argument("--b-step", type=float, default=0.025)
    fit.add_argument("--out")
    fit.set_defaults(fn=cmd_fit_demand)

    return p


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args, argv)
    except (DataError, OSError) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except TradeFormsError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return EXIT_NUMERICAL


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
