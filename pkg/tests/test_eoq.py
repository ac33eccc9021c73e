import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from tradeforms.datagen import make_eoq_panel
from tradeforms.eoq import (
    EoqParams,
    ShipmentPanel,
    estimate_beta,
    optimal_shipment,
    seasonality_index,
    sensitivity_table,
    shipping_cost,
)
from tradeforms.errors import InvalidGamma, NoQualifyingIndustries


class TestOptimalShipment:
    def test_classic_symmetric_point(self):
        out = optimal_shipment(EoqParams(1.0, 1.0, 0.0), 1.0)
        assert out["q_s"] == pytest.approx(1.0)
        assert out["f_s"] == pytest.approx(1.0)
        assert out["min_cost"] == pytest.approx(2.0)

    def test_classic_square_root_rule(self):
        p = EoqParams(2.0, 3.0, 0.0)
        for q in (0.5, 1.0, 7.0):
            out = optimal_shipment(p, q)
            assert out["q_s"] == pytest.approx(np.sqrt(3.0 * q / 2.0), rel=1e-12)

    def test_against_scalar_minimizer(self):
        # golden-section oracle over shipment size
        p = EoqParams(2.0, 1.0, 0.5)
        q = 8.0
        out = optimal_shipment(p, q)
        assert out["q_s"] == pytest.approx(2.0 ** (2.0 / 3.0), rel=1e-10)
        res = minimize_scalar(
            lambda s: shipping_cost(p, s, q), bracket=(0.1, 1.0, 50.0), method="golden",
            options={"xtol": 1e-12},
        )
        assert out["q_s"] == pytest.approx(res.x, rel=1e-6)
        assert out["min_cost"] == pytest.approx(res.fun, rel=1e-10)

    def test_first_order_condition(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = EoqParams(*rng.uniform(0.2, 3.0, 2), float(rng.uniform(0.0, 0.95)))
            q = float(rng.uniform(0.5, 20.0))
            qs = optimal_shipment(p, q)["q_s"]
            h = 1e-6 * qs
            d = (shipping_cost(p, qs + h, q) - shipping_cost(p, qs - h, q)) / (2 * h)
            scale = shipping_cost(p, qs, q) / qs
            assert abs(d) <= 1e-8 * scale + 1e-8

    def test_invalid_gamma(self):
        with pytest.raises(InvalidGamma):
            EoqParams(1.0, 1.0, 1.0)
        with pytest.raises(InvalidGamma):
            EoqParams(1.0, 1.0, -0.1)


class TestEstimator:
    def test_exact_recovery(self):
        for gamma in (0.0, 0.36066, 0.7):
            beta = (1 - gamma) / (2 - gamma)
            panel = make_eoq_panel(
                n_industries=4, firms_per_industry=12, exact=True, beta_mean=beta, seed=2
            )
            est = estimate_beta(panel, {"min_firms_per_industry": 4})
            assert est["pooled"]["beta"] == pytest.approx(beta, abs=1e-6)
            assert 0 < est["pooled"]["beta"] <= 0.5

    def test_paper_matched_panel(self):
        panel = make_eoq_panel(seed=11)
        est = estimate_beta(panel)
        assert 0.36 <= est["pooled"]["beta"] <= 0.42
        assert est["n_industries"] == 70

    def test_no_frequency_variation(self):
        # every firm ships every month regardless of size: slope 0
        records = []
        rng = np.random.default_rng(3)
        for j in range(12):
            q = float(rng.uniform(1, 100))
            for y in (2000, 2001):
                for m in range(1, 13):
                    records.append((f"F{j}", "11111111", y, m, q / 12))
        est = estimate_beta(ShipmentPanel(records), {"min_firms_per_industry": 5})
        assert est["pooled"]["beta"] == pytest.approx(0.0, abs=1e-12)

    def test_small_industry_excluded(self):
        panel = make_eoq_panel(n_industries=1, firms_per_industry=2, seed=0)
        with pytest.raises(NoQualifyingIndustries):
            estimate_beta(panel)  # min 10 firms per industry by default
        panel3 = make_eoq_panel(n_industries=1, firms_per_industry=3, seed=0)
        est = estimate_beta(panel3, {"min_firms_per_industry": 3})
        assert est["n_industries"] == 1

    def test_min_years_rule(self):
        # one-year firms drop out under the two-year rule
        records = [("F1", "22222222", 2000, m, 1.0) for m in range(1, 7)]
        records += [
            ("F%d" % j, "22222222", y, m, float(j))
            for j in range(2, 13)
            for y in (2000, 2001)
            for m in (1, 2, 3)
        ]
        est = estimate_beta(ShipmentPanel(records), {"min_firms_per_industry": 2})
        assert est["per_industry"]["22222222"]["n_firms"] == 11


class TestSeasonality:
    def test_uniform(self):
        records = [("F", "1", 2000, m, 5.0) for m in range(1, 13)]
        assert seasonality_index(ShipmentPanel(records))["1"] == pytest.approx(1 / 12)

    def test_single_month(self):
        records = [("F", "1", 2000, 3, 5.0), ("F", "1", 2001, 3, 7.0)]
        assert seasonality_index(ShipmentPanel(records))["1"] == pytest.approx(1.0)

    def test_two_equal_months(self):
        records = [("F", "1", 2000, 1, 5.0), ("F", "1", 2000, 7, 5.0)]
        assert seasonality_index(ShipmentPanel(records))["1"] == pytest.approx(0.5)


class TestSensitivity:
    def test_paper_scale(self):
        panel = make_eoq_panel(seed=4)
        rows = sensitivity_table(panel, [10])
        assert rows[0]["n_industries"] == 70
        assert rows[0]["beta"] == pytest.approx(0.39, abs=0.04)
        assert rows[0]["sigma_beta"] == pytest.approx(0.12, abs=0.04)

    def test_oversized_cutoff(self):
        panel = make_eoq_panel(n_industries=3, seed=4)
        rows = sensitivity_table(panel, [999])
        assert rows[0]["n_industries"] == 0
        assert rows[0]["beta"] is None

    def test_selection_monotonicity(self):
        panel = make_eoq_panel(
            n_industries=12, firms_per_industry=9, seed=8
        )
        rows = sensitivity_table(panel, [5, 10])
        assert rows[0]["n_industries"] >= rows[1]["n_industries"]


class TestPanelValidation:
    def test_duplicate_key_rejected(self):
        with pytest.raises(ValueError):
            ShipmentPanel([("F", "1", 2000, 1, 1.0), ("F", "1", 2000, 1, 2.0)])

    def test_bad_month(self):
        with pytest.raises(ValueError):
            ShipmentPanel([("F", "1", 2000, 13, 1.0)])
