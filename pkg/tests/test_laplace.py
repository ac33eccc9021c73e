import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad

from tradeforms.errors import CatalogMiss, GridTooCoarse
from tradeforms.forms import PowerSum, income_form
from tradeforms.laplace import (
    CATALOG,
    DensityPart,
    LaplaceMeasure,
    classify_measure,
    complete_monotonicity_test,
    cs_s_derivatives,
    discrete_approx,
    gumbel_measure,
    measure_to_power_sum,
    numeric_cm_test,
    passthrough_profile,
    power_sum_to_measure,
    synthesize,
    utility_to_price_measure,
)

rng = np.random.default_rng(61424)


class TestSynthesize:
    def test_bp_measure(self):
        m = LaplaceMeasure(masses=((0.0, 1.5), (0.25, 2.0)))
        for q in (0.2, 1.0, 3.0):
            assert synthesize(m, q) == pytest.approx(1.5 + 2.0 * q**-0.25)

    def test_linear_masses(self):
        m = LaplaceMeasure(masses=((0.0, 2.0), (-1.0, -0.5)))
        assert synthesize(m, 0.8) == pytest.approx(2.0 - 0.5 * 0.8)

    def test_delta_derivative_semantics(self):
        # -beta*delta'(t) reproduces -beta*log(q), the logistic's log term
        m = LaplaceMeasure(delta_derivs=((0.0, 1, -2.0),))
        for q in (0.3, 0.9, 2.0):
            assert synthesize(m, q) == pytest.approx(-2.0 * math.log(q))

    def test_gumbel_density(self):
        m = gumbel_measure(3.0, 1.0)
        for q in np.linspace(0.05, 0.95, 7):
            want = 3.0 + math.log(-math.log(q))
            assert synthesize(m, q) == pytest.approx(want, abs=1e-6)

    def test_logistic_truncated_structure(self):
        # masses at negative integers plus delta' reproduce the quantile
        m = CATALOG["logistic"].structure
        for q in (0.05, 0.2):
            want = 6.0 - math.log(q / (1 - q))
            assert synthesize(m, q) == pytest.approx(want, abs=5e-7)


class TestMeasureConversions:
    def test_power_sum_round_trip(self):
        for _ in range(10):
            ps = PowerSum(zip(rng.uniform(-2, 2, 4), rng.uniform(-2, 2, 4)))
            m = power_sum_to_measure(ps)
            assert measure_to_power_sum(m) == ps
            for q in (0.3, 1.7):
                assert synthesize(m, q) == pytest.approx(ps(q))

    def test_income_form_mass_locations(self):
        m = power_sum_to_measure(income_form(1.0, -0.5, 2.5, 0.4))
        assert sorted(t for t, _ in m.masses) == pytest.approx([-0.4, 0.0, 0.4])

    def test_price_from_utility(self):
        # U = q^0.8 has u-measure mass at t = -0.8; P = U' = 0.8 q^-0.2,
        # p(t) = (1-t) u(t-1) puts mass 0.8 at t = 0.2
        u = LaplaceMeasure(masses=((-0.8, 1.0),))
        p = utility_to_price_measure(u)
        assert len(p.masses) == 1
        assert p.masses[0][0] == pytest.approx(0.2)
        assert p.masses[0][1] == pytest.approx(0.8)
        # consistency: CE utility maps to BP-style price location shift
        assert synthesize(p, 2.0) == pytest.approx(0.8 * 2.0**-0.2)


class TestDiscreteApprox:
    @staticmethod
    def gaussian_bump(center=-2.0, width=0.6):
        return lambda t: math.exp(-((t - center) ** 2) / (2 * width**2))

    def test_zero_function(self):
        res = discrete_approx(lambda t: 0.0, -4.0, 0.0, 0.25, q=1.3, m=1)
        assert res.approx == 0.0
        assert res.r2_correction == 0.0
        assert res.r3_bound == 0.0

    def test_gaussian_vs_quadrature(self):
        f = self.gaussian_bump()
        for q in (0.7, 1.0, 1.8):
            res = discrete_approx(f, -6.0, 1.0, 0.25, q=q, m=1)
            exact, _ = quad(lambda t: f(t) * q ** (-t), -6.0, 1.0, limit=200)
            tail, _ = quad(lambda t: f(t) * q ** (-t), -40.0, -6.0)
            assert abs(res.approx - exact) <= res.r3_bound + abs(tail) + 1e-14

    def test_halving_dt_eighth_error(self):
        f = self.gaussian_bump(center=-2.5, width=0.8)
        q = 1.4
        exact, _ = quad(lambda t: f(t) * q ** (-t), -7.0, 1.0, epsabs=1e-14, limit=400)
        errs = []
        for dt in (0.5, 0.25, 0.125):
            res = discrete_approx(f, -7.0, 1.0, dt, q=q, m=1)
            errs.append(abs(res.approx - exact))
        assert errs[0] / errs[1] >= 8.0
        assert errs[1] / errs[2] >= 8.0

    def test_grid_too_coarse(self):
        f = self.gaussian_bump(width=0.2)
        with pytest.raises(GridTooCoarse):
            discrete_approx(f, -4.0, 0.0, 1.0, q=2.0, m=1, tol=1e-12)


class TestClassifyMeasure:
    def test_positive_masses_on_negative_axis_reversed(self):
        # positive mass at negative t makes t*p negative
        res = classify_measure(LaplaceMeasure(masses=((-1.0, 0.5),)))
        assert res["cm"] == "no"

    def test_deriv_survives(self):
        res = classify_measure(LaplaceMeasure(delta_derivs=((0.0, 2, -0.3),)))
        assert res["cm"] == "no"

    def test_logistic_structure_passes(self):
        res = classify_measure(CATALOG["logistic"].structure)
        assert res["cm"] == "yes"

    def test_mass_beyond_one(self):
        res = classify_measure(LaplaceMeasure(masses=((1.5, 1.0),)))
        assert res["cm"] == "no"


class TestNormalSeriesWeights:
    def test_table_weights_match_taylor(self):
        # delta-derivative weights are the Taylor coefficients of the
        # quantile demand in log q at the median (population-of-two units)
        mu, sigma = 6.0, 1.0
        P_their = lambda s: mu + mp.sqrt(2) * sigma * _erfcinv(mp.exp(s))
        coeffs = mp.taylor(P_their, 0, 3)
        got = [float(c) for c in coeffs]
        w1 = -math.sqrt(math.pi / 2) * sigma
        w2 = -0.5 * math.sqrt(math.pi / 2) * sigma
        w3 = (-math.sqrt(2) * math.pi**1.5 - 2 * math.sqrt(2 * math.pi)) * sigma / 24
        assert got[0] == pytest.approx(mu, rel=1e-8)
        assert got[1] == pytest.approx(w1, rel=1e-6)
        assert got[2] == pytest.approx(w2, rel=1e-5)
        assert got[3] == pytest.approx(w3, rel=1e-4)


def _erfcinv(y):
    return mp.erfinv(1 - y)


class TestCompleteMonotonicity:
    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_catalog_matches_theorem_membership(self, name):
        expected = "yes" if CATALOG[name].cm_expected else "no"
        assert complete_monotonicity_test(name)["cm"] == expected

    def test_power_sum_paths(self):
        ce = PowerSum([(2.0, -0.25)])
        assert complete_monotonicity_test(ce)["cm"] == "yes"
        bad = PowerSum([(2.0, -0.25), (-0.5, -0.6)])
        assert complete_monotonicity_test(bad)["cm"] == "no"

    def test_unknown_form(self):
        with pytest.raises(CatalogMiss):
            complete_monotonicity_test("translog")

    def test_aids_numeric_violation(self):
        res = numeric_cm_test(CATALOG["aids"])
        assert res["cm"] == "no"
        assert res["first_violation_order"] <= 10

    def test_lognormal_deep_tail_numeric_violation(self):
        # the tenth derivative flips sign deep in the upper tail
        form = CATALOG["lognormal"]
        derivs = cs_s_derivatives(form, 1e-4, 10)
        assert derivs[9] < 0

    def test_normal_structure_reason(self):
        res = complete_monotonicity_test("normal")
        assert res["cm"] == "no"
        assert res["path"] == "structure"
        assert any("delta^2" in r for r in res.get("reasons", []))


class TestPassThrough:
    def test_bp_constant(self):
        prof = passthrough_profile("bp")
        assert prof["verdict"] == "constant"
        eps = CATALOG["bp"].params["eps"]
        assert prof["rho"][0] == pytest.approx(eps / (eps - 1.0), rel=1e-8)
        assert np.ptp(prof["rho"]) <= 1e-8

    def test_logistic_decreasing(self):
        grid = np.linspace(0.01, 0.99, 30)
        prof = passthrough_profile("logistic", q_grid=grid)
        assert prof["verdict"] == "decreasing"

    def test_aids_increasing(self):
        prof = passthrough_profile("aids")
        assert prof["verdict"] == "increasing"

    def test_cm_catalog_nonincreasing(self):
        for name, form in CATALOG.items():
            if form.cm_expected:
                prof = passthrough_profile(name)
                assert prof["verdict"] in ("constant", "decreasing"), name

    def test_cm_power_sum_rho_nonincreasing(self):
        # any CM power sum has nonincreasing rho on a log grid
        for _ in range(10):
            # CM construction: coefficients >= 0, exponents in (-1, 0)
            n = 3
            ps = PowerSum(zip(rng.uniform(0.2, 2.0, n), rng.uniform(-0.9, -0.05, n)))
            prof = passthrough_profile(ps, q_grid=np.logspace(-2, 1, 20))
            assert prof["verdict"] in ("constant", "decreasing")
