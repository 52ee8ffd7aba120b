from fractions import Fraction as Fr
import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ddsde_avg.rates import (
    RateParams,
    RateWarning,
    closed_form_inf_h,
    example_power_kernel_exponents,
    example_sine_interaction_exponents,
    fit_rate,
    golden_section,
    inf_h_rate,
    omega_log,
    omega_power,
    rates_table,
    strong_rate_exponent,
    weak_rate_exponent,
)


class TestClosedForms:
    def test_weak_examples(self):
        assert weak_rate_exponent(RateParams(Fr(1), 1, Fr(4))) == Fr(3, 11)
        assert weak_rate_exponent(RateParams(Fr(1, 2), 1, Fr(3))) == Fr(1, 5)

    def test_weak_degenerate_limit(self):
        vals = [float(weak_rate_exponent(RateParams(1.0, 3, 3.0 + 10.0 ** -k))) for k in range(1, 8)]
        assert vals == sorted(vals, reverse=True) and vals[-1] < 1e-6

    def test_strong_examples(self):
        assert strong_rate_exponent(RateParams(Fr(1), 2, Fr(4), ell=Fr(1))) == Fr(2, 5)
        assert strong_rate_exponent(RateParams(Fr(1), 1, Fr(4), ell=Fr(1))) == Fr(6, 11)
        a = strong_rate_exponent(RateParams(Fr(1), 2, Fr(6), ell=Fr(1, 4)))
        b = strong_rate_exponent(RateParams(Fr(1), 2, Fr(6), ell=Fr(1, 2)))
        assert b == 2 * a

    def test_mu_independent_uses_delta(self):
        rp = RateParams(Fr(1), 1, math.inf, ell=Fr(1, 2), delta=Fr(0))
        assert strong_rate_exponent(rp, mu_dependent=False) == Fr(1, 3)
        rp = RateParams(Fr(1), 1, Fr(4), ell=Fr(1), delta=Fr(1, 10))
        assert strong_rate_exponent(rp, mu_dependent=False) == 2 * Fr(9, 10) / (2 + Fr(9, 10))

    @pytest.mark.parametrize("a1", [Fr(1, 4), Fr(1, 2), Fr(3, 4)])
    @pytest.mark.parametrize("a2", [Fr(11, 10), Fr(5, 4), Fr(7, 5)])
    @pytest.mark.parametrize("d", [2, 3])
    def test_power_kernel_displays(self, a1, a2, d):
        p0 = Fr(d) / (a2 - 1)
        weak, strong = example_power_kernel_exponents(a1, a2)
        assert weak_rate_exponent(RateParams(a1, d, p0)) == weak
        assert strong_rate_exponent(RateParams(a1, d, p0, ell=Fr(1))) == strong

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("p0", [4, 6, 10])
    def test_sine_displays(self, d, p0):
        weak, strong = example_sine_interaction_exponents(d, p0)
        assert weak_rate_exponent(RateParams(Fr(1), d, Fr(p0))) == weak
        assert strong_rate_exponent(RateParams(Fr(1), d, Fr(p0), ell=Fr(1))) == strong

    def test_invalid_params(self):
        for kw in ({"alpha": 0.0, "d": 1}, {"alpha": 1.0, "d": 3, "p0": 3.0},
                   {"alpha": 1.0, "d": 1, "ell": 1.5}, {"alpha": 1.0, "d": 1, "delta": 1.0}):
            with pytest.raises(ValueError):
                RateParams(**kw)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0.05, 3), b=st.floats(0.05, 3), d=st.integers(1, 4),
           q=st.floats(1.01, 50), q2=st.floats(1.01, 50))
    def test_strictly_increasing(self, a, b, d, q, q2):
        assume(abs(a - b) > 1e-6 and abs(q - q2) > 1e-6)
        lo = max(d, 2)
        pa, pb = RateParams(min(a, b), d, lo * q), RateParams(max(a, b), d, lo * q)
        assert weak_rate_exponent(pa) < weak_rate_exponent(pb)
        assert strong_rate_exponent(pa) < strong_rate_exponent(pb)
        qa, qb = RateParams(a, d, lo * min(q, q2)), RateParams(a, d, lo * max(q, q2))
        assert weak_rate_exponent(qa) < weak_rate_exponent(qb)
        assert strong_rate_exponent(qa) < strong_rate_exponent(qb)


class TestInfH:
    @pytest.mark.parametrize("mode", ["weak", "strong"])
    @pytest.mark.parametrize("k", [6, 10, 14, 20])
    def test_numeric_matches_closed_form(self, mode, k):
        r = np.random.default_rng(k)
        for _ in range(10):
            alpha, g = r.uniform(0.2, 2), r.uniform(0.1, 1)
            eps = 2.0 ** -k
            h, v = closed_form_inf_h(alpha, g, eps, mode)
            res = inf_h_rate(omega_power(alpha), g, eps, mode)
            assert res.value == pytest.approx(v, rel=1e-6)
            assert res.omega_monotone

    @pytest.mark.parametrize("mode", ["weak", "strong"])
    def test_log_log_slope_is_exponent(self, mode):
        r = np.random.default_rng(3)
        for _ in range(20):
            alpha, g = r.uniform(0.2, 2), r.uniform(0.1, 1)
            a = alpha if mode == "weak" else 2 * alpha
            expo = a * g / (a + g)
            v1 = inf_h_rate(omega_power(alpha), g, 2.0 ** -6, mode).value
            v2 = inf_h_rate(omega_power(alpha), g, 2.0 ** -14, mode).value
            slope = math.log(v2 / v1) / math.log(2.0 ** -8)
            assert slope == pytest.approx(expo, abs=1e-6)

    def test_zero_omega(self):
        eps = 2.0 ** -8
        res = inf_h_rate(lambda t: 0.0, 0.5, eps, "weak")
        assert res.h_star == pytest.approx(eps ** 2, rel=1e-6)
        assert res.value == pytest.approx(eps, rel=1e-5)

    @pytest.mark.parametrize("k", [8, 12, 16])
    def test_log_omega_within_log_factor(self, k):
        eps = 2.0 ** -k
        power = inf_h_rate(omega_power(1.0), 0.5, eps, "weak").value
        log = inf_h_rate(omega_log, 0.5, eps, "weak").value
        assert power <= log * (1 + 1e-12) and log <= (1 + abs(math.log(eps))) * power

    def test_log_mode_warns(self):
        with pytest.warns(RateWarning):
            e = weak_rate_exponent(RateParams("log", 1, math.inf))
        assert 0 < e < 1 / 3

    def test_non_monotone_flag(self):
        with pytest.warns(RateWarning):
            res = inf_h_rate(lambda t: 1 + math.sin(t), 0.5, 0.01, "weak")
        assert not res.omega_monotone

    def test_golden_section_quadratic(self):
        x, fx = golden_section(lambda u: (u - 0.3) ** 2 + 1, -2, 5)
        assert x == pytest.approx(0.3, abs=1e-6) and fx == pytest.approx(1.0)
        x, _ = golden_section(lambda u: u, 0, 1)
        assert x == 0

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            inf_h_rate(omega_power(1), 0.5, 0.0, "weak")
        with pytest.raises(ValueError):
            inf_h_rate(omega_power(1), 0.5, 0.1, "medium")


class TestFit:
    def test_exact_power(self):
        slope, icpt, r2 = fit_rate([(e, 3.0 * e ** 0.4) for e in (0.5, 0.25, 0.125, 0.0625)])
        assert slope == pytest.approx(0.4, abs=1e-12) and abs(r2 - 1) < 1e-10
        assert icpt == pytest.approx(math.log(3.0))

    def test_two_regimes(self):
        eps = [2.0 ** -k for k in range(1, 9)]
        pts = [(e, e ** 0.3 if e > 0.05 else 0.05 ** 0.3 * (e / 0.05) ** 0.9) for e in eps]
        assert 0.3 < fit_rate(pts)[0] < 0.9

    def test_constant(self):
        slope, _, r2 = fit_rate([(e, 2.0) for e in (0.1, 0.01, 0.001)])
        assert slope == pytest.approx(0.0, abs=1e-12) and r2 == 1.0

    def test_rejects_bad_points(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 1.0), (0.01, 0.0), (0.001, 1.0)])
        with pytest.raises(ValueError):
            fit_rate([(0.1, 1.0), (0.01, 1.0)])


def test_rates_table_rows():
    rows = rates_table(RateParams(0.5, 2, 3.0), [2.0 ** -4, 2.0 ** -8], alpha2=1.5)
    assert len(rows) == 4
    assert {r["note"] for r in rows} == {"", "supremal, not attained"}
    sup = [r for r in rows if r["note"]][0]
    assert sup["p0"] == pytest.approx(4.0)
    assert all(r["rms_order"] == pytest.approx(r["strong_exponent"] / (2 * r["ell"])) for r in rows)
    assert rows[1]["h_star_weak"] < rows[0]["h_star_weak"]
