from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import stats as sps

from radweb import stats as st
from radweb.paths import PathPolyline
from radweb.reference import sample_coalescing_bm


def _path(*pts):
    return PathPolyline(np.array(pts, dtype=float))


# three paths on [0, 1]; the two left ones meet at time 0.5
A = _path((0.0, 0.0), (0.2, 0.5), (0.2, 1.0))
B = _path((0.4, 0.0), (0.2, 0.5), (0.2, 1.0))
C = _path((0.9, 0.0), (0.9, 1.0))


class TestEta:
    def test_no_path_in_window(self):
        assert st.eta_count([A, B, C], 0.0, 1.0, 2.0, 3.0) == 0

    def test_all_coalesced(self):
        assert st.eta_count([A, B], 0.0, 1.0, -1.0, 1.0) == 1

    def test_one_coalescence(self):
        assert st.eta_count([A, B, C], 0.0, 1.0, -1.0, 1.0) == 2

    def test_hat_no_path_in_window(self):
        assert st.eta_hat_count([A, B, C], 0.0, 1.0, 2.0, 3.0) == 0

    def test_hat_all_coalesced(self):
        assert st.eta_hat_count([A, B, C], 0.0, 1.0, 0.0, 0.5) == 1

    def test_hat_one_coalescence(self):
        assert st.eta_hat_count([A, B, C], 0.0, 1.0, 0.0, 1.0) == 2

    def test_late_starts_ignored(self):
        late = _path((0.5, 0.3), (0.5, 1.0))
        assert st.eta_count([A, late], 0.0, 1.0, -1.0, 1.0) == 1
        assert st.eta_hat_count([A, late], 0.0, 1.0, 0.0, 1.0) == 1

    def test_monotone_in_lag_on_reference_web(self):
        rng = np.random.default_rng(0)
        ens = sample_coalescing_bm([(y, 0.0) for y in np.linspace(-1, 1, 30)], 0.376,
                                   1e-3, 1.0, rng)
        counts = [st.eta_count(ens.paths, 0.0, t, -0.5, 0.5) for t in np.linspace(0.05, 1, 20)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))
        full = st.eta_count(ens.paths, 0.0, 0.5, -10, 10)
        assert st.eta_hat_count(ens.paths, 0.0, 0.5, -0.5, 0.5) <= full <= len(ens.paths)


class TestTests:
    def test_identical_samples(self):
        x = np.linspace(0, 1, 100)
        rep = st.two_sample_ks(x, x)
        assert rep.stat == 0.0 and rep.p == 1.0 and rep.passed

    def test_uniform_null_pvalues(self):
        rng = np.random.default_rng(1)
        ps = [st.two_sample_ks(rng.uniform(size=10_000), rng.uniform(size=10_000)).p
              for _ in range(60)]
        assert sps.kstest(ps, "uniform").pvalue > 0.01

    def test_power(self):
        rng = np.random.default_rng(2)
        rep = st.two_sample_ks(rng.uniform(size=10_000), rng.normal(0.5, 0.1, 10_000))
        assert rep.p < 1e-6 and not rep.passed

    def test_too_few(self):
        with pytest.raises(st.InsufficientData):
            st.two_sample_ks(np.zeros(10), np.zeros(50))

    def test_chi_square(self):
        rep = st.chi_square([10, 12, 8], [10, 10, 10])
        assert rep.stat == pytest.approx(0.8)
        assert rep.p == pytest.approx(sps.chi2.sf(0.8, 3))
        with pytest.raises(st.InsufficientData):
            st.chi_square([1, 2], [1, 2])

    def test_report_json(self):
        rep = st.StatsReport("x", estimate=float("inf"), p=0.5, threshold="t", passed=True,
                             meta={"k": np.int64(3)})
        d = json.loads(rep.to_json())
        assert set(d) == {"name", "estimate", "stderr", "stat", "p", "threshold", "pass", "meta"}
        assert d["estimate"] is None and d["meta"]["k"] == 3
        assert rep.line().startswith("PASS x")


class TestVariance:
    def test_calibration_on_reference(self):
        rng = np.random.default_rng(3)
        s2, k = 0.376, 4000
        ens = sample_coalescing_bm([(100.0 * i, 0.0) for i in range(k)], s2, 0.1, 0.8, rng)
        inc = np.array([p.value_at(0.8) - p.value_at(0.2) for p in ens.paths])
        rep = st.variance_rate(inc, 0.6, s2)
        assert abs(rep.estimate - s2) < 3 * rep.stderr
        assert rep.passed

    def test_wrong_reference_fails(self):
        rng = np.random.default_rng(4)
        rep = st.variance_rate(rng.normal(0, 1, 5000), 1.0, 2.0)
        assert not rep.passed

    def test_insufficient(self):
        with pytest.raises(st.InsufficientData):
            st.variance_rate(np.zeros(10), 1.0, 1.0)


class TestLLN:
    def test_zero_grid_point(self):
        c_hat = 0.5 * math.sqrt(math.pi)
        assert st.lln_curve([0.0], c_hat)[0] == 0.0
        rep = st.lln_deviation(np.zeros((5, 1)), np.array([0.0]), 100.0, c_hat)
        assert rep.estimate == 0.0 and rep.passed

    def test_curve_value(self):
        assert st.lln_curve([0.3], 0.5 * math.sqrt(math.pi))[0] == pytest.approx(0.3622, abs=1e-4)


class TestTail:
    def test_half_stable_calibration(self):
        # hitting time of 0 by standard BM from 1 has the law of 1/Z^2
        rng = np.random.default_rng(5)
        nu = 1.0 / rng.normal(size=20_000) ** 2
        rep = st.coalescence_tail_fit(nu, (1e2, 1e4))
        assert rep.passed
        lo, hi = rep.meta["ci99"]
        assert lo <= -0.5 + 0.05 and hi >= -0.5 - 0.05

    def test_m_linearity_calibration(self):
        # from distance 2 the hitting time scales by 4
        rng = np.random.default_rng(6)
        nu1 = 1.0 / rng.normal(size=20_000) ** 2
        nu2 = 4.0 / rng.normal(size=20_000) ** 2
        rep = st.survival_ratio(nu1, nu2, 1e3)
        assert rep.passed and rep.estimate == pytest.approx(2.0, abs=3 * rep.stderr)

    def test_censored_counts_as_survivor(self):
        s = st.survival_curve([1.0, math.inf, 3.0, math.inf], [0.5, 2.0, 10.0])
        np.testing.assert_allclose(s, [1.0, 0.75, 0.5])

    def test_all_coalesced(self):
        with pytest.raises(st.InsufficientData):
            st.coalescence_tail_fit(np.ones(100), (10.0, 100.0))


class TestDensity:
    def test_slope_recovered(self):
        rng = np.random.default_rng(7)
        lags = np.geomspace(1, 100, 10)
        d = 3.0 / np.sqrt(lags)[None, :] * rng.uniform(0.95, 1.05, size=(20, 10))
        rep = st.touch_density(lags, d)
        assert rep.estimate == pytest.approx(-0.5, abs=0.02) and rep.passed
        assert rep.stderr is not None

    def test_bound(self):
        rep = st.density_bound([1.0, 1.2, 0.9], 1.0)
        assert rep.estimate == pytest.approx(31 / 30) and rep.passed
        assert not st.density_bound([2.0, 2.0], 1.0).passed

    def test_binomial(self):
        rep = st.binomial_vs_oracle(520, 1000, 0.5)
        assert rep.passed and rep.stat == pytest.approx(0.02 / math.sqrt(0.25 / 1000), rel=0.05)
        assert not st.binomial_vs_oracle(600, 1000, 0.5).passed

    def test_distinct_tolerance(self):
        assert st.distinct_count([0.0, 1e-12, 1.0]) == 2
        assert st.distinct_count([]) == 0
