import math

import numpy as np
import pytest
from scipy import special, stats

from orbitpairs.asymptotics import (
    convergence_report,
    default_delta,
    gaussian_box_mass,
    gaussian_pair_sum,
    gaussian_tail,
    gaussian_weight,
    local_limit_prediction,
    theorem1_prediction,
)
from orbitpairs.census import count_orbits, enumerate_prime_orbits, shifted_count
from orbitpairs.errors import DomainError, ResourceError
from orbitpairs.thermo import ThermoSummary, pair_constant


def direct_pair_sum(T, beta, delta, hval):
    """k = 1 reference: plain loop over the integers in the ball."""
    total = 0.0
    r = int(delta * math.sqrt(T / hval)) + 2
    for a in range(-r, r + 1):
        if hval * a * a <= delta * delta * T:
            total += math.exp(-hval * (a * a + (a + beta) ** 2) / (2 * T))
    return total


class TestGaussianWeight:
    def test_examples(self):
        assert gaussian_weight(5.0, 0, [[2.0]]) == 1.0
        assert gaussian_weight(2.0, 2, [[1.0]]) == pytest.approx(math.exp(-1), rel=1e-15)
        assert gaussian_weight(2.0, 2, [[1.0]]) == pytest.approx(0.367879, abs=1e-6)

    def test_symmetric(self, rng):
        H = np.array([[2.0, 0.3], [0.3, 1.0]])
        for _ in range(10):
            a = tuple(int(x) for x in rng.integers(-5, 6, size=2))
            assert gaussian_weight(7.0, a, H) == gaussian_weight(7.0, tuple(-x for x in a), H)
            assert 0 < gaussian_weight(7.0, a, H) <= 1


class TestLocalLimit:
    def test_alpha_zero(self, golden_summary):
        s, T = golden_summary, 9.0
        expected = math.exp(s.h * T) / (s.h * T * math.sqrt(2 * math.pi) * s.sigma * math.sqrt(T))
        assert local_limit_prediction(T, 0, s) == pytest.approx(expected, rel=1e-13)

    def test_ratio_is_weight(self, golden_summary):
        s, T = golden_summary, 11.0
        base = local_limit_prediction(T, 0, s)
        for a in (-3, 1, 4):
            ratio = local_limit_prediction(T, a, s) / base
            assert ratio == pytest.approx(gaussian_weight(T, a, s.H_matrix), rel=1e-13)

    def test_mass_golden(self, golden_summary):
        s, T = golden_summary, 15.0
        main = math.exp(s.h * T) / (s.h * T)
        total = sum(local_limit_prediction(T, a, s) for a in range(-200, 201))
        assert 0.95 <= total / main <= 1.05

    def test_alpha_zero_trend(self, golden_table_22, golden_summary):
        # no fixed tolerance: the mean deviation of the measured/predicted ratio
        # over the upper half of the top decade must not exceed the lower half's
        s = golden_summary
        grid = np.round(np.arange(2.2, 22.0 + 1e-9, 0.05), 6)
        ratios = np.array([shifted_count(golden_table_22, t, 0, s.phi0) / local_limit_prediction(t, 0, s) for t in grid])
        mid = 0.5 * (grid[0] + grid[-1])
        lower = abs(ratios[grid < mid].mean() - 1)
        upper = abs(ratios[grid >= mid].mean() - 1)
        assert upper <= lower


class TestPairSum:
    def test_direct_summation(self):
        T = 1e4
        assert gaussian_pair_sum(T, 0, 10.0, [[1.0]]) == pytest.approx(direct_pair_sum(T, 0, 10.0, 1.0), rel=1e-12)
        # full-lattice value by the Poisson formula sqrt(pi T)
        assert gaussian_pair_sum(T, 0, 10.0, [[1.0]]) / math.sqrt(T) == pytest.approx(math.sqrt(math.pi), rel=5e-3)

    @pytest.mark.parametrize("beta", [0, 3, -7])
    def test_against_loop(self, golden_summary, beta):
        hval = golden_summary.H_matrix[0, 0]
        got = gaussian_pair_sum(400.0, beta, 2.5, golden_summary.H_matrix)
        assert got == pytest.approx(direct_pair_sum(400.0, beta, 2.5, hval), rel=1e-12)

    def test_beta_decay(self):
        # |value(beta) - value(0)| / sqrt(T) decays at least like T^(-1/2)
        Ts = np.array([1e2, 1e3, 1e4])
        diffs = [abs(gaussian_pair_sum(T, 3, 6.0, [[1.0]]) - gaussian_pair_sum(T, 0, 6.0, [[1.0]])) / math.sqrt(T) for T in Ts]
        slope = np.polyfit(np.log(Ts), np.log(diffs), 1)[0]
        assert slope <= -0.5

    def test_monotone_in_delta(self):
        H = np.array([[1.3, 0.2], [0.2, 0.8]])
        vals = [gaussian_pair_sum(50.0, (1, -1), d, H) for d in (0.5, 1, 2, 4, 8, 16)]
        assert all(b >= a * (1 - 1e-14) for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(vals[-2], rel=1e-12)

    def test_budget(self):
        with pytest.raises(ResourceError):
            gaussian_pair_sum(1e8, (0, 0, 0), 10.0, np.eye(3), budget=1000)


class TestTail:
    def test_examples(self):
        assert gaussian_tail(0.0, 1) == 1.0
        assert gaussian_tail(1.959964, 1) == pytest.approx(0.05, abs=1e-7)
        assert gaussian_tail(1.959964, 1) == pytest.approx(2 * (1 - special.ndtr(1.959964)), abs=1e-12)
        assert gaussian_tail(2.0, np.eye(2)) == pytest.approx(math.exp(-2), rel=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3, 6])
    def test_decreasing(self, k):
        vals = [gaussian_tail(d, k) for d in np.linspace(0, 8, 50)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6

    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_default_delta(self, k):
        d = default_delta(k)
        assert gaussian_tail(d, k) < 0.01
        assert gaussian_tail(d * (1 - 1e-6), k) >= 0.01 - 1e-8


class TestPairPrediction:
    def test_doubling(self, golden_summary):
        s, T = golden_summary, 7.0
        ratio = theorem1_prediction(2 * T, s) / theorem1_prediction(T, s)
        assert ratio == pytest.approx(math.exp(2 * s.h * T) * 2 ** -(2 + s.k / 2), rel=1e-12)

    def test_genus_two(self):
        s = ThermoSummary.from_constants(h=1.0, k=4, c_phi0=1.0)
        for T in (3.0, 10.0):
            assert theorem1_prediction(T, s) == pytest.approx(0.25 * math.exp(2 * T) / T**4, rel=1e-12)

    def test_golden(self, golden_summary):
        s = golden_summary
        assert theorem1_prediction(10.0, s) == pytest.approx(pair_constant(s) * math.exp(20 * s.h) / 10**2.5, rel=1e-12)


class TestBoxMass:
    @pytest.mark.parametrize("k", [1, 2, 3, 5])
    def test_whole_space(self, k):
        H = np.eye(k) + 0.2 * np.ones((k, k))
        assert gaussian_box_mass(([-np.inf] * k, [np.inf] * k), H) == pytest.approx(1.0, abs=1e-4 if k > 3 else 1e-8)

    def test_one_dimensional(self):
        assert gaussian_box_mass((0, np.inf), [[1.0]]) == 0.5
        assert gaussian_box_mass((-1, 1), [[1.0]]) == pytest.approx(math.erf(1 / math.sqrt(2)), abs=1e-12)
        assert gaussian_box_mass((-1, 1), [[1.0]]) == pytest.approx(0.682689, abs=1e-6)

    def test_empty_box(self):
        assert gaussian_box_mass((1, -1), [[1.0]]) == 0.0

    @pytest.mark.parametrize("k", [2, 3])
    def test_correlated_against_genz(self, k):
        H = np.linalg.inv(np.eye(k) + 0.4 * (np.ones((k, k)) - np.eye(k)))
        lo, hi = np.array([-1.0, -0.5, 0.2][:k]), np.array([0.7, np.inf, 1.5][:k])
        ref = stats.multivariate_normal.cdf(hi, np.zeros(k), np.linalg.inv(H), abseps=1e-9, releps=0, lower_limit=lo)
        assert gaussian_box_mass((lo, hi), H) == pytest.approx(ref, abs=2e-7)

    def test_independent_high_dimension(self):
        k = 5
        H = np.diag([1.0, 2.0, 0.5, 1.5, 3.0])
        lo, hi = -np.ones(k), np.array([1.0, 0.5, np.inf, 2.0, 0.3])
        sd = 1 / np.sqrt(np.diag(H))
        exact = np.prod(special.ndtr(hi / sd) - special.ndtr(lo / sd))
        val = gaussian_box_mass((lo, hi), H, seed=3)
        assert val == pytest.approx(exact, abs=1e-4)
        assert gaussian_box_mass((lo, hi), H, seed=3) == val


@pytest.fixture(scope="module")
def report(golden_table_12, golden_summary):
    return convergence_report(golden_table_12, golden_summary, [0, 2, -2, 40], [2.0, 6.0, 9.0, 12.0], alpha_list=[0, 1])


class TestReport:
    def test_symmetric_betas(self, report):
        assert report.ratios(2) == report.ratios(-2)

    def test_zero_count_ratio(self, report):
        far = report.ratios(40)
        assert all(v == 0.0 for v in far.values())

    def test_prediction_beta_free(self, report):
        by_t = {}
        for r in report.pair_rows:
            by_t.setdefault(r["T"], set()).add(repr(r["prediction"]))
        assert all(len(v) == 1 for v in by_t.values())

    def test_totals(self, report, golden_table_12):
        for r in report.total_rows:
            assert r["pair_total"] == r["pi_squared"] == count_orbits(golden_table_12, r["T"]) ** 2

    def test_direct_equals_convolution(self, report):
        assert all(r["direct"] == r["convolution"] for r in report.pair_rows)

    def test_ratios_finite_positive(self, report):
        for r in report.pair_rows + report.alpha_rows:
            assert r["ratio"] is not None and math.isfinite(r["ratio"]) and r["ratio"] >= 0

    def test_csv(self, report):
        text = report.to_csv()
        lines = text.splitlines()
        assert lines[0].startswith("# model_hash=")
        assert any(l.startswith("# delta=") for l in lines)
        header = next(l for l in lines if not l.startswith("#"))
        assert header == "kind,T,c_1,count,count_check,prediction,ratio,log_ratio"
        assert sum(l.startswith("pair,") for l in lines) == 16
        assert sum(l.startswith("alpha,") for l in lines) == 8
        clt = report.clt_csv().splitlines()
        assert clt[0] == "T,box,lo_1,hi_1,empirical,gaussian,deviation"

    def test_bad_grid(self, golden_table_12, golden_summary):
        with pytest.raises(DomainError):
            convergence_report(golden_table_12, golden_summary, [0], [5.0, 13.0])
        with pytest.raises(DomainError):
            convergence_report(golden_table_12, golden_summary, [0], [5.0, 4.0])
