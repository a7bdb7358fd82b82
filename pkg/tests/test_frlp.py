import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from prophet_lab import dist, frlp, lp
from prophet_lab.frlp import (
    BuildError,
    KThresholdLpParams,
    ObserveAcceptLpParams,
    TwoThresholdLpParams,
)

TWO = TwoThresholdLpParams(0.7067, 1.8353, 0.6204, zeta_grid=200)
OA = ObserveAcceptLpParams(0.72941, 0.64863, k=100, beta_ratio=1.03, zeta_grid=3)


def value(params):
    _, sol = frlp.solve_params(params)
    assert sol.optimal
    return sol.value


def highs_value(model):
    A, b, rel = model.dense()
    sign = np.array([-1.0 if r == ">=" else 1.0 for r in rel])
    res = linprog(model.objective, A_ub=A * sign[:, None], b_ub=b * sign,
                  bounds=[(0, None)] * model.n_vars, method="highs")
    assert res.status == 0
    return res.fun


class TestKThreshold:
    def test_one_threshold_at_one(self):
        assert value(KThresholdLpParams((1.0,), (1.0,))) == pytest.approx(1 - 1 / math.e, abs=1e-6)

    @given(st.floats(0.05, 6.0))
    def test_one_threshold_closed_form(self, c):
        assert value(KThresholdLpParams((c,), (1.0,), 5)) == pytest.approx(
            frlp.single_threshold_value(c), abs=1e-9)

    def test_two_equals_k2(self):
        a = frlp.build_two_threshold(TWO).dense()
        b = frlp.build_k_threshold(KThresholdLpParams((0.7067, 1.8353), (0.6204, 1 - 0.6204))).dense()
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) and a[2] == b[2]
        assert value(TWO) == pytest.approx(
            value(KThresholdLpParams((0.7067, 1.8353), (0.6204, 0.3796))), abs=1e-9)

    def test_two_threshold_value(self):
        assert value(TWO) >= 0.6786

    def test_five_thresholds(self):
        p = KThresholdLpParams((0.6561, 1.4082, 2.2735, 3.4423, 4.4783),
                               (0.64, 0.17, 0.11, 0.06, 0.02))
        assert value(p) >= 0.7004 - 1e-3

    @pytest.mark.parametrize("coarse", [2, 5, 12])
    def test_nested_zeta_grids(self, coarse):
        # Grid G sits inside grid 2G + 1, so the finer LP has a superset of rows.
        fine = 2 * coarse + 1
        lo, hi = 0.7, 1.8
        assert set(np.round(frlp.zeta_samples(lo, hi, coarse), 12)) <= set(
            np.round(frlp.zeta_samples(lo, hi, fine), 12))
        base = TwoThresholdLpParams(0.7067, 1.8353, 0.6204, coarse)
        finer = TwoThresholdLpParams(0.7067, 1.8353, 0.6204, fine)
        assert value(base) <= value(finer) + 1e-12

    def test_coarse_vs_fine_example(self):
        coarse = TwoThresholdLpParams(0.7067, 1.8353, 0.6204, 2)
        fine = TwoThresholdLpParams(0.7067, 1.8353, 0.6204, 400)
        assert value(coarse) <= value(fine)

    def test_matches_highs(self):
        model = frlp.build(TWO)
        assert value(TWO) == pytest.approx(highs_value(model), abs=1e-9)

    def test_dual_certificate(self):
        model, sol = frlp.solve_params(TWO)
        assert lp.dual_certificate(model, sol)

    @pytest.mark.parametrize("args", [
        (1.8, 0.7, 0.6), (0.7, 1.8, 0.0), (0.7, 1.8, 1.0), (0.0, 1.8, 0.5),
    ])
    def test_invalid(self, args):
        with pytest.raises(BuildError):
            TwoThresholdLpParams(*args)

    def test_rho_must_sum_to_one(self):
        with pytest.raises(BuildError):
            KThresholdLpParams((1.0, 2.0), (0.5, 0.4))


class TestObserveAccept:
    def test_claim_value(self):
        assert value(OA) >= 0.6718

    @pytest.mark.parametrize("k", [1, 5, 100])
    def test_variable_count(self, k):
        p = ObserveAcceptLpParams(0.7, 0.6, k=k)
        assert frlp.build(p).n_vars == 2 + (k + 1) * 2 + k

    def test_rho_to_one(self):
        p = ObserveAcceptLpParams(0.72941, 0.999999)
        assert value(p) == pytest.approx(frlp.single_threshold_value(0.72941), abs=1e-3)

    def test_geometric_rates(self):
        beta = OA.betas()
        assert beta[0] == OA.c
        assert beta[1:] / beta[:-1] == pytest.approx(np.full(100, 1.03))

    def test_matches_highs(self):
        assert value(OA) == pytest.approx(highs_value(frlp.build(OA)), abs=1e-8)

    def test_dual_certificate(self):
        model, sol = frlp.solve_params(OA)
        assert lp.dual_certificate(model, sol)


@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.001, 0.999))
def test_gamma_defined_inside_interval(a, b, t):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-3:
        return
    z = lo + t * (hi - lo)
    g = frlp.gamma(z, lo, hi)
    assert math.isfinite(g) and g > 0


def test_zeta_samples_interior():
    z = frlp.zeta_samples(1.0, 2.0, 4)
    assert list(z) == pytest.approx([1.2, 1.4, 1.6, 1.8])


class TestInducedPoint:
    N = 10**4

    def check(self, d, params, tol=lp.FEAS_TOL):
        model, sol = frlp.solve_params(params)
        x = frlp.induced_point(d, self.N, params)
        assert lp.check_feasible(model, x, tol) == []
        assert model.objective @ x >= sol.value - 1e-6
        return model, x

    def test_uniform(self):
        self.check(dist.uniform(), TWO)

    def test_two_level(self):
        model, x = self.check(dist.d3_two_level(self.N, 1.2), TWO)
        slack = {c.name: c.slack(x) for c in model.constraints}
        # The normalization row is the near-tight one on this instance.
        assert slack["opt"] == pytest.approx(0.0, abs=1e-6)
        top = 1.2 / -math.expm1(-1.2)
        assert slack["over0"] == pytest.approx(top - 1.0, abs=1e-3)

    def test_point_like(self):
        model, x = self.check(dist.d2_point_like(1e-6), TWO)
        point = dict(zip(model.names, x))
        assert point["theta1"] == pytest.approx(1.0, abs=1e-6)
        assert point["theta2"] == pytest.approx(1.0, abs=1e-6)
        for name in ("Delta1", "Delta2", "delta1"):
            assert abs(point[name]) <= 1e-6

    @pytest.mark.parametrize("n", [10**4, 10**6])
    def test_two_level_hit_cut_at_its_rate(self, n):
        # With c2 equal to the instance's rate the hit cut is tight as n grows;
        # at finite n it misses by theta1 * (e^-c - (1 - c/n)^n).
        c = 1.2
        params = TwoThresholdLpParams(1.0, c, 0.5, 20)
        model = frlp.build(params)
        x = frlp.induced_point(dist.d3_two_level(n, c, eps=1e-12), n, params)
        slack = {con.name: con.slack(x) for con in model.constraints}
        theta1 = x[model.index("theta1")]
        gap = theta1 * (math.exp(-c) - math.exp(n * math.log1p(-c / n)))
        assert slack["hit0"] == pytest.approx(-gap, rel=1e-3)
        assert abs(slack["hit0"]) <= 1.0 / n

    @pytest.mark.parametrize("name", sorted(dist.zoo(10)))
    def test_zoo_observe_accept(self, name):
        self.check(dist.zoo(self.N)[name], OA)

    @given(st.floats(0.2, 1.0), st.floats(1.2, 3.0), st.floats(0.2, 0.8),
           st.sampled_from(sorted(dist.zoo(10))))
    def test_random_two_threshold(self, c1, c2, rho, name):
        # Cuts are exact only as n grows; allow the O(1/n) finite-size gap.
        self.check(dist.zoo(self.N)[name], TwoThresholdLpParams(c1, c2, rho, 20), tol=10 / self.N)

    def test_rate_above_n(self):
        with pytest.raises(dist.DomainError):
            frlp.induced_point(dist.uniform(), 1, TWO)
