import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from prophet_lab import bounds, frlp
from prophet_lab.dist import DomainError

EULER_GAMMA = 0.5772156649015329


def e1_series(x, terms=30):
    """E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)."""
    total = math.fsum((-x) ** k / (k * math.factorial(k)) for k in range(1, terms + 1))
    return -EULER_GAMMA - math.log(x) - total


class TestExpIntegral:
    def test_series_oracle(self):
        expected = e1_series(0.5) - e1_series(1.0)
        assert expected == pytest.approx(0.340390, abs=1e-6)
        assert bounds.exp_integral(1.0, 0.5) == pytest.approx(expected, abs=1e-12)

    def test_empty_interval(self):
        assert bounds.exp_integral(0.7, 1.0) == 0.0

    @given(st.floats(0.01, 20.0), st.floats(1e-6, 1.0))
    def test_scipy_exp1(self, c, rho):
        expected = special.exp1(c * rho) - special.exp1(c)
        assert bounds.exp_integral(c, rho) == pytest.approx(expected, rel=1e-9, abs=1e-12)

    @given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(0.01, 0.99))
    def test_decreasing_in_c(self, a, b, rho):
        lo, hi = sorted((a, b))
        assert bounds.exp_integral(hi, rho) <= bounds.exp_integral(lo, rho) + 1e-15

    @pytest.mark.parametrize("c,rho", [(0.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
    def test_domain(self, c, rho):
        with pytest.raises(DomainError):
            bounds.exp_integral(c, rho)


class TestObserveAcceptBound:
    def test_stated_point_first_branch(self):
        # Only the first branch reproduces the quoted 0.69204 at the quoted point.
        c, rho = 0.37476, 0.44799
        assert 1 - rho * math.exp(-c) == pytest.approx(0.69204, abs=1e-4)

    @pytest.mark.xfail(strict=True, reason="min of both branches is 0.69092 here, not 0.69204")
    def test_stated_point(self):
        assert bounds.ub_observe_accept(0.37476, 0.44799) == pytest.approx(0.69204, abs=1e-4)

    def test_stated_point_oracle(self):
        c, rho = 0.37476, 0.44799
        second = -math.expm1(-c * rho) / c + rho * (special.exp1(c * rho) - special.exp1(c))
        expected = min(1 - rho * math.exp(-c), second)
        assert bounds.ub_observe_accept(c, rho) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.690919, abs=1e-6)

    @given(st.floats(1.0001, 20.0), st.floats(0.001, 0.999))
    def test_large_rate_below_one_minus_inv_e(self, c, rho):
        assert bounds.ub_observe_accept(c, rho) < 1 - 1 / math.e

    def test_small_rho(self):
        assert bounds.ub_observe_accept(0.5, 1e-4) <= 2e-3

    @pytest.mark.parametrize("c,rho", [(0.5, 0.0), (0.5, 1.0), (0.0, 0.5)])
    def test_domain(self, c, rho):
        with pytest.raises(DomainError):
            bounds.ub_observe_accept(c, rho)


class TestTwoThresholdBound:
    def test_stated_point(self):
        assert bounds.ub_two_threshold(0.51904, 2.32059, 0.60473) == pytest.approx(0.70804, abs=1e-4)

    @given(st.floats(2.01, 30.0), st.floats(0.01, 0.99))
    def test_c1_two(self, c2, rho):
        assert bounds.ub_two_threshold_parts(2.0, c2, rho)["ub1"] <= 0.5
        assert bounds.ub_two_threshold(2.0, c2, rho) <= 0.5

    @pytest.mark.xfail(strict=True, reason="UB1 near c1 = rho = 0.94 exceeds 1 - 1/e at c2 = 30")
    def test_c2_thirty_below_one_minus_inv_e(self):
        # UB1 = (1 - e^-0.8789) / 0.9375 + e^-0.8789 (1 - e^-1.875) / 30 = 0.63547
        assert bounds.ub_two_threshold_parts(0.9375, 30.0, 0.9375)["ub1"] == pytest.approx(0.6354660, abs=1e-6)
        assert bounds.ub_two_threshold(0.9375, 30.0, 0.9375) <= 1 - 1 / math.e

    @given(st.floats(0.01, 2.0), st.floats(30.0, 3000.0), st.floats(0.01, 0.99))
    def test_large_c2_below_global_bound(self, c1, c2, rho):
        # What the domain cut actually needs: large c2 never beats the global maximum.
        assert bounds.ub_two_threshold(c1, c2, rho) <= 0.7081

    @given(st.floats(0.05, 1.5), st.floats(1.6, 5.0), st.floats(0.05, 0.95))
    def test_third_part_is_grid_minimum(self, c1, c2, rho):
        # Brute force over the same interior grid as the unimodal search.
        grid = 500
        a = -math.expm1(-rho * c1)
        b = math.exp(-rho * c1) * -math.expm1(-(1 - rho) * c2) / c2
        cs = c1 + np.arange(1, grid + 1) * ((c2 - c1) / (grid + 1))
        brute = float(np.min((a + b * cs) / -np.expm1(-cs)))
        assert bounds.ub_two_threshold_parts(c1, c2, rho, grid)["ub3"] == pytest.approx(brute, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            bounds.ub_two_threshold(1.0, 0.5, 0.5)


class TestGridMaximize:
    def test_constant_surface(self):
        res = bounds.grid_maximize(bounds.constant_surface(0.5), coarse_res=7, refine_rounds=2)
        assert res.value == 0.5

    def test_quadratic_peak(self):
        surface = bounds.BoundSurface("quad", ((0.0, 1.0), (0.0, 2.0)), ("x", "y"),
                                      lambda x, y: -(x - 0.3) ** 2 - (y - 1.234) ** 2)
        res = bounds.grid_maximize(surface, coarse_res=50, refine_rounds=3)
        assert res.argmax == pytest.approx((0.3, 1.234), abs=1e-4)

    def test_grid_kernel_matches_pointwise(self):
        surface = bounds.observe_accept_surface()
        axes = [bounds.interior_axis(0, 1, 9), bounds.interior_axis(0, 1, 11)]
        grid = surface.evaluate_grid(axes)
        for i, c in enumerate(axes[0]):
            for j, rho in enumerate(axes[1]):
                assert grid[i, j] == pytest.approx(bounds.ub_observe_accept(c, rho), abs=1e-14)

    def test_two_threshold_grid_kernel(self):
        surface = bounds.two_threshold_surface(c_grid=200)
        axes = [bounds.interior_axis(0, 2, 4), bounds.interior_axis(0, 30, 5),
                bounds.interior_axis(0, 1, 3)]
        grid = surface.evaluate_grid(axes)
        for idx in np.ndindex(grid.shape):
            point = [ax[i] for ax, i in zip(axes, idx)]
            assert grid[idx] == pytest.approx(surface(*point), abs=1e-14)

    def test_observe_accept_deterministic(self):
        a = bounds.grid_maximize(bounds.observe_accept_surface(), 200, 3)
        b = bounds.grid_maximize(bounds.observe_accept_surface(), 200, 3)
        assert a == b

    def test_observe_accept_maximum(self):
        res = bounds.grid_maximize(bounds.observe_accept_surface(), 200, 3)
        # Dense brute force near the reported argmax never beats it by more than grid error.
        cs = np.linspace(res.argmax[0] - 5e-3, res.argmax[0] + 5e-3, 101)
        rhos = np.linspace(res.argmax[1] - 5e-3, res.argmax[1] + 5e-3, 101)
        dense = bounds.observe_accept_surface().evaluate_grid([cs, rhos]).max()
        assert dense <= res.value + 1e-8
        assert res.value < 0.6921

    def test_sandwich(self):
        # Lower bounds from the LPs never exceed the matching upper bounds.
        _, two = frlp.solve_params(frlp.TwoThresholdLpParams(0.7067, 1.8353, 0.6204))
        _, oa = frlp.solve_params(frlp.ObserveAcceptLpParams(0.72941, 0.64863))
        oa_ub = bounds.grid_maximize(bounds.observe_accept_surface(), 200, 3).value
        assert two.value <= bounds.ub_two_threshold(0.51904, 2.32059, 0.60473)
        assert oa.value <= oa_ub

    def test_bad_resolution(self):
        with pytest.raises(DomainError):
            bounds.grid_maximize(bounds.constant_surface(1.0), coarse_res=0)

    def test_json(self):
        res = bounds.grid_maximize(bounds.observe_accept_surface(), 20, 1)
        out = res.to_json()
        assert set(out["argmax"]) == {"c", "rho"} and out["resolution"] == 20
