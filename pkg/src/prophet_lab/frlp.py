"""Factor-revealing LPs for the threshold and observe-and-accept gamblers.

All quantities are normalized so that OPT = 1.  A blind schedule with rates
``c_1 < ... < c_k`` contributes variables ``theta_l`` (thresholds),
``Delta_l`` (scaled overshoots) and ``delta_l`` (the mass of ``E[max]``
between consecutive thresholds).  The observe-and-accept LP discretizes the
unknown rate of the random second threshold on a geometric grid ``beta_i``.

The continuum of gamma cuts between two consecutive rates is sampled on an
interior grid.  Any finite sample is a relaxation, so optima stay valid lower
bounds.  Every gamma row is stored divided by ``gamma``: the factor grows like
``exp(zeta)`` and would otherwise wreck the conditioning at large rates.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from prophet_lab.dist import Distribution, DomainError
from prophet_lab.lp import LpModel, LpSolution, solve


class BuildError(DomainError):
    """Invalid LP parameters."""


@dataclass(frozen=True)
class TwoThresholdLpParams:
    c1: float
    c2: float
    rho: float
    zeta_grid: int = 200

    def __post_init__(self):
        if not 0 < self.c1 < self.c2:
            raise BuildError(f"need 0 < c1 < c2, got c1={self.c1}, c2={self.c2}")
        if not 0 < self.rho < 1:
            raise BuildError(f"rho must lie in (0, 1), got {self.rho}")
        if self.zeta_grid < 2:
            raise BuildError("zeta_grid must be at least 2")

    def as_k(self) -> KThresholdLpParams:
        return KThresholdLpParams((self.c1, self.c2), (self.rho, 1.0 - self.rho), self.zeta_grid)


@dataclass(frozen=True)
class KThresholdLpParams:
    c: tuple[float, ...]
    rho: tuple[float, ...]
    zeta_grid: int = 200

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))
        if not self.c or len(self.c) != len(self.rho):
            raise BuildError("c and rho must be non-empty and of equal length")
        if self.c[0] <= 0 or any(a >= b for a, b in zip(self.c, self.c[1:])):
            raise BuildError(f"rates must be positive and strictly increasing: {self.c}")
        if any(r <= 0 for r in self.rho) or abs(math.fsum(self.rho) - 1.0) > 1e-12:
            raise BuildError(f"phase fractions must be positive and sum to 1: {self.rho}")
        if self.zeta_grid < 1:
            raise BuildError("zeta_grid must be at least 1")

    @property
    def k(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class ObserveAcceptLpParams:
    c: float
    rho: float
    k: int = 100
    beta_ratio: float = 1.03
    zeta_grid: int = 3

    def __post_init__(self):
        if not self.c > 0:
            raise BuildError(f"c must be positive, got {self.c}")
        if not 0 < self.rho < 1:
            raise BuildError(f"rho must lie in (0, 1), got {self.rho}")
        if self.k < 1:
            raise BuildError("k must be at least 1")
        if not self.beta_ratio > 1:
            raise BuildError(f"beta_ratio must exceed 1, got {self.beta_ratio}")
        if self.zeta_grid < 1:
            raise BuildError("zeta_grid must be at least 1")

    def betas(self) -> np.ndarray:
        return self.c * self.beta_ratio ** np.arange(self.k + 1)


LpParams = TwoThresholdLpParams | KThresholdLpParams | ObserveAcceptLpParams


def zeta_samples(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` equally spaced points strictly inside ``(lo, hi)``."""
    j = np.arange(1, count + 1)
    return lo + j * (hi - lo) / (count + 1)


def gamma(zeta: float, lo: float, hi: float) -> float:
    return (zeta - lo) / (math.exp(-zeta) - math.exp(-hi))


def _chain_rows(model: LpModel, top: Sequence[str], over: Sequence[str], gaps: Sequence[str],
                rates: Sequence[float], zeta_grid: int) -> None:
    """Cuts linking consecutive thresholds ``top[i] >= top[i+1]``.

    For each gap ``i``: monotonicity, ``delta <= (1 - e^-r_{i+1}) (t_i - t_{i+1})``,
    ``delta <= D_{i+1} - D_i`` and the sampled gamma family.
    """
    for i, gap in enumerate(gaps):
        lo, hi = rates[i], rates[i + 1]
        t0, t1, d0, d1 = top[i], top[i + 1], over[i], over[i + 1]
        model.add({t0: 1.0, t1: -1.0}, ">=", 0.0, f"mono{i}")
        a = -math.expm1(-hi)
        model.add({t0: a, t1: -a, gap: -1.0}, ">=", 0.0, f"hit{i}")
        model.add({d1: 1.0, d0: -1.0, gap: -1.0}, ">=", 0.0, f"over{i}")
        for j, z in enumerate(zeta_samples(lo, hi, zeta_grid)):
            inv = 1.0 / gamma(z, lo, hi)
            co = lo * inv + math.expm1(-z)
            model.add({d1: inv, d0: -inv, t0: -co, t1: co, gap: -1.0}, ">=", 0.0,
                      f"gamma{i}_{j}")


def build_k_threshold(params: KThresholdLpParams) -> LpModel:
    k = params.k
    theta = [f"theta{l + 1}" for l in range(k)]
    big = [f"Delta{l + 1}" for l in range(k)]
    gaps = [f"delta{l + 1}" for l in range(k - 1)]
    names = theta + big + gaps
    model = LpModel(np.zeros(len(names)), names=names)
    log_reach = 0.0
    for l, (c, r) in enumerate(zip(params.c, params.rho)):
        w = math.exp(-log_reach) * -math.expm1(-r * c)
        model.objective[l] = w
        model.objective[k + l] = w / c
        log_reach += r * c
    opt = {theta[-1]: 1.0, big[0]: 1.0}
    opt.update({g: 1.0 for g in gaps})
    model.add(opt, ">=", 1.0, "opt")
    _chain_rows(model, theta, big, gaps, params.c, params.zeta_grid)
    return model


def build_two_threshold(params: TwoThresholdLpParams) -> LpModel:
    return build_k_threshold(params.as_k())


def build_observe_accept(params: ObserveAcceptLpParams) -> LpModel:
    k, rho = params.k, params.rho
    beta = params.betas()
    v = [f"v{i}" for i in range(k + 1)]
    big = [f"D{i}" for i in range(k + 1)]
    gaps = [f"d{i}" for i in range(k)]
    names = ["L1", "L2"] + v + big + gaps
    model = LpModel(np.zeros(len(names)), names=names)
    model.objective[:2] = 1.0
    a = -math.expm1(-beta[0] * rho)
    model.add({"L1": 1.0, v[0]: -a, big[0]: -a / beta[0]}, ">=", 0.0, "quantile_phase")
    row = {"L2": 1.0}
    for i in range(1, k + 1):
        p = (math.exp(-beta[i - 1] * rho) - math.exp(-beta[i] * rho)) * -math.expm1(-beta[i] * (1 - rho))
        row[v[i]] = -p * beta[i - 1] / beta[i]
        row[big[i - 1]] = -p / beta[i]
    model.add(row, ">=", 0.0, "observe_phase")
    opt = {v[-1]: 1.0, big[0]: 1.0}
    opt.update({g: 1.0 for g in gaps})
    model.add(opt, ">=", 1.0, "opt")
    _chain_rows(model, v, big, gaps, beta, params.zeta_grid)
    return model


def build(params: LpParams) -> LpModel:
    if isinstance(params, TwoThresholdLpParams):
        return build_two_threshold(params)
    if isinstance(params, KThresholdLpParams):
        return build_k_threshold(params)
    if isinstance(params, ObserveAcceptLpParams):
        return build_observe_accept(params)
    raise BuildError(f"unknown parameter type {type(params).__name__}")


def solve_params(params: LpParams) -> tuple[LpModel, LpSolution]:
    model = build(params)
    return model, solve(model)


def single_threshold_value(c: float) -> float:
    """Closed-form optimum of the one-threshold LP: ``(1 - e^-c) min(1, 1/c)``."""
    return -math.expm1(-c) * min(1.0, 1.0 / c)


def _chain_point(dist: Distribution, n: int, rates: Sequence[float], opt: float):
    if rates[-1] > n:
        raise DomainError(f"largest rate {rates[-1]} exceeds n={n}")
    theta = [dist.threshold(r, n) for r in rates]
    big = [dist.delta(r, n) for r in rates]
    gaps = [dist.max_tail_integral(theta[i + 1], theta[i], n) for i in range(len(rates) - 1)]
    return np.array(theta) / opt, np.array(big) / opt, np.array(gaps) / opt


def induced_point(dist: Distribution, n: int, params: LpParams) -> np.ndarray:
    """The LP point a concrete distribution induces, normalized by ``E[max]``.

    ``delta`` between thresholds ``a < b`` is ``int_a^b P(max >= t) dt``,
    computed in closed form for piecewise-uniform distributions.
    """
    opt = dist.expected_max(n)
    if isinstance(params, TwoThresholdLpParams):
        params = params.as_k()
    if isinstance(params, KThresholdLpParams):
        theta, big, gaps = _chain_point(dist, n, params.c, opt)
        return np.concatenate([theta, big, gaps])
    if isinstance(params, ObserveAcceptLpParams):
        beta = params.betas()
        v, big, gaps = _chain_point(dist, n, beta, opt)
        x = np.concatenate([[0.0, 0.0], v, big, gaps])
        model = build_observe_accept(params)
        # Lambda rows read "L - (linear part) >= 0"; set each L to its lower bound.
        for con in model.constraints[:2]:
            x[:2] += -(con.coeffs @ x) * np.abs(con.coeffs[:2])
        return x
    raise BuildError(f"unknown parameter type {type(params).__name__}")
