"""Parameter search over the factor-revealing LPs and the rate sweep."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from prophet_lab.dist import DomainError
from prophet_lab.frlp import (
    KThresholdLpParams,
    LpParams,
    ObserveAcceptLpParams,
    TwoThresholdLpParams,
    build,
    single_threshold_value,
)
from prophet_lab.lp import solve

KINDS = ("two", "k", "oa")


def lp_value(params: LpParams) -> float | None:
    """Optimum of the LP for ``params``, or ``None`` if it is not solved to optimality."""
    sol = solve(build(params))
    return sol.value if sol.optimal else None


def _encode(kind: str, params: LpParams) -> list[float]:
    if kind == "two":
        return [params.c1, params.c2, params.rho]
    if kind == "k":
        return list(params.c) + list(params.rho[:-1])
    return [params.c, params.rho]


def _decode(kind: str, x: list[float], template: LpParams) -> LpParams:
    """Rebuild parameters from a coordinate vector; raises on invalid points."""
    if kind == "two":
        return TwoThresholdLpParams(x[0], x[1], x[2], template.zeta_grid)
    if kind == "k":
        k = template.k
        rho = x[k:]
        return KThresholdLpParams(tuple(x[:k]), tuple(rho) + (1.0 - sum(rho),), template.zeta_grid)
    return ObserveAcceptLpParams(x[0], x[1], template.k, template.beta_ratio, template.zeta_grid)


def default_seed(kind: str, k: int = 2) -> LpParams:
    if kind == "two":
        return TwoThresholdLpParams(0.7, 1.8, 0.62)
    if kind == "oa":
        return ObserveAcceptLpParams(0.73, 0.65)
    if kind == "k":
        if k == 1:
            return KThresholdLpParams((0.5,), (1.0,))
        c = tuple(0.7 * (1.0 + 0.6 * l) for l in range(k))
        rho = tuple([0.6] + [0.4 / (k - 1)] * (k - 1))
        return KThresholdLpParams(c, rho)
    raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")


@dataclass
class SearchResult:
    params: LpParams
    value: float
    seed_value: float
    evaluations: int

    def to_json(self) -> dict:
        return {"params": asdict(self.params), "value": self.value,
                "seed_value": self.seed_value, "evaluations": self.evaluations}


def optimize_params(kind: str, seed: LpParams | None = None, k: int = 2, step: float = 0.1,
                    halvings: int = 8, max_passes: int = 200) -> SearchResult:
    """Coordinate search (Hooke-Jeeves) on the LP optimum.

    An exploratory sweep nudges each coordinate by ``+-step`` and keeps strict
    improvements; a successful sweep is followed by a pattern move along the
    displacement it produced.  The step is halved once a sweep finds nothing.
    Points that fail validation or do not solve are skipped.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")
    seed = seed or default_seed(kind, k)
    seed_value = lp_value(seed)
    if seed_value is None:
        raise DomainError(f"seed parameters {seed} do not yield an optimal LP")
    evaluations = 1

    def evaluate(x):
        nonlocal evaluations
        try:
            params = _decode(kind, x, seed)
        except DomainError:
            return None, None
        evaluations += 1
        return lp_value(params), params

    def explore(x, value, params, h):
        for i in range(len(x)):
            for sign in (1.0, -1.0):
                cand = list(x)
                cand[i] = round(cand[i] + sign * h, 12)
                v, p = evaluate(cand)
                if v is not None and v > value + 1e-12:
                    x, value, params = cand, v, p
                    break
        return x, value, params

    base, best_value, best_params = _encode(kind, seed), seed_value, seed
    for _ in range(halvings + 1):
        for _ in range(max_passes):
            x, value, params = explore(base, best_value, best_params, step)
            if value <= best_value:
                break
            # Pattern move: keep going in the direction that just paid off.
            while True:
                prev = base
                base, best_value, best_params = x, value, params
                jump = [round(2 * a - b, 12) for a, b in zip(base, prev)]
                v, p = evaluate(jump)
                if v is None:
                    break
                x, value, params = explore(jump, v, p, step)
                if value <= best_value:
                    break
        step /= 2
    return SearchResult(best_params, best_value, seed_value, evaluations)


@dataclass
class SweepRow:
    c: float
    best_rho: float
    ratio: float
    k: int
    beta_ratio: float


SWEEP_FIELDS = ("c", "best_rho", "ratio", "k", "beta_ratio")


def rho_values(count: int = 101) -> np.ndarray:
    """``count`` points on ``[0.01, 1]``; the last one is exactly 1."""
    return np.linspace(0.01, 1.0, count)


def best_rho(c: float, k: int = 100, beta_ratio: float = 1.03, rho_grid: int = 101,
             zeta_grid: int = 3) -> SweepRow:
    """Maximize the observe-and-accept LP over the rho grid at fixed ``c``.

    ``rho = 1`` means no observation phase; its value is the one-threshold
    LP optimum.  Ties keep the smallest rho.
    """
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    top_rho, top = None, -np.inf
    for rho in rho_values(rho_grid):
        rho = float(rho)
        if rho >= 1.0:
            value = single_threshold_value(c)
        else:
            value = lp_value(ObserveAcceptLpParams(c, rho, k, beta_ratio, zeta_grid))
            if value is None:
                continue
        if value > top:
            top_rho, top = rho, value
    return SweepRow(float(c), top_rho, float(top), k, beta_ratio)


def sweep_c(c_values, k: int = 100, beta_ratio: float = 1.03, rho_grid: int = 101,
            zeta_grid: int = 3, threads: int = 1) -> list[SweepRow]:
    """One row per rate, in input order whatever the thread count."""
    def row(c):
        return best_rho(float(c), k, beta_ratio, rho_grid, zeta_grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(row, c_values))
    return [row(c) for c in c_values]


def rows_to_csv(rows: list[SweepRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for r in rows:
        writer.writerow([f"{r.c:.10g}", f"{r.best_rho:.10g}", f"{r.ratio:.10g}", r.k,
                         f"{r.beta_ratio:.10g}"])
    return out.getvalue()
