"""Gambler policies as deterministic online decision rules.

Four variants are supported: the zero-query secretary rule, a single
quantile threshold, a blind k-threshold schedule and observe-and-accept.
Thresholds are obtained from the quantile oracle as ``v(1 - c/n)``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from prophet_lab.dist import Distribution, DomainError

RHO_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SecretaryZeroQuery:
    """Observe the first ``floor(n/e)`` values, then take the first strict record."""

    variant = "secretary"

    def to_json(self) -> dict:
        return {"variant": self.variant}


@dataclass(frozen=True)
class SingleThreshold:
    c: float
    variant = "single"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"rate c must be positive, got {self.c}")

    def to_json(self) -> dict:
        return {"variant": self.variant, "c": self.c}


@dataclass(frozen=True)
class KThreshold:
    """Phase ``l`` uses threshold ``v(1 - c[l]/n)`` on a ``rho[l]`` share of the horizon.

    ``strict=False`` skips the increasing-rates check; useful for degenerate
    comparisons (equal thresholds) in tests.
    """

    c: tuple[float, ...]
    rho: tuple[float, ...]
    strict: bool = field(default=True, compare=False)
    variant = "k_threshold"

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))
        if len(self.c) != len(self.rho) or not self.c:
            raise DomainError("c and rho must be non-empty and of equal length")
        if any(v <= 0 for v in self.c):
            raise DomainError("all rates must be positive")
        if any(r <= 0 or r > 1 for r in self.rho):
            raise DomainError("phase fractions must lie in (0, 1]")
        if abs(math.fsum(self.rho) - 1.0) > RHO_SUM_TOL:
            raise DomainError(f"phase fractions sum to {math.fsum(self.rho)!r}, not 1")
        if self.strict and any(a >= b for a, b in zip(self.c, self.c[1:])):
            raise DomainError("rates must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.c)

    def to_json(self) -> dict:
        return {"variant": self.variant, "c": list(self.c), "rho": list(self.rho)}


@dataclass(frozen=True)
class ObserveAndAccept:
    """Quantile threshold for ``floor(rho*n)`` steps, then the first-phase max."""

    c: float
    rho: float
    variant = "observe_accept"

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"rate c must be positive, got {self.c}")
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")

    def to_json(self) -> dict:
        return {"variant": self.variant, "c": self.c, "rho": self.rho}


PolicySpec = SecretaryZeroQuery | SingleThreshold | KThreshold | ObserveAndAccept


def spec_from_json(obj: dict) -> PolicySpec:
    obj = dict(obj)
    variant = obj.pop("variant", None)
    try:
        if variant == "secretary":
            return SecretaryZeroQuery(**obj)
        if variant == "single":
            return SingleThreshold(**obj)
        if variant == "k_threshold":
            return KThreshold(tuple(obj.pop("c")), tuple(obj.pop("rho")), **obj)
        if variant == "observe_accept":
            return ObserveAndAccept(**obj)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {variant}: {exc}") from None
    raise DomainError(f"unknown policy variant {variant!r}")


@dataclass(frozen=True)
class Outcome:
    tau: int
    value: float


def phase_counts(rho: Sequence[float], n: int) -> list[int]:
    """Phase sizes ``floor(rho_l * n)``; the last phase absorbs the remainder."""
    counts = [math.floor(r * n) for r in rho[:-1]]
    counts.append(n - sum(counts))
    return counts


def secretary_cutoff(n: int) -> int:
    return math.floor(n / math.e)


def observe_cutoff(spec: ObserveAndAccept, n: int) -> int:
    m = math.floor(spec.rho * n)
    if m < 1:
        raise DomainError(f"observe-and-accept with rho={spec.rho}, n={n} has an empty first phase")
    return m


def threshold_schedule(spec: PolicySpec, dist: Distribution, n: int) -> np.ndarray:
    """Per-index thresholds for blind policies (single and k-threshold)."""
    if isinstance(spec, SingleThreshold):
        return np.full(n, dist.threshold(spec.c, n))
    if isinstance(spec, KThreshold):
        counts = phase_counts(spec.rho, n)
        if any(m < 1 for m in counts):
            raise DomainError(f"k-threshold phases {counts} include an empty phase at n={n}")
        return np.repeat([dist.threshold(c, n) for c in spec.c], counts)
    raise DomainError(f"{type(spec).__name__} has no fixed threshold schedule")


def run(spec: PolicySpec, dist: Distribution, realizations: Sequence[float]) -> Outcome:
    """Play ``spec`` online on ``realizations``; never reads past the stopping index."""
    n = len(realizations)
    if n == 0:
        raise DomainError("empty realization sequence")
    if isinstance(spec, SecretaryZeroQuery):
        return _run_secretary(realizations, n)
    if isinstance(spec, ObserveAndAccept):
        return _run_observe_accept(realizations, n, dist.threshold(spec.c, n),
                                   observe_cutoff(spec, n))
    return run_thresholds(threshold_schedule(spec, dist, n), realizations)


def run_thresholds(thresholds: Sequence[float], realizations: Sequence[float]) -> Outcome:
    """Accept the first index ``i`` with ``x_i >= thresholds[i]``."""
    n = len(realizations)
    for i in range(n):
        x = realizations[i]
        if x >= thresholds[i]:
            return Outcome(i + 1, x)
    return Outcome(n + 1, 0.0)


def _run_observe_accept(xs, n: int, theta1: float, m: int) -> Outcome:
    best = -math.inf
    for i in range(m):
        x = xs[i]
        if x >= theta1:
            return Outcome(i + 1, x)
        best = max(best, x)
    for i in range(m, n):
        x = xs[i]
        if x >= best:
            return Outcome(i + 1, x)
    return Outcome(n + 1, 0.0)


def _run_secretary(xs, n: int) -> Outcome:
    m = secretary_cutoff(n)
    best = -math.inf
    for i in range(m):
        best = max(best, xs[i])
    for i in range(m, n):
        x = xs[i]
        if x > best:
            return Outcome(i + 1, x)
    return Outcome(n + 1, 0.0)


# ------------------------------------------------------------------ closed forms

def closed_form_single(dist: Distribution, n: int, c: float) -> float:
    """Exact finite-n expected payoff of the single-threshold rule at ``v(1 - c/n)``."""
    if not 0 < c <= n:
        raise DomainError(f"rate c={c} outside (0, n]")
    return closed_form_k_threshold(dist, n, KThreshold((c,), (1.0,)))


def closed_form_k_threshold(dist: Distribution, n: int, spec: KThreshold) -> float:
    """Exact finite-n expected payoff of a blind k-threshold schedule.

    Phase ``l`` with ``m_l`` steps and acceptance probability ``p_l = c_l/n``
    contributes ``P(reach l) * (1 - (1-p_l)^m_l) * (theta_l + Delta(c_l)/c_l)``.
    """
    counts = phase_counts(spec.rho, n)
    if any(m < 1 for m in counts):
        raise DomainError(f"phase with zero variables (counts {counts}) at n={n}")
    total = 0.0
    log_reach = 0.0
    for c, m in zip(spec.c, counts):
        if c > n:
            raise DomainError(f"rate c={c} exceeds n={n}")
        p = c / n
        theta = dist.threshold(c, n)
        gain = theta + dist.delta(c, n) / c
        log_stay = m * math.log1p(-p) if p < 1 else -math.inf
        total += math.exp(log_reach) * -math.expm1(log_stay) * gain
        log_reach += log_stay
    return total


def capability(spec: PolicySpec) -> dict:
    """Which evaluation routes exist for a policy.

    Observe-and-accept and the secretary rule use a random second threshold,
    so their payoff is only estimated by simulation (and bounded by the
    factor-revealing LP for observe-and-accept).
    """
    analytic = isinstance(spec, (SingleThreshold, KThreshold))
    return {"analytic": analytic, "simulation": True}
