"""Monte Carlo evaluation of gambler policies.

Each trial owns a counter-based substream: the ``i``-th draw of trial ``t``
is ``quantile(u)`` with ``u`` a hash of ``(seed, t, i)``.  Results are
therefore independent of chunking and thread count.  Draws past the
stopping index are generated only when the prophet's maximum is needed;
they never influence the gambler.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numba
import numpy as np

from prophet_lab.dist import Distribution, DomainError
from prophet_lab.policy import (
    KThreshold,
    ObserveAndAccept,
    PolicySpec,
    SecretaryZeroQuery,
    SingleThreshold,
    observe_cutoff,
    secretary_cutoff,
    threshold_schedule,
)

MAX_TRIALS = 2**32
CHUNK = 1 << 15

_BLIND, _OBSERVE, _SECRETARY = 0, 1, 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _uniform(key, i):
    return float(_mix(key + np.uint64(i) * _GOLDEN) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _quantile(u, w, lo, hi, above):
    p = 1.0 - u
    j = 0
    while j < w.shape[0] - 1 and above[j] > p:
        j += 1
    frac = (p - above[j]) / w[j]
    if frac < 0.0:
        frac = 0.0
    elif frac > 1.0:
        frac = 1.0
    return hi[j] - frac * (hi[j] - lo[j])


@numba.njit(cache=True)
def _trial_key(seed_key, t):
    return _mix(seed_key ^ _mix(np.uint64(t)))


@numba.njit(cache=True, nogil=True)
def _simulate(mode, thresholds, theta1, cutoff, n, w, lo, hi, above, seed_key,
              t0, t1, need_max, payoff, prophet, got_max):
    for t in range(t0, t1):
        key = _trial_key(seed_key, t)
        tau = n
        value = 0.0
        best = -np.inf
        i = 0
        if mode == 0:
            while i < n:
                x = _quantile(_uniform(key, i), w, lo, hi, above)
                if x > best:
                    best = x
                i += 1
                if x >= thresholds[i - 1]:
                    tau = i - 1
                    value = x
                    break
        elif mode == 1:
            first_max = -np.inf
            while i < n:
                x = _quantile(_uniform(key, i), w, lo, hi, above)
                if x > best:
                    best = x
                i += 1
                if i <= cutoff:
                    if x >= theta1:
                        tau = i - 1
                        value = x
                        break
                    if x > first_max:
                        first_max = x
                elif x >= first_max:
                    tau = i - 1
                    value = x
                    break
        else:
            first_max = -np.inf
            while i < n:
                x = _quantile(_uniform(key, i), w, lo, hi, above)
                if x > best:
                    best = x
                i += 1
                if i <= cutoff:
                    if x > first_max:
                        first_max = x
                elif x > first_max:
                    tau = i - 1
                    value = x
                    break
        if need_max:
            while i < n:
                x = _quantile(_uniform(key, i), w, lo, hi, above)
                if x > best:
                    best = x
                i += 1
        k = t - t0
        payoff[k] = value
        prophet[k] = best
        got_max[k] = tau < n and value >= best


def realizations(dist: Distribution, n: int, seed: int, trial: int) -> np.ndarray:
    """The exact draws trial ``trial`` sees; used to cross-check the kernel."""
    w, lo, hi, above = dist.arrays()
    key = np.uint64(_trial_key(_seed_key(seed), np.uint64(trial)))
    return np.array([_quantile(_uniform(key, i), w, lo, hi, above) for i in range(n)])


def _seed_key(seed: int) -> np.uint64:
    # Compiled functions hand back plain ints; keep the key unsigned.
    return np.uint64(_mix(np.uint64(seed % 2**64)))


@dataclass
class Moments:
    """Streaming moments of paired samples ``(a, b)``; merges are associative."""

    count: int = 0
    mean_a: float = 0.0
    mean_b: float = 0.0
    m2_a: float = 0.0
    m2_b: float = 0.0
    c_ab: float = 0.0

    @classmethod
    def of(cls, a: np.ndarray, b: np.ndarray) -> Moments:
        ma, mb = float(a.mean()), float(b.mean())
        da, db = a - ma, b - mb
        return cls(a.size, ma, mb, float(da @ da), float(db @ db), float(da @ db))

    def merge(self, other: Moments) -> Moments:
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        da = other.mean_a - self.mean_a
        db = other.mean_b - self.mean_b
        f = self.count * other.count / n
        return Moments(
            n,
            self.mean_a + da * other.count / n,
            self.mean_b + db * other.count / n,
            self.m2_a + other.m2_a + da * da * f,
            self.m2_b + other.m2_b + db * db * f,
            self.c_ab + other.c_ab + da * db * f,
        )

    def var_a(self) -> float:
        return self.m2_a / (self.count - 1) if self.count > 1 else 0.0

    def var_b(self) -> float:
        return self.m2_b / (self.count - 1) if self.count > 1 else 0.0

    def cov(self) -> float:
        return self.c_ab / (self.count - 1) if self.count > 1 else 0.0


@dataclass
class RunReport:
    policy: dict
    dist: str
    n: int
    trials: int
    seed: int
    alg_mean: float
    alg_stderr: float
    opt: float
    ratio: float
    opt_stderr: float | None = None
    ratio_stderr: float | None = None
    p_select_max: float | None = None
    opt_kind: str = "analytic"

    def to_json(self) -> dict:
        return asdict(self)

    CSV_FIELDS = ("policy", "dist", "n", "trials", "seed", "alg_mean", "alg_stderr",
                  "opt", "opt_stderr", "ratio", "ratio_stderr", "p_select_max", "opt_kind")

    def csv_row(self) -> list:
        row = self.to_json()
        row["policy"] = row["policy"]["variant"]
        return [row[k] for k in self.CSV_FIELDS]


def _kernel_args(spec: PolicySpec, dist: Distribution, n: int):
    if isinstance(spec, (SingleThreshold, KThreshold)):
        return _BLIND, threshold_schedule(spec, dist, n), 0.0, 0
    if isinstance(spec, ObserveAndAccept):
        return _OBSERVE, np.zeros(1), dist.threshold(spec.c, n), observe_cutoff(spec, n)
    if isinstance(spec, SecretaryZeroQuery):
        return _SECRETARY, np.zeros(1), 0.0, secretary_cutoff(n)
    raise DomainError(f"unsupported policy {spec!r}")


def default_threads() -> int:
    env = os.environ.get("PROPHET_LAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def simulate(spec: PolicySpec, dist: Distribution, n: int, trials: int, seed: int,
             need_max: bool, threads: int | None = None) -> tuple[Moments, Moments]:
    """Run ``trials`` trials; return moments of (payoff, max) and (hit-max, 0)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    if not 1 <= trials <= MAX_TRIALS:
        raise DomainError(f"trials must be in [1, 2^32], got {trials}")
    mode, thresholds, theta1, cutoff = _kernel_args(spec, dist, n)
    w, lo, hi, above = dist.arrays()
    key = _seed_key(seed)
    bounds = [(t, min(t + CHUNK, trials)) for t in range(0, trials, CHUNK)]

    def work(span):
        t0, t1 = span
        size = t1 - t0
        payoff, prophet = np.empty(size), np.empty(size)
        got = np.empty(size, dtype=np.bool_)
        _simulate(mode, thresholds, theta1, cutoff, n, w, lo, hi, above, key,
                  t0, t1, need_max, payoff, prophet, got)
        return Moments.of(payoff, prophet), Moments.of(got.astype(float), np.zeros(size))

    threads = threads or default_threads()
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(span) for span in bounds]
    total, hits = Moments(), Moments()
    for pay, hit in parts:
        total = total.merge(pay)
        hits = hits.merge(hit)
    return total, hits


def estimate(spec: PolicySpec, dist: Distribution, n: int = 1000, trials: int = 10**6,
             seed: int = 0, threads: int | None = None) -> RunReport:
    """Estimate ALG by simulation; OPT is the exact expected maximum."""
    need_max = isinstance(spec, SecretaryZeroQuery)
    mom, hits = simulate(spec, dist, n, trials, seed, need_max, threads)
    opt = dist.expected_max(n)
    stderr = math.sqrt(mom.var_a() / trials)
    return RunReport(
        policy=spec.to_json(), dist=dist.name, n=n, trials=trials, seed=seed,
        alg_mean=mom.mean_a, alg_stderr=stderr, opt=opt, ratio=mom.mean_a / opt,
        ratio_stderr=stderr / opt,
        p_select_max=hits.mean_a if need_max else None,
    )


def estimate_ratio_to_empirical_max(spec: PolicySpec, dist: Distribution, n: int = 1000,
                                    trials: int = 10**6, seed: int = 0,
                                    threads: int | None = None) -> RunReport:
    """Paired estimator: gambler and prophet see the same sequences.

    The ratio's standard error uses the delta method on the per-trial
    residual ``a - r*b``, which is where pairing removes variance.
    """
    mom, hits = simulate(spec, dist, n, trials, seed, True, threads)
    opt = mom.mean_b
    ratio = mom.mean_a / opt
    resid_var = mom.var_a() - 2 * ratio * mom.cov() + ratio * ratio * mom.var_b()
    return RunReport(
        policy=spec.to_json(), dist=dist.name, n=n, trials=trials, seed=seed,
        alg_mean=mom.mean_a, alg_stderr=math.sqrt(mom.var_a() / trials), opt=opt,
        ratio=ratio, opt_stderr=math.sqrt(mom.var_b() / trials),
        ratio_stderr=math.sqrt(max(resid_var, 0.0) / trials) / opt,
        p_select_max=hits.mean_a, opt_kind="empirical",
    )
