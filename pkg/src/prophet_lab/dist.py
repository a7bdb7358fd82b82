"""Value distributions with exact quantile-oracle semantics.

Every distribution is a finite mixture of uniforms on disjoint intervals.
That family is closed under all hard-instance constructions used by the
bounds module and admits closed forms for the CDF, the quantile oracle,
the expected overshoot ``delta`` and the expected maximum of ``n`` draws.

All tail quantities are computed from the survival side (upper cumulative
weights), so masses as small as ``1/(n*M)`` keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

WEIGHT_TOL = 1e-12


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class Component:
    w: float
    lo: float
    hi: float


class Distribution:
    """Mixture of uniforms on disjoint intervals ``[lo, hi]`` with weights ``w``.

    Parameters
    ----------
    components : iterable of ``(w, lo, hi)`` triples or :class:`Component`
    name : optional label used in reports
    """

    def __init__(self, components, name: str | None = None):
        comps = [c if isinstance(c, Component) else Component(*map(float, c)) for c in components]
        if not comps:
            raise DomainError("a distribution needs at least one component")
        comps.sort(key=lambda c: c.lo)
        for c in comps:
            if not (c.w > 0 and math.isfinite(c.w)):
                raise DomainError(f"component weight must be positive, got {c.w}")
            if not (c.hi > c.lo and math.isfinite(c.lo) and math.isfinite(c.hi)):
                raise DomainError(f"component interval must have positive width: [{c.lo}, {c.hi}]")
            if c.lo < 0:
                raise DomainError("values must be non-negative")
        for a, b in zip(comps, comps[1:]):
            if b.lo < a.hi:
                raise DomainError(f"intervals [{a.lo}, {a.hi}] and [{b.lo}, {b.hi}] overlap")
        total = math.fsum(c.w for c in comps)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        self.components = tuple(comps)
        self.name = name or "mixture"
        self._w = np.array([c.w for c in comps])
        self._lo = np.array([c.lo for c in comps])
        self._hi = np.array([c.hi for c in comps])
        # _above[j] = mass strictly above component j (tail sums built from the top).
        rev = np.cumsum(self._w[::-1])[::-1]
        self._above = np.append(rev[1:], 0.0)

    # ------------------------------------------------------------------ basics
    def __repr__(self) -> str:
        parts = ", ".join(f"({c.w:.6g}, {c.lo:.6g}, {c.hi:.6g})" for c in self.components)
        return f"Distribution({self.name}: {parts})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    @property
    def support(self) -> tuple[float, float]:
        return float(self._lo[0]), float(self._hi[-1])

    def survival(self, theta):
        """``G(theta) = Pr[x >= theta]``."""
        t = np.asarray(theta, dtype=float)
        frac = np.clip((self._hi - t[..., None]) / (self._hi - self._lo), 0.0, 1.0)
        out = (self._w * frac).sum(axis=-1)
        return float(out) if out.ndim == 0 else out

    def cdf(self, theta):
        """``F(theta) = Pr[x < theta]``."""
        g = self.survival(theta)
        return 1.0 - g

    def mean(self) -> float:
        return float(np.sum(self._w * (self._lo + self._hi) / 2))

    # --------------------------------------------------------------- quantiles
    def value_at_tail(self, p):
        """Smallest ``theta`` with ``G(theta) <= p``; equals ``quantile(1 - p)``.

        Working with the tail mass ``p`` directly avoids the cancellation in
        ``1 - (1 - p)`` when ``p`` is tiny.
        """
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
            raise DomainError(f"tail probability outside [0, 1]: {p}")
        # Component j holds the answer when above[j] <= p < above[j] + w[j].
        # above is non-increasing; search on the reversed (ascending) array.
        above_rev = self._above[::-1]
        k = np.searchsorted(above_rev, p_arr, side="right") - 1
        j = len(self._w) - 1 - k
        j = np.clip(j, 0, len(self._w) - 1)
        frac = (p_arr - self._above[j]) / self._w[j]
        frac = np.clip(frac, 0.0, 1.0)
        out = self._hi[j] - frac * (self._hi[j] - self._lo[j])
        return float(out) if out.ndim == 0 else out

    def quantile(self, q):
        """Quantile oracle ``v(q) = inf{theta : F(theta) >= q}``."""
        q_arr = np.asarray(q, dtype=float)
        if np.any((q_arr < 0) | (q_arr > 1)) or np.any(np.isnan(q_arr)):
            raise DomainError(f"quantile query outside [0, 1]: {q}")
        return self.value_at_tail(1.0 - q_arr)

    def threshold(self, c: float, n: int) -> float:
        """``v(1 - c/n)``, the threshold accepting each draw with probability ``c/n``."""
        if not 0 <= c <= n:
            raise DomainError(f"rate c={c} outside [0, n={n}]")
        return self.value_at_tail(c / n)

    # -------------------------------------------------------------- integrals
    def overshoot(self, theta: float) -> float:
        """``E[(x - theta)^+] = integral of G over [theta, inf)``."""
        total = 0.0
        for c in self.components:
            if theta <= c.lo:
                total += c.w * ((c.lo + c.hi) / 2 - theta)
            elif theta < c.hi:
                total += c.w * (c.hi - theta) ** 2 / (2 * (c.hi - c.lo))
        return total

    def delta(self, c: float, n: int) -> float:
        """``Delta(c) = n * E[(x - v(1 - c/n))^+]``."""
        return n * self.overshoot(self.threshold(c, n))

    def survival_integral(self, a: float, b: float) -> float:
        """``integral_a^b G(t) dt`` in closed form."""
        if b < a:
            return -self.survival_integral(b, a)
        return self.overshoot(a) - self.overshoot(b)

    def max_tail_integral(self, a: float, b: float, n: int) -> float:
        """``integral_a^b Pr[max of n draws >= t] dt = integral_a^b (1 - F(t)^n) dt``."""
        if b < a:
            return -self.max_tail_integral(b, a, n)
        total = 0.0
        for piece_lo, piece_hi, g_lo, g_hi in self._pieces(a, b):
            width = piece_hi - piece_lo
            if width <= 0:
                continue
            if g_lo == g_hi:
                total += width * _one_minus_pow(g_lo, n)
            else:
                # G is linear on the piece: integral of 1 - (1 - G)^n in closed form.
                slope = (g_lo - g_hi) / width
                total += width - _pow_diff(g_hi, g_lo, n + 1) / ((n + 1) * slope)
        return total

    def expected_max(self, n: int) -> float:
        """``E[max(x_1..x_n)]`` for i.i.d. draws."""
        if n < 1:
            raise DomainError("n must be at least 1")
        return self.max_tail_integral(0.0, self.support[1], n)

    def _pieces(self, a: float, b: float):
        """Split ``[a, b]`` where G is linear; yield ``(lo, hi, G(lo), G(hi))``."""
        cuts = {a, b}
        for c in self.components:
            for x in (c.lo, c.hi):
                if a < x < b:
                    cuts.add(x)
        pts = sorted(cuts)
        for lo, hi in zip(pts, pts[1:]):
            yield lo, hi, self._g_exact(lo), self._g_exact(hi)

    def _g_exact(self, t: float) -> float:
        """Survival summed from the top, so small tails stay exact."""
        total = 0.0
        for c in reversed(self.components):
            if t >= c.hi:
                break
            if t <= c.lo:
                total += c.w
            else:
                total += c.w * (c.hi - t) / (c.hi - c.lo)
        return min(total, 1.0)

    # ---------------------------------------------------------------- sampling
    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF draws: ``quantile(u)`` with ``u ~ U[0, 1)``."""
        return self.quantile(rng.random(size))

    # ----------------------------------------------------------- serialization
    def to_json(self) -> dict:
        return {
            "kind": "mixture",
            "components": [{"w": c.w, "lo": c.lo, "hi": c.hi} for c in self.components],
        }

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(w, lo, hi, above)`` arrays for compiled kernels."""
        return self._w.copy(), self._lo.copy(), self._hi.copy(), self._above.copy()


def _one_minus_pow(g: float, n: int) -> float:
    """``1 - (1 - g)^n`` without cancellation."""
    if g >= 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-g))


def _pow_diff(g_small: float, g_big: float, k: int) -> float:
    """``(1 - g_small)^k - (1 - g_big)^k`` for ``g_small <= g_big``."""
    if g_big >= 1.0:
        return (1.0 - g_small) ** k
    log_small = k * math.log1p(-g_small)
    log_big = k * math.log1p(-g_big)
    return math.exp(log_small) * -math.expm1(log_big - log_small)


# --------------------------------------------------------------------- factories

def uniform(lo: float = 0.0, hi: float = 1.0) -> Distribution:
    return Distribution([(1.0, lo, hi)], name=f"uniform({lo:g},{hi:g})")


def mixture(components, name: str | None = None) -> Distribution:
    return Distribution(components, name=name)


def d1_high_value(n: int, M: float = 1e6, eps: float = 1e-6) -> Distribution:
    """Mass ``1/(nM)`` uniform on ``[M - eps, M + eps]``, the rest on ``[0, eps]``."""
    p = 1.0 / (n * M)
    return Distribution([(1.0 - p, 0.0, eps), (p, M - eps, M + eps)],
                        name=f"d1(n={n},M={M:g},eps={eps:g})")


def d2_point_like(eps: float = 1e-6, symmetric: bool = True) -> Distribution:
    """Uniform on ``[1 - eps, 1 + eps]`` (or ``[1, 1 + eps]`` when not symmetric)."""
    lo = 1.0 - eps if symmetric else 1.0
    return Distribution([(1.0, lo, 1.0 + eps)], name=f"d2(eps={eps:g})")


def d3_two_level(n: int, c: float, eps: float = 1e-6) -> Distribution:
    """Mass ``c/n`` near ``1/(1 - e^-c)``, the rest uniform on ``[0, eps]``."""
    if not 0 < c < n:
        raise DomainError("d3 needs 0 < c < n")
    top = 1.0 / -math.expm1(-c)
    p = c / n
    return Distribution([(1.0 - p, 0.0, eps), (p, top - eps, top + eps)],
                        name=f"d3(n={n},c={c:g},eps={eps:g})")


def zoo(n: int) -> dict[str, Distribution]:
    """Built-in distributions used by soundness checks and the CLI."""
    return {
        "uniform01": uniform(0.0, 1.0),
        "uniform_2_5": uniform(2.0, 5.0),
        "two_bumps": mixture([(0.7, 0.0, 1.0), (0.3, 2.0, 3.0)], name="two_bumps"),
        "heavy_top": mixture([(0.9, 0.0, 1.0), (0.09, 1.0, 5.0), (0.01, 20.0, 40.0)],
                             name="heavy_top"),
        "d1": d1_high_value(n, M=1e3, eps=1e-6),
        "d2": d2_point_like(1e-6),
        "d3": d3_two_level(n, 1.2, 1e-6),
    }


_FACTORIES = {
    "uniform": (uniform, {"lo", "hi"}),
    "d1": (d1_high_value, {"n", "M", "eps"}),
    "d2": (d2_point_like, {"eps", "symmetric"}),
    "d3": (d3_two_level, {"n", "c", "eps"}),
}


def from_json(obj, n: int = 1000) -> Distribution:
    """Build a distribution from its JSON literal, a factory shorthand or a
    built-in name (``n`` sizes the built-ins that depend on it)."""
    if isinstance(obj, str):
        named = zoo(n)
        if obj not in named:
            raise DomainError(f"unknown distribution name {obj!r}; known: {sorted(named)}")
        return named[obj]
    if not isinstance(obj, dict):
        raise DomainError(f"distribution must be a name or an object, got {obj!r}")
    kind = obj.get("kind")
    if kind == "mixture":
        extra = set(obj) - {"kind", "components", "name"}
        if extra:
            raise DomainError(f"unknown keys for mixture: {sorted(extra)}")
        comps = []
        for comp in obj["components"]:
            if set(comp) != {"w", "lo", "hi"}:
                raise DomainError("mixture components need exactly the keys w, lo, hi")
            comps.append((comp["w"], comp["lo"], comp["hi"]))
        return Distribution(comps, name=obj.get("name"))
    if kind in _FACTORIES:
        factory, allowed = _FACTORIES[kind]
        args = {k: v for k, v in obj.items() if k != "kind"}
        extra = set(args) - allowed
        if extra:
            raise DomainError(f"unknown keys for {kind}: {sorted(extra)}")
        return factory(**args)
    raise DomainError(f"unknown distribution kind {kind!r}")
