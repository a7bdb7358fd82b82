"""Upper-bound surfaces from the hard instances and their grid maximization.

Each surface is the ratio some hard distribution forces on a parametrized
policy family; its maximum over the parameter box caps what that family can
guarantee.  Scalar evaluation and grid evaluation share one compiled
function, so a grid argmax re-evaluates to exactly the same value.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numba
import numpy as np

from prophet_lab.dist import DomainError

SIMPSON_TOL = 1e-12
SIMPSON_DEPTH = 60
C_GRID = 2000


@numba.njit(cache=True)
def _f_log(u, c):
    return math.exp(-c * math.exp(u))


@numba.njit(cache=True)
def _simpson(c, a, b, tol):
    """Adaptive Simpson for ``int_a^b exp(-c e^u) du`` with an explicit stack."""
    stack_a = np.empty(SIMPSON_DEPTH * 2 + 2)
    stack_b = np.empty_like(stack_a)
    stack_fa = np.empty_like(stack_a)
    stack_fm = np.empty_like(stack_a)
    stack_fb = np.empty_like(stack_a)
    stack_s = np.empty_like(stack_a)
    stack_tol = np.empty_like(stack_a)
    stack_d = np.empty(SIMPSON_DEPTH * 2 + 2, dtype=np.int64)
    fa, fb, fm = _f_log(a, c), _f_log(b, c), _f_log(0.5 * (a + b), c)
    top = 0
    stack_a[0], stack_b[0], stack_fa[0], stack_fm[0], stack_fb[0] = a, b, fa, fm, fb
    stack_s[0] = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    stack_tol[0], stack_d[0] = tol, 0
    total = 0.0
    while top >= 0:
        a, b = stack_a[top], stack_b[top]
        fa, fm, fb, s = stack_fa[top], stack_fm[top], stack_fb[top], stack_s[top]
        eps, depth = stack_tol[top], stack_d[top]
        top -= 1
        m = 0.5 * (a + b)
        flm = _f_log(0.5 * (a + m), c)
        frm = _f_log(0.5 * (m + b), c)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        err = left + right - s
        if depth >= SIMPSON_DEPTH or abs(err) <= 15.0 * eps:
            total += left + right + err / 15.0
            continue
        top += 1
        stack_a[top], stack_b[top], stack_fa[top], stack_fm[top], stack_fb[top] = m, b, fm, frm, fb
        stack_s[top], stack_tol[top], stack_d[top] = right, 0.5 * eps, depth + 1
        top += 1
        stack_a[top], stack_b[top], stack_fa[top], stack_fm[top], stack_fb[top] = a, m, fa, flm, fm
        stack_s[top], stack_tol[top], stack_d[top] = left, 0.5 * eps, depth + 1
    return total


@numba.njit(cache=True)
def _exp_integral(c, rho):
    # Substituting t = e^u removes the 1/t singularity near zero.
    if rho >= 1.0:
        return 0.0
    return _simpson(c, math.log(rho), 0.0, SIMPSON_TOL)


def exp_integral(c: float, rho: float) -> float:
    """``int_rho^1 exp(-c t) / t dt``, i.e. ``E1(c rho) - E1(c)``."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not 0 < rho <= 1:
        raise DomainError(f"rho must lie in (0, 1], got {rho}")
    return float(_exp_integral(float(c), float(rho)))


@numba.njit(cache=True)
def _ub_oa(c, rho):
    first = 1.0 - rho * math.exp(-c)
    second = -math.expm1(-c * rho) / c + rho * _exp_integral(c, rho)
    return min(first, second)


def ub_observe_accept(c: float, rho: float) -> float:
    """Best ratio observe-and-accept with parameters ``(c, rho)`` can get on
    the high-value and point-like hard instances (limits taken exactly)."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    return float(_ub_oa(float(c), float(rho)))


@numba.njit(cache=True)
def _ub3_at(a, b, c):
    return (a + b * c) / -math.expm1(-c)


@numba.njit(cache=True)
def _ub3_grid_min(a, b, c1, c2, grid):
    """Minimum of ``(a + b c) / (1 - e^-c)`` over the interior grid of ``(c1, c2)``.

    The derivative has the sign of ``h(c) = b - e^-c (a + b + b c)``, which is
    increasing, so the function is unimodal and the grid minimum sits next to
    the root of ``h``.
    """
    step = (c2 - c1) / (grid + 1)
    lo, hi = c1, c2
    if b - math.exp(-lo) * (a + b + b * lo) >= 0.0:
        root = lo
    elif b - math.exp(-hi) * (a + b + b * hi) <= 0.0:
        root = hi
    else:
        # Only the grid cell of the root matters.
        while hi - lo > 0.25 * step:
            mid = 0.5 * (lo + hi)
            if b - math.exp(-mid) * (a + b + b * mid) < 0.0:
                lo = mid
            else:
                hi = mid
        root = 0.5 * (lo + hi)
    j0 = int(math.floor((root - c1) / step))
    best = np.inf
    for j in range(j0 - 1, j0 + 3):
        if 1 <= j <= grid:
            v = _ub3_at(a, b, c1 + j * step)
            if v < best:
                best = v
    return best


@numba.njit(cache=True)
def _ub_two(c1, c2, rho, grid):
    a = -math.expm1(-rho * c1)
    b = math.exp(-rho * c1) * -math.expm1(-(1.0 - rho) * c2) / c2
    ub1 = a / c1 + b
    ub2 = -math.expm1(-rho * c1 - (1.0 - rho) * c2)
    ub3 = _ub3_grid_min(a, b, c1, c2, grid)
    return min(ub1, ub2, ub3)


def ub_two_threshold(c1: float, c2: float, rho: float, c_grid: int = C_GRID) -> float:
    """``min(UB1, UB2, UB3)``: what the hard instances leave a two-threshold rule."""
    if not 0 < c1 < c2:
        raise DomainError(f"need 0 < c1 < c2, got c1={c1}, c2={c2}")
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if c_grid < 1:
        raise DomainError("c_grid must be at least 1")
    return float(_ub_two(float(c1), float(c2), float(rho), int(c_grid)))


def ub_two_threshold_parts(c1: float, c2: float, rho: float, c_grid: int = C_GRID) -> dict:
    a = -math.expm1(-rho * c1)
    b = math.exp(-rho * c1) * -math.expm1(-(1.0 - rho) * c2) / c2
    return {
        "ub1": a / c1 + b,
        "ub2": -math.expm1(-rho * c1 - (1.0 - rho) * c2),
        "ub3": float(_ub3_grid_min(a, b, c1, c2, c_grid)),
    }


# ------------------------------------------------------------------ grid kernels

@numba.njit(cache=True)
def _grid_oa(cs, rhos):
    out = np.empty((cs.size, rhos.size))
    for i in range(cs.size):
        for j in range(rhos.size):
            out[i, j] = _ub_oa(cs[i], rhos[j])
    return out


@numba.njit(cache=True)
def _grid_two(c1s, c2s, rhos, grid):
    out = np.full((c1s.size, c2s.size, rhos.size), -np.inf)
    for i in range(c1s.size):
        for j in range(c2s.size):
            if c2s[j] <= c1s[i]:
                continue
            for k in range(rhos.size):
                out[i, j, k] = _ub_two(c1s[i], c2s[j], rhos[k], grid)
    return out


@dataclass
class BoundSurface:
    """A bound function over a box; points outside its domain evaluate to ``-inf``."""

    kind: str
    box: tuple[tuple[float, float], ...]
    names: tuple[str, ...]
    fn: Callable[..., float]
    grid_fn: Callable[..., np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, *point: float) -> float:
        return self.fn(*point)

    def evaluate_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        if self.grid_fn is not None:
            return self.grid_fn(*axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.vectorize(self.fn, otypes=[float])(*mesh)


def observe_accept_surface(box=((0.0, 1.0), (0.0, 1.0))) -> BoundSurface:
    return BoundSurface("observe_accept", tuple(box), ("c", "rho"), ub_observe_accept, _grid_oa)


def two_threshold_surface(box=((0.0, 2.0), (0.0, 30.0), (0.0, 1.0)), c_grid: int = C_GRID) -> BoundSurface:
    def fn(c1, c2, rho):
        if c2 <= c1:
            return -math.inf
        return ub_two_threshold(c1, c2, rho, c_grid)

    def grid_fn(c1s, c2s, rhos):
        return _grid_two(c1s, c2s, rhos, c_grid)

    return BoundSurface("two_threshold", tuple(box), ("c1", "c2", "rho"), fn, grid_fn)


def constant_surface(value: float, box=((0.0, 1.0), (0.0, 1.0))) -> BoundSurface:
    return BoundSurface("constant", tuple(box), tuple(f"x{i}" for i in range(len(box))),
                        lambda *p: value)


@dataclass
class GridMaxResult:
    argmax: tuple[float, ...]
    value: float
    resolution: int
    refine_rounds: int
    names: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "argmax": dict(zip(self.names, self.argmax)) if self.names else list(self.argmax),
            "value": self.value,
            "resolution": self.resolution,
            "refine_rounds": self.refine_rounds,
        }


def interior_axis(lo: float, hi: float, res: int) -> np.ndarray:
    """``res`` equally spaced points strictly inside ``(lo, hi)``."""
    return lo + np.arange(1, res + 1) * ((hi - lo) / (res + 1))


def grid_maximize(surface: BoundSurface, coarse_res: int = 200, refine_rounds: int = 3) -> GridMaxResult:
    """Coarse interior grid, then ``refine_rounds`` grids on boxes shrunk 10x
    around the incumbent (clipped to the domain).

    The result is a lower bound on the true supremum.  Ties go to the
    lexicographically smallest point.
    """
    if coarse_res < 1:
        raise DomainError("coarse_res must be at least 1")
    outer = [tuple(map(float, side)) for side in surface.box]
    box = outer
    best_point: tuple[float, ...] | None = None
    best = -math.inf
    for _ in range(refine_rounds + 1):
        axes = [interior_axis(lo, hi, coarse_res) for lo, hi in box]
        values = surface.evaluate_grid(axes)
        flat = int(np.argmax(values))
        idx = np.unravel_index(flat, values.shape)
        point = tuple(float(ax[i]) for ax, i in zip(axes, idx))
        value = surface(*point)
        if value > best:
            best, best_point = value, point
        box = [(max(olo, x - (hi - lo) / 20.0), min(ohi, x + (hi - lo) / 20.0))
               for (lo, hi), (olo, ohi), x in zip(box, outer, best_point)]
    return GridMaxResult(best_point, best, coarse_res, refine_rounds, surface.names)
