"""Dense linear programs and a two-phase primal simplex solver.

Models are always minimizations.  The solver works on a dense tableau and
uses Bland's rule for both the entering and the leaving variable, so the
pivot sequence is a deterministic function of the model.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numba
import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
# Smallest admissible pivot element, relative to the column's largest entry.
RATIO_TOL = 1e-9
HARRIS_TOL = 1e-9

RELATIONS = (">=", "<=", "=")


class LpModelError(ValueError):
    """Raised for malformed models (dimension mismatch, NaN coefficients)."""


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class Constraint:
    coeffs: np.ndarray
    relation: str
    rhs: float
    name: str = ""

    def activity(self, x: np.ndarray) -> float:
        return float(self.coeffs @ x)

    def slack(self, x: np.ndarray) -> float:
        """Signed slack; negative means violated (for '=' it is -|residual|)."""
        lhs = self.activity(x)
        if self.relation == ">=":
            return lhs - self.rhs
        if self.relation == "<=":
            return self.rhs - lhs
        return -abs(lhs - self.rhs)


@dataclass
class LpModel:
    """A minimization LP ``min c.x`` subject to linear rows and ``x >= lower``."""

    objective: np.ndarray
    constraints: list[Constraint] = field(default_factory=list)
    lower: np.ndarray | None = None
    names: list[str] | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        if self.lower is None:
            self.lower = np.zeros(n)
        else:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.names is None:
            self.names = [f"x{j}" for j in range(n)]

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def add(self, coeffs, relation: str, rhs: float, name: str = "") -> None:
        """Append a row.  ``coeffs`` is a dense vector or a ``{name: value}`` map."""
        if isinstance(coeffs, dict):
            row = np.zeros(self.n_vars)
            for key, value in coeffs.items():
                row[self.index(key)] += value
        else:
            row = np.asarray(coeffs, dtype=float)
        self.constraints.append(Constraint(row, relation, float(rhs), name))

    def validate(self) -> None:
        n = self.n_vars
        if len(self.names) != n or self.lower.shape != (n,):
            raise LpModelError("names/lower bounds do not match objective length")
        if not np.all(np.isfinite(self.objective)) or not np.all(np.isfinite(self.lower)):
            raise LpModelError("objective and lower bounds must be finite")
        for i, con in enumerate(self.constraints):
            if con.coeffs.shape != (n,):
                raise LpModelError(
                    f"constraint {i} has {con.coeffs.shape} coefficients, expected ({n},)"
                )
            if con.relation not in RELATIONS:
                raise LpModelError(f"constraint {i}: unknown relation {con.relation!r}")
            if not (np.all(np.isfinite(con.coeffs)) and np.isfinite(con.rhs)):
                raise LpModelError(f"constraint {i} has non-finite data")

    def with_constraint(self, coeffs, relation: str, rhs: float, name: str = "") -> LpModel:
        """Copy of the model with one more row."""
        out = LpModel(self.objective.copy(), list(self.constraints), self.lower.copy(),
                      list(self.names))
        out.add(coeffs, relation, rhs, name)
        return out

    def dense(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        if not self.constraints:
            return np.zeros((0, self.n_vars)), np.zeros(0), []
        A = np.vstack([con.coeffs for con in self.constraints])
        b = np.array([con.rhs for con in self.constraints])
        return A, b, [con.relation for con in self.constraints]

    def dump(self) -> str:
        """Plain-text listing, one row per line, suitable for diffing."""
        out = io.StringIO()
        out.write("# vars: " + " ".join(self.names) + "\n")
        out.write("min " + _format_row(self.objective, self.names) + "\n")
        for con in self.constraints:
            label = f"{con.name}: " if con.name else ""
            out.write(f"{label}{_format_row(con.coeffs, self.names)} {con.relation} {con.rhs:.17g}\n")
        for name, lo in zip(self.names, self.lower):
            if lo != 0.0:
                out.write(f"{name} >= {lo:.17g}\n")
        return out.getvalue()


def _format_row(coeffs: np.ndarray, names: list[str]) -> str:
    terms = [f"{c:+.17g}*{name}" for c, name in zip(coeffs, names) if c != 0.0]
    return " ".join(terms) if terms else "0"


@dataclass
class LpSolution:
    status: Status
    value: float = float("nan")
    point: np.ndarray | None = None
    iterations: int = 0
    duals: np.ndarray | None = None
    pivots: list[tuple[int, int]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def as_dict(self, names: list[str] | None = None) -> dict:
        out = {"status": self.status.value, "value": self.value, "iterations": self.iterations}
        if self.point is not None:
            if names is None:
                out["point"] = [float(v) for v in self.point]
            else:
                out["point"] = {k: float(v) for k, v in zip(names, self.point)}
        return out


@numba.njit(cache=True, nogil=True)
def _eliminate(T, r, q):
    """Pivot on ``T[r, q]``, touching only the pivot row's non-zero columns."""
    row = T[r]
    row /= row[q]
    cols = np.nonzero(row)[0]
    for i in range(T.shape[0]):
        f = T[i, q]
        if i == r or f == 0.0:
            continue
        for j in cols:
            T[i, j] -= f * row[j]
        T[i, q] = 0.0


class _Tableau:
    """Standard-form tableau ``B^-1 [A | b]`` kept in step with a basis.

    The tableau is rebuilt from the original data every ``REFRESH`` pivots,
    which bounds the error accumulated by rank-one updates.
    """

    REFRESH = 500

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        self.A0 = np.column_stack([A, b])
        self.T = self.A0.copy()
        self.basis = list(basis)
        self.pivots: list[tuple[int, int]] = []

    @property
    def rhs(self) -> np.ndarray:
        return self.T[:, -1]

    def drop_rows(self, keep: np.ndarray) -> None:
        self.A0 = self.A0[keep]
        self.T = self.T[keep]
        self.basis = [bi for bi, k in zip(self.basis, keep) if k]

    def refresh(self) -> None:
        self.T = np.linalg.solve(self.A0[:, self.basis], self.A0)
        self.T[np.abs(self.T) < 1e-14] = 0.0
        np.maximum(self.T[:, -1], 0.0, out=self.T[:, -1])

    def reduced(self, cost: np.ndarray) -> np.ndarray:
        """Reduced costs; the last entry holds minus the objective."""
        return np.append(cost, 0.0) - cost[self.basis] @ self.T

    def pivot(self, r: int, q: int) -> None:
        _eliminate(self.T, r, q)
        self.basis[r] = q
        self.pivots.append((r, q))

    def drop_columns(self, start: int, stop: int) -> None:
        keep = np.r_[0:start, stop:self.T.shape[1]]
        self.T = np.ascontiguousarray(self.T[:, keep])
        self.A0 = np.ascontiguousarray(self.A0[:, keep])

    def run(self, cost: np.ndarray, eligible: np.ndarray, max_iter: int) -> Status:
        """Minimize ``cost`` from the current (feasible) basis."""
        d = self.reduced(cost)
        since = 0
        while True:
            if len(self.pivots) >= max_iter:
                raise RuntimeError("simplex iteration limit reached")
            if since >= self.REFRESH:
                self.refresh()
                d = self.reduced(cost)
                since = 0
            cand = np.nonzero((d[:-1] < -PIVOT_TOL) & eligible)[0]
            if cand.size == 0:
                return Status.OPTIMAL
            q = int(cand[0])
            col = self.T[:, q]
            tol = RATIO_TOL * max(1.0, float(np.abs(col).max()))
            rows = np.nonzero(col > tol)[0]
            if rows.size == 0:
                return Status.UNBOUNDED
            r = _harris_row(self.rhs[rows], col[rows], rows)
            self.pivot(r, q)
            d -= d[q] * self.T[r]
            since += 1

    def objective(self, cost: np.ndarray) -> float:
        return float(cost[self.basis] @ self.rhs)


def _harris_row(rhs: np.ndarray, col: np.ndarray, rows: np.ndarray) -> int:
    """Two-pass ratio test: bound the step with a small feasibility allowance,
    then take the largest pivot among rows within the bound (lowest row on ties).
    """
    rhs = np.maximum(rhs, 0.0)
    bound = ((rhs + HARRIS_TOL) / col).min()
    within = np.nonzero(rhs / col <= bound)[0]
    best = within[np.argmax(col[within])]
    return int(rows[best])


def solve(model: LpModel, max_iter: int = 200_000) -> LpSolution:
    """Solve ``model`` with the two-phase primal simplex method and Bland's rule.

    Returns an :class:`LpSolution` whose ``duals`` (one per row, in the
    model's own sign convention) certify optimality: ``c - A^T y >= 0`` and
    ``b.y + c.lower == value``.
    """
    model.validate()
    A, b, rel = model.dense()
    n = model.n_vars
    m = A.shape[0]
    c = model.objective
    lower = model.lower
    b = b - A @ lower

    # Orient rows so every rhs is non-negative and homogeneous ">=" rows become
    # "<=" rows: their slack is then a feasible starting basic variable.
    ge = np.array([r == ">=" for r in rel], dtype=bool)
    sign = np.where((b < 0) | ((b == 0) & ge), -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    rel = [_flip(r) if s < 0 else r for r, s in zip(rel, sign)]

    n_slack = sum(r != "=" for r in rel)
    n_art = sum(r != "<=" for r in rel)
    N = n + n_slack + n_art
    full = np.zeros((m, N))
    full[:, :n] = A
    basis = []
    s_col, a_col = n, n + n_slack
    art_cols = []
    for i, r in enumerate(rel):
        if r == "<=":
            full[i, s_col] = 1.0
            basis.append(s_col)
            s_col += 1
        elif r == ">=":
            full[i, s_col] = -1.0
            s_col += 1
            full[i, a_col] = 1.0
            basis.append(a_col)
            art_cols.append(a_col)
            a_col += 1
        else:
            full[i, a_col] = 1.0
            basis.append(a_col)
            art_cols.append(a_col)
            a_col += 1

    tab = _Tableau(full, b, basis)
    cost = np.zeros(N)
    cost[:n] = c
    eligible = np.ones(N, dtype=bool)
    rows_kept = np.arange(m)

    if art_cols:
        cost1 = np.zeros(N)
        cost1[art_cols] = 1.0
        tab.run(cost1, eligible, max_iter)
        if tab.objective(cost1) > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return LpSolution(Status.INFEASIBLE, iterations=len(tab.pivots), pivots=tab.pivots)
        art_set = set(art_cols)
        # Drive artificials still basic (at zero level) out of the basis.
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] in art_set:
                row = tab.T[i, : n + n_slack]
                nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if nz.size:
                    tab.pivot(i, int(nz[np.argmax(np.abs(row[nz]))]))
                else:
                    keep[i] = False
        if not keep.all():
            tab.drop_rows(keep)
            rows_kept = np.nonzero(keep)[0]
        # Artificials occupy the trailing columns; none is basic any more.
        tab.drop_columns(n + n_slack, N)
        N = n + n_slack
        full = full[:, :N]
        cost = cost[:N]
        eligible = eligible[:N]

    status = tab.run(cost, eligible, max_iter)
    iterations = len(tab.pivots)
    if status is Status.UNBOUNDED:
        return LpSolution(status, iterations=iterations, pivots=tab.pivots)

    # Recover x and duals from the final basis on the original data.
    basis_cols = np.array(tab.basis, dtype=np.intp)
    B = full[rows_kept][:, basis_cols]
    xb = np.linalg.solve(B, b[rows_kept])
    z = np.zeros(N)
    z[basis_cols] = xb
    z[np.abs(z) < 1e-15] = 0.0
    x = z[:n] + lower

    y = np.zeros(m)
    y[rows_kept] = np.linalg.solve(B.T, cost[basis_cols])
    y *= sign
    value = float(c @ x)
    return LpSolution(Status.OPTIMAL, value, x, iterations, y, tab.pivots)


def _flip(rel: str) -> str:
    return {">=": "<=", "<=": ">=", "=": "="}[rel]


@dataclass
class Violation:
    index: int
    name: str
    relation: str
    slack: float


def check_feasible(model: LpModel, point, tol: float = FEAS_TOL) -> list[Violation]:
    """Every row (and lower bound) violated by more than ``tol``; empty means feasible."""
    x = np.asarray(point, dtype=float)
    if x.shape != (model.n_vars,):
        raise LpModelError(f"point has shape {x.shape}, expected ({model.n_vars},)")
    report = []
    for i, con in enumerate(model.constraints):
        s = con.slack(x)
        if s < -tol:
            report.append(Violation(i, con.name, con.relation, s))
    for j, (xj, lo) in enumerate(zip(x, model.lower)):
        if xj - lo < -tol:
            report.append(Violation(-1 - j, f"{model.names[j]} >= {lo:g}", ">=", xj - lo))
    return report


def dual_certificate(model: LpModel, solution: LpSolution, tol: float = 1e-7) -> bool:
    """True when ``solution.duals`` is dual feasible with matching objective."""
    if not solution.optimal or solution.duals is None:
        return False
    A, b, rel = model.dense()
    y = solution.duals
    for yi, r in zip(y, rel):
        if (r == ">=" and yi < -tol) or (r == "<=" and yi > tol):
            return False
    reduced = model.objective - A.T @ y if A.size else model.objective.copy()
    if np.any(reduced < -tol):
        return False
    dual_value = float(b @ y + model.objective @ model.lower - A.T @ y @ model.lower) if A.size \
        else float(model.objective @ model.lower)
    return abs(dual_value - solution.value) <= tol * max(1.0, abs(solution.value))
