"""Dense two-phase simplex for small linear programs.

The bound LPs here have at most a few dozen variables but are heavily
degenerate (many zero stratum probabilities, many ``q_a - q_b <= 0`` rows
with zero right-hand side), so the solver always uses Bland's rule.

Minimal example::

    >>> lp = LinearProgram.build([1.0], bounds=[(0.2, 1.0)])
    >>> sol = solve(lp, "min")
    >>> sol.status, round(sol.value, 12)
    (<Status.OPTIMAL: 'optimal'>, 0.2)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
ZERO_ROW_TOL = 1e-14


class SolverStallError(RuntimeError):
    """The pivot cap was reached before the simplex terminated."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``objective @ x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub`` and
    ``lo <= x <= hi`` (either bound may be infinite)."""

    objective: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray

    @classmethod
    def build(cls, objective, bounds=None, eq=(), ineq=(), A_eq=None, b_eq=None,
              A_ub=None, b_ub=None) -> "LinearProgram":
        """Assemble an LP from dense arrays or ``(coeffs, rhs)`` pairs.

        ``bounds`` is a sequence of ``(lo, hi)`` per variable; default
        ``[0, inf)``.  ``eq`` and ``ineq`` are iterables of
        ``(coefficient_vector, rhs)`` and are appended to ``A_eq``/``A_ub``.
        """
        c = np.asarray(objective, dtype=float).ravel()
        n = c.size
        if bounds is None:
            lo, hi = np.zeros(n), np.full(n, np.inf)
        else:
            b = np.asarray(bounds, dtype=float).reshape(n, 2)
            lo, hi = b[:, 0].copy(), b[:, 1].copy()

        def stack(A, rhs, pairs):
            rows = [] if A is None else list(np.asarray(A, dtype=float).reshape(-1, n))
            vals = [] if rhs is None else list(np.asarray(rhs, dtype=float).ravel())
            for coef, r in pairs:
                rows.append(np.asarray(coef, dtype=float).ravel())
                vals.append(float(r))
            A = np.array(rows, dtype=float).reshape(-1, n)
            return A, np.array(vals, dtype=float)

        Ae, be = stack(A_eq, b_eq, eq)
        Au, bu = stack(A_ub, b_ub, ineq)
        return cls(c, lo, hi, Ae, be, Au, bu)

    def __post_init__(self):
        n = self.n_vars
        for name in ("lo", "hi"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")
        if np.any(self.lo > self.hi):
            j = int(np.argmax(self.lo > self.hi))
            raise ValueError(f"variable {j}: lower bound {self.lo[j]} exceeds upper bound {self.hi[j]}")
        if self.A_eq.shape[1:] != (n,) or self.A_ub.shape[1:] != (n,):
            raise ValueError("constraint rows must have length n_vars")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError("constraint matrix and rhs lengths differ")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_constraints(self) -> int:
        return self.A_eq.shape[0] + self.A_ub.shape[0]

    def with_objective(self, objective) -> "LinearProgram":
        return LinearProgram(np.asarray(objective, dtype=float), self.lo, self.hi,
                             self.A_eq, self.b_eq, self.A_ub, self.b_ub)

    def violation(self, x) -> float:
        """Largest constraint or bound violation of ``x``."""
        x = np.asarray(x, dtype=float)
        v = [0.0]
        if self.b_eq.size:
            v.append(np.max(np.abs(self.A_eq @ x - self.b_eq)))
        if self.b_ub.size:
            v.append(np.max(self.A_ub @ x - self.b_ub))
        v.append(np.max(self.lo - x))
        v.append(np.max(x - self.hi))
        return float(max(v))


@dataclass(frozen=True)
class LpSolution:
    status: Status
    value: float = float("nan")
    x: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _StandardForm:
    """``x = shift + M y`` with ``y >= 0`` and rows ``A y (=|<=) b``."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        cols, shift, ub = [], np.zeros(n), []
        for j in range(n):
            lo, hi = lp.lo[j], lp.hi[j]
            e = np.zeros(n)
            e[j] = 1.0
            if np.isfinite(lo):
                shift[j] = lo
                cols.append(e)
                ub.append(hi - lo)
            elif np.isfinite(hi):
                shift[j] = hi
                cols.append(-e)
                ub.append(np.inf)
            else:
                cols.append(e)
                cols.append(-e)
                ub.extend([np.inf, np.inf])
        self.M = np.array(cols).T.reshape(n, -1)
        self.shift = shift
        ub = np.array(ub)
        ny = self.M.shape[1]

        self.ok = True
        eq_rows, eq_rhs = [], []
        A = lp.A_eq @ self.M
        b = lp.b_eq - lp.A_eq @ shift
        for i in range(A.shape[0]):
            row = A[i]
            if np.max(np.abs(row), initial=0.0) < ZERO_ROW_TOL:
                if abs(b[i]) > FEAS_TOL:
                    self.ok = False
                continue
            eq_rows.append(row)
            eq_rhs.append(b[i])

        le_rows, le_rhs = [], []
        A = lp.A_ub @ self.M
        b = lp.b_ub - lp.A_ub @ shift
        for i in range(A.shape[0]):
            row = A[i]
            if np.max(np.abs(row), initial=0.0) < ZERO_ROW_TOL:
                if b[i] < -FEAS_TOL:
                    self.ok = False
                continue
            le_rows.append(row)
            le_rhs.append(b[i])
        for k in np.nonzero(np.isfinite(ub))[0]:
            row = np.zeros(ny)
            row[k] = 1.0
            le_rows.append(row)
            le_rhs.append(ub[k])

        self.ny = ny
        self.eq = (np.array(eq_rows).reshape(-1, ny), np.array(eq_rhs))
        self.le = (np.array(le_rows).reshape(-1, ny), np.array(le_rhs))

    def cost(self, c: np.ndarray) -> tuple[np.ndarray, float]:
        return c @ self.M, float(c @ self.shift)

    def recover(self, y: np.ndarray) -> np.ndarray:
        return self.shift + self.M @ y


class _Tableau:
    """Simplex tableau; the last row holds reduced costs, the last column the rhs."""

    def __init__(self, tab: np.ndarray, basis: list[int], max_pivots: int):
        self.tab = tab
        self.basis = basis
        self.max_pivots = max_pivots
        self.pivots = 0

    def copy(self) -> "_Tableau":
        return _Tableau(self.tab.copy(), list(self.basis), self.max_pivots)

    def pivot(self, r: int, j: int) -> None:
        tab = self.tab
        tab[r] /= tab[r, j]
        col = tab[:, j].copy()
        col[r] = 0.0
        tab -= np.outer(col, tab[r])
        tab[:, j] = 0.0
        tab[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise SolverStallError(f"simplex exceeded {self.max_pivots} pivots")

    def run(self, ncols: int) -> Status:
        """Minimize with Bland's rule over the first ``ncols`` columns."""
        tab = self.tab
        m = tab.shape[0] - 1
        while True:
            red = tab[-1, :ncols]
            cand = np.nonzero(red < -PIVOT_TOL)[0]
            if cand.size == 0:
                return Status.OPTIMAL
            j = int(cand[0])
            col = tab[:m, j]
            pos = np.nonzero(col > PIVOT_TOL)[0]
            if pos.size == 0:
                return Status.UNBOUNDED
            ratios = tab[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)


def _phase_one(sf: _StandardForm, max_pivots: int):
    """Return a feasible tableau over the structural + slack columns, or None."""
    A_eq, b_eq = sf.eq
    A_le, b_le = sf.le
    m_eq, m_le = A_eq.shape[0], A_le.shape[0]
    m = m_eq + m_le
    ny = sf.ny
    n_slack = m_le

    rows = np.zeros((m, ny + n_slack))
    rhs = np.zeros(m)
    rows[:m_eq, :ny] = A_eq
    rhs[:m_eq] = b_eq
    rows[m_eq:, :ny] = A_le
    rows[m_eq:, ny:] = np.eye(m_le)
    rhs[m_eq:] = b_le
    neg = rhs < 0
    rows[neg] *= -1.0
    rhs[neg] *= -1.0

    needs_art = np.ones(m, dtype=bool)
    needs_art[m_eq:] = neg[m_eq:]
    art_rows = np.nonzero(needs_art)[0]
    n_struct = ny + n_slack
    n_art = art_rows.size

    tab = np.zeros((m + 1, n_struct + n_art + 1))
    tab[:m, :n_struct] = rows
    tab[:m, -1] = rhs
    basis = [0] * m
    for k, i in enumerate(art_rows):
        tab[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    for i in range(m_eq, m):
        if not needs_art[i]:
            basis[i] = ny + (i - m_eq)
    tab[-1, :n_struct] = -tab[art_rows, :n_struct].sum(axis=0)
    tab[-1, -1] = -tab[art_rows, -1].sum()

    tb = _Tableau(tab, basis, max_pivots)
    if n_art:
        tb.run(n_struct + n_art)
        if -tb.tab[-1, -1] > FEAS_TOL:
            return None
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if tb.basis[i] >= n_struct:
                row = tb.tab[i, :n_struct]
                nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if nz.size:
                    j = int(nz[np.argmax(np.abs(row[nz]))])
                    tb.pivot(i, j)
                    keep.append(i)
            else:
                keep.append(i)
        keep = [i for i in keep if tb.basis[i] < n_struct]
        tab = np.vstack([tb.tab[keep][:, list(range(n_struct)) + [-1]],
                         np.zeros((1, n_struct + 1))])
        tb = _Tableau(tab, [tb.basis[i] for i in keep], max_pivots)
        tb.pivots = 0
    else:
        tb.tab = np.hstack([tab[:, :n_struct], tab[:, -1:]])
    tb.tab[-1] = 0.0
    return tb


def _phase_two(tb: _Tableau, sf: _StandardForm, c: np.ndarray) -> LpSolution:
    cy, const = sf.cost(c)
    n_struct = tb.tab.shape[1] - 1
    cost = np.zeros(n_struct)
    cost[: sf.ny] = cy
    tab = tb.tab
    m = tab.shape[0] - 1
    cb = cost[tb.basis]
    tab[-1, :n_struct] = cost - cb @ tab[:m, :n_struct]
    tab[-1, -1] = -(cb @ tab[:m, -1])
    status = tb.run(n_struct)
    if status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, -np.inf)
    z = np.zeros(n_struct)
    z[tb.basis] = tab[:m, -1]
    y = np.maximum(z[: sf.ny], 0.0)
    x = sf.recover(y)
    return LpSolution(Status.OPTIMAL, float(c @ x), x)


def _cap(lp: LinearProgram) -> int:
    return 10 * (lp.n_vars + lp.n_constraints) ** 2


def _prepare(lp: LinearProgram):
    sf = _StandardForm(lp)
    if not sf.ok:
        return sf, None
    return sf, _phase_one(sf, _cap(lp))


def _flip(sol: LpSolution) -> LpSolution:
    if sol.status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, np.inf)
    return LpSolution(sol.status, -sol.value, sol.x)


def solve(lp: LinearProgram, sense: str = "min") -> LpSolution:
    """Optimize ``lp.objective`` in the given sense (``"min"`` or ``"max"``).

    Maximization is done as ``-min(-c x)``.  Raises
    :class:`SolverStallError` past ``10 (n_vars + n_constraints)^2`` pivots.
    """
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    sf, tb = _prepare(lp)
    if tb is None:
        return LpSolution(Status.INFEASIBLE)
    if sense == "min":
        return _phase_two(tb, sf, lp.objective)
    return _flip(_phase_two(tb, sf, -lp.objective))


def solve_range(lp: LinearProgram) -> tuple[LpSolution, LpSolution]:
    """Minimum and maximum of the objective, sharing a single phase one."""
    sf, tb = _prepare(lp)
    if tb is None:
        return LpSolution(Status.INFEASIBLE), LpSolution(Status.INFEASIBLE)
    lo = _phase_two(tb.copy(), sf, lp.objective)
    hi = _flip(_phase_two(tb, sf, -lp.objective))
    return lo, hi


def feasible(lp: LinearProgram) -> bool:
    """True iff the phase-one optimum is zero (within ``1e-9``)."""
    sf, tb = _prepare(lp)
    return tb is not None
