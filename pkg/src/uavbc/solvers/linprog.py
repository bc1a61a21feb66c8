"""Dense two-phase simplex with Bland's anti-cycling rule.

Maximization problems over inequality rows and box bounds. The tableau is
kept explicit so that the mixed-integer layer can read optimal rows (for
cut generation) and re-solve dually after appending rows.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import Infeasible, SolverFailure, Unbounded

_PIV_TOL = 1e-9
_FEAS_TOL = 1e-9
_OPT_TOL = 1e-9


@dataclass
class LinearProgram:
    """max c @ x subject to rows (a @ x <sense> rhs) and bounds lo <= x <= hi.

    Every lower bound must be finite; upper bounds may be None (infinite).
    """

    c: np.ndarray
    rows: list = field(default_factory=list)   # (coeffs, rhs, sense)
    bounds: list = None                        # (lo, hi) per variable

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.bounds is None:
            self.bounds = [(0.0, None)] * self.c.size
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        for lo, hi in self.bounds:
            if not np.isfinite(lo):
                raise ValueError("lower bounds must be finite")
            if hi is not None and hi < lo:
                raise ValueError("bound lower > upper")

    def add_row(self, coeffs, rhs, sense="<="):
        self.rows.append((np.asarray(coeffs, dtype=float), float(rhs), sense))


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    iterations: int


class SimplexTableau:
    """Standard-form simplex state: max c@x, A x = b, x >= 0.

    Built from '<=' rows only (callers normalize senses); keeps slack and
    artificial bookkeeping so rows can be appended after an optimal solve.
    """

    def __init__(self, A, b, c):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        self.nstruct = A.shape[1]
        m = A.shape[0]
        # Row scaling to unit max-abs coefficient.
        scale = np.maximum(np.abs(A).max(axis=1, initial=0.0), np.abs(b))
        scale[scale < 1e-12] = 1.0
        A = A / scale[:, None]
        b = b / scale
        # Columns: structural | slack (one per row) | artificials (neg rhs rows).
        neg = b < 0
        nart = int(neg.sum())
        ncols = self.nstruct + m + nart
        T = np.zeros((m, ncols + 1))
        T[:, :self.nstruct] = A
        T[:, -1] = b
        self.basis = np.empty(m, dtype=int)
        self.banned = np.zeros(ncols, dtype=bool)
        art = self.nstruct + m
        for i in range(m):
            T[i, self.nstruct + i] = 1.0
            if neg[i]:
                T[i] = -T[i]
                T[i, art] = 1.0
                self.basis[i] = art
                art += 1
            else:
                self.basis[i] = self.nstruct + i
        self.T = T
        self.c_struct = np.asarray(c, dtype=float)
        self.art_cols = np.arange(self.nstruct + m, ncols)
        self.iterations = 0
        self._solved = False

    # -- pivoting ---------------------------------------------------------

    def _pivot(self, r, j):
        T = self.T
        T[r] = T[r] / T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        zc = self.zrow[j]
        self.zval += zc * T[r, -1]
        self.zrow -= zc * T[r, :-1]
        self.basis[r] = j
        self.iterations += 1

    def _set_objective(self, c_ext):
        cb = c_ext[self.basis]
        self.zrow = c_ext - cb @ self.T[:, :-1]
        self.zval = float(cb @ self.T[:, -1])
        self.zrow[self.banned] = -np.inf

    def _primal(self, max_iter=None):
        m, ncols = self.T.shape[0], self.T.shape[1] - 1
        if max_iter is None:
            max_iter = 200 * (m + ncols) + 2000
        bland = False
        stall = 0
        last = self.zval
        while True:
            if self.iterations > max_iter:
                raise SolverFailure("simplex iteration limit exceeded")
            cand = np.flatnonzero(self.zrow > _OPT_TOL)
            if cand.size == 0:
                return
            j = cand[0] if bland else cand[np.argmax(self.zrow[cand])]
            colj = self.T[:, j]
            rows = np.flatnonzero(colj > _PIV_TOL)
            if rows.size == 0:
                raise Unbounded("linear program is unbounded")
            ratios = self.T[rows, -1] / colj[rows]
            rmin = ratios.min()
            ties = rows[ratios <= rmin + 1e-12]
            r = ties[np.argmin(self.basis[ties])]
            self._pivot(r, j)
            if self.zval > last + 1e-12:
                last = self.zval
                stall = 0
            else:
                stall += 1
                if stall > 2 * (m + ncols):
                    bland = True   # Bland's rule: guaranteed termination

    def _dual(self, max_iter=None):
        m, ncols = self.T.shape[0], self.T.shape[1] - 1
        if max_iter is None:
            max_iter = 200 * (m + ncols) + 2000
        it = 0
        while True:
            it += 1
            if it > max_iter:
                raise SolverFailure("dual simplex iteration limit exceeded")
            b = self.T[:, -1]
            r = int(np.argmin(b))
            if b[r] >= -_FEAS_TOL:
                return
            row = self.T[r, :-1]
            cand = np.flatnonzero((row < -_PIV_TOL) & ~self.banned)
            if cand.size == 0:
                raise Infeasible("appended row made the program infeasible")
            ratios = self.zrow[cand] / row[cand]
            rmin = ratios.min()
            ties = cand[ratios <= rmin + 1e-12]
            j = ties[0]
            self._pivot(r, j)

    # -- public interface --------------------------------------------------

    def solve(self):
        """Two-phase primal solve from scratch state."""
        if self.art_cols.size:
            c1 = np.zeros(self.T.shape[1] - 1)
            c1[self.art_cols] = -1.0
            self._set_objective(c1)
            self._primal()
            if self.zval < -1e-7:
                raise Infeasible("linear program is infeasible")
            self._evict_artificials()
        c2 = np.zeros(self.T.shape[1] - 1)
        c2[:self.nstruct] = self.c_struct
        self._set_objective(c2)
        self._primal()
        self._solved = True
        return self.extract()

    def _evict_artificials(self):
        self.banned[self.art_cols] = True
        for r in range(self.T.shape[0]):
            if self.basis[r] in self.art_cols:
                row = self.T[r, :-1]
                cand = np.flatnonzero((np.abs(row) > _PIV_TOL) & ~self.banned)
                if cand.size:
                    self._pivot(r, cand[0])
                # else: redundant row, harmless basic artificial at zero

    def extract(self):
        x = np.zeros(self.T.shape[1] - 1)
        x[self.basis] = self.T[:, -1]
        obj = float(self.c_struct @ x[:self.nstruct])
        return LpResult(x[:self.nstruct].copy(), obj, self.iterations)

    def values(self):
        """Values of every column (structural + slack + artificial)."""
        x = np.zeros(self.T.shape[1] - 1)
        x[self.basis] = self.T[:, -1]
        return x

    def append_leq(self, coeffs_full, rhs):
        """Append a '<=' row expressed over existing columns, then re-solve
        with the dual simplex (the previous basis stays dual feasible)."""
        ncols = self.T.shape[1] - 1
        row = np.zeros(ncols + 2)
        row[:len(coeffs_full)] = coeffs_full
        row[-1] = rhs
        scale = max(np.abs(row).max(), 1e-12)
        row /= scale
        # new slack column
        T = np.zeros((self.T.shape[0] + 1, ncols + 2))
        T[:-1, :ncols] = self.T[:, :-1]
        T[:-1, -1] = self.T[:, -1]
        T[-1] = row
        T[-1, ncols] = 1.0
        self.T = T
        self.banned = np.append(self.banned, False)
        self.zrow = np.append(self.zrow, 0.0)
        self.basis = np.append(self.basis, ncols)
        # eliminate basic columns from the new row
        for i, jb in enumerate(self.basis[:-1]):
            coef = self.T[-1, jb]
            if abs(coef) > 1e-13:
                self.T[-1] -= coef * self.T[i]
        self._dual()

    def clone(self):
        other = object.__new__(SimplexTableau)
        other.__dict__ = {k: (v.copy() if isinstance(v, np.ndarray) else v)
                          for k, v in self.__dict__.items()}
        return other


def _standardize(lp: LinearProgram):
    """Shift lower bounds to zero and normalize every row to '<='.

    Returns (A, b, c, lo) where the standard-form problem is over x' >= 0
    with x = x' + lo; upper bounds become explicit rows.
    """
    n = lp.c.size
    lo = np.array([b[0] for b in lp.bounds], dtype=float)
    A_rows, b_rows = [], []

    def push(a, r):
        A_rows.append(np.asarray(a, dtype=float))
        b_rows.append(float(r))

    for a, rhs, sense in lp.rows:
        a = np.asarray(a, dtype=float)
        shifted = rhs - float(a @ lo)
        if sense == "<=":
            push(a, shifted)
        elif sense == ">=":
            push(-a, -shifted)
        elif sense == "==":
            push(a, shifted)
            push(-a, -shifted)
        else:
            raise ValueError(f"unknown sense {sense!r}")
    for j, (lj, hj) in enumerate(lp.bounds):
        if hj is not None:
            e = np.zeros(n)
            e[j] = 1.0
            push(e, hj - lj)
    A = np.vstack(A_rows) if A_rows else np.zeros((0, n))
    return A, np.array(b_rows), lp.c.copy(), lo


def build_tableau(lp: LinearProgram) -> tuple:
    """Standard-form tableau plus the lower-bound shift vector."""
    A, b, c, lo = _standardize(lp)
    return SimplexTableau(A, b, c), lo


def solve_lp(lp: LinearProgram) -> LpResult:
    """Optimal vertex of the LP, or raise Infeasible / Unbounded."""
    tab, lo = build_tableau(lp)
    res = tab.solve()
    x = res.x + lo
    return LpResult(x, float(lp.c @ x), res.iterations)
