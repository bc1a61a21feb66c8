"""Log-barrier interior-point maximization of smooth concave programs.

Problems are supplied as an objective model plus constraint *blocks*
(vectorized groups of inequality constraints g(x) <= 0). The solver runs
the classic path-following scheme: damped Newton on

    minimize  -t * f(x) - sum_i log(-g_i(x))

with the barrier weight t multiplied by `mu` per stage until the duality
gap surrogate m/t drops below the requested tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import StartInfeasible

_ALPHA = 0.25     # backtracking sufficient-decrease fraction
_BETA = 0.5       # backtracking step shrink
_SHIFT_EPS = 1e-9


class LinearConstraints:
    """Block of linear constraints A x <= b.

    Rows are normalized to unit max-abs coefficient; this leaves the
    feasible set unchanged but keeps the barrier Hessian well scaled when
    rows of very different physical units are mixed.
    """

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        scale = np.maximum(np.abs(A).max(axis=1), np.abs(b))
        scale[scale < 1e-300] = 1.0
        self.A = A / scale[:, None]
        self.b = b / scale

    @property
    def count(self):
        return self.b.size

    def values(self, x):
        return self.A @ x - self.b

    def jac(self, x):
        return self.A

    def hess_weighted(self, x, w):
        return None


class BoxConstraints(LinearConstraints):
    """lo <= x[idx] <= hi as a linear block; None disables a side."""

    def __init__(self, n, idx, lo=None, hi=None):
        idx = np.asarray(idx, dtype=int)
        rows, rhs = [], []
        for i, j in enumerate(idx):
            if lo is not None:
                e = np.zeros(n)
                e[j] = -1.0
                rows.append(e)
                rhs.append(-np.atleast_1d(lo)[i % np.size(lo)])
            if hi is not None:
                e = np.zeros(n)
                e[j] = 1.0
                rows.append(e)
                rhs.append(np.atleast_1d(hi)[i % np.size(hi)])
        super().__init__(np.vstack(rows), np.array(rhs, dtype=float))


class SmoothConstraints:
    """Block of smooth convex constraints given by callables.

    values(x) -> (k,), jac(x) -> (k, n), hess_weighted(x, w) -> (n, n)
    returning sum_i w_i * hess(g_i) (or None when all g_i are affine).
    """

    def __init__(self, values, jac, hess_weighted, count):
        self._values = values
        self._jac = jac
        self._hess_weighted = hess_weighted
        self.count = count

    def values(self, x):
        return np.atleast_1d(self._values(x))

    def jac(self, x):
        return np.atleast_2d(self._jac(x))

    def hess_weighted(self, x, w):
        return self._hess_weighted(x, w) if self._hess_weighted else None


@dataclass
class ConcaveProgram:
    """maximize objective(x) subject to constraint blocks g(x) <= 0.

    objective(x) must return (value, gradient, hessian); hessian may be
    None for affine objectives. x0 must be strictly feasible.
    """

    n: int
    objective: callable
    constraints: list
    x0: np.ndarray


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    gap: float
    converged: bool
    newton_steps: int
    shifts: list = field(default_factory=list)


def solve_concave(prog: ConcaveProgram, tol: float = 1e-7, mu: float = 10.0,
                  t0: float = 1.0, newton_tol: float = 1e-9,
                  max_newton: int = 200,
                  start_slack: float = 1e-7) -> BarrierResult:
    """Interior optimum of a smooth concave program.

    A start point sitting exactly on (or within `start_slack` of) a
    constraint boundary is handled by relaxing the offending constraints
    just enough to restore strict feasibility; the relaxations are
    reported in the result. A start point violating a constraint by more
    than `start_slack` raises StartInfeasible.
    """
    x = np.array(prog.x0, dtype=float)
    blocks = prog.constraints
    m = sum(b.count for b in blocks)

    shifts = []
    block_shift = []
    for b in blocks:
        g0 = b.values(x)
        worst = float(g0.max()) if g0.size else -np.inf
        if worst > start_slack:
            raise StartInfeasible(
                f"start point violates a constraint by {worst:.3e}")
        s = np.where(g0 > -_SHIFT_EPS, g0 + _SHIFT_EPS, 0.0)
        block_shift.append(s)
        if np.any(s > 0):
            shifts.append(float(s.max()))

    def barrier_eval(x, t, need_grad=True):
        # Domain check first: the objective may be undefined outside the
        # constraint set (e.g. logs of negative arguments).
        gs = []
        for b, s in zip(blocks, block_shift):
            g = b.values(x) - s
            if not np.all(g < 0):      # catches violations and NaNs alike
                return np.inf, None, None
            gs.append(g)
        fval, fgrad, fhess = prog.objective(x)
        phi = -t * fval
        grad = -t * fgrad if need_grad else None
        hess = None
        if need_grad:
            hess = np.zeros((prog.n, prog.n))
            if fhess is not None:
                hess -= t * fhess
        for b, g in zip(blocks, gs):
            phi -= np.log(-g).sum()
            if need_grad:
                J = b.jac(x)
                u = -1.0 / g
                grad = grad + J.T @ u
                hess += (J * (u * u)[:, None]).T @ J
                hw = b.hess_weighted(x, u)
                if hw is not None:
                    hess += hw
        return phi, grad, hess

    t = t0
    steps = 0
    fail = False
    centered = True
    while True:
        # centering at this barrier weight
        phi_prev = np.inf
        stalled = 0
        for it in range(max_newton + 1):
            phi, grad, hess = barrier_eval(x, t)
            if not np.isfinite(phi):
                fail = True
                break
            ridge = 0.0
            for attempt in range(8):
                try:
                    H = hess if ridge == 0 else hess + ridge * np.eye(prog.n)
                    L = np.linalg.cholesky(H)
                    break
                except np.linalg.LinAlgError:
                    ridge = max(ridge * 10, 1e-10 * max(1.0, np.abs(hess).max()))
            else:
                fail = True
                break
            d = _cho_solve(L, -grad)
            decrement = float(-grad @ d)
            if decrement / 2.0 <= newton_tol:
                break
            # Progress below the floating-point resolution of phi (checked
            # only while the decrement is still large) means the stage
            # cannot be centered any further by the arithmetic.
            if phi_prev - phi < 1e-12 * (1.0 + abs(phi)):
                stalled += 1
                if stalled >= 2:
                    centered = False
                    break
            else:
                stalled = 0
            phi_prev = phi
            if it == max_newton:
                centered = False    # stage budget spent; keep best iterate
                break
            s = 1.0
            gd = float(grad @ d)
            while s > 1e-13:
                phin, _, _ = barrier_eval(x + s * d, t, need_grad=False)
                if phin <= phi + _ALPHA * s * gd:
                    break
                s *= _BETA
            else:
                # Line search stalled: the decrement is below the floating
                # point noise floor of phi at this barrier weight, so the
                # current iterate is as centered as the arithmetic allows.
                centered = False
                break
            x = x + s * d
            steps += 1
        if fail:
            break
        if m / t <= tol:
            break
        t = min(t * mu, m / tol)

    fval, _, _ = prog.objective(x)
    gap = m / t
    return BarrierResult(x=x, objective=float(fval), gap=float(gap),
                         converged=(not fail) and centered and gap <= tol,
                         newton_steps=steps, shifts=shifts)


def _cho_solve(L, rhs):
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y)
