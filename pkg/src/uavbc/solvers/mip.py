"""Mixed-integer linear maximization via cutting planes over the simplex.

Gomory mixed-integer (GMI) cuts are read off the optimal tableau; if the
cut budget runs out before integrality is reached, a depth-first branch
and bound over the cut-strengthened relaxation finds a provably optimal
integer solution. When the node budget runs out first, the best integer
point found so far (or the caller's incumbent) is returned instead, so a
degenerate instance degrades to a feasible near-optimum rather than an
unbounded search.
"""

from dataclasses import dataclass
import math

import numpy as np

from ..errors import Infeasible, SolverFailure
from .linprog import LinearProgram, build_tableau

_INT_TOL = 1e-6


@dataclass
class MipResult:
    x: np.ndarray
    objective: float
    cuts: int
    nodes: int


def _fractional(values, int_cols):
    """Integer columns whose value is fractional, most fractional first."""
    v = values[int_cols]
    frac = np.abs(v - np.round(v))
    order = np.argsort(-frac, kind="stable")
    cols = np.asarray(int_cols)[order]
    return [int(j) for j, f in zip(cols, frac[order]) if f > _INT_TOL]


def _gmi_cuts(tab, int_set, max_cuts=8):
    """GMI cut rows (coeffs over all tableau columns, rhs) from the
    current optimal tableau. Cuts never exclude integer-feasible points."""
    ncols = tab.T.shape[1] - 1
    nonbasic = np.ones(ncols, dtype=bool)
    nonbasic[tab.basis] = False
    nonbasic &= ~tab.banned
    cuts = []
    rows = []
    for r, jb in enumerate(tab.basis):
        if jb < tab.nstruct and jb in int_set:
            bi = tab.T[r, -1]
            f0 = bi - math.floor(bi)
            if 0.01 <= f0 <= 0.99:
                rows.append((min(f0, 1 - f0), r, f0))
    rows.sort(reverse=True)
    for _, r, f0 in rows[:max_cuts]:
        a = tab.T[r, :-1]
        pi = np.zeros(ncols)
        for j in np.flatnonzero(nonbasic):
            aj = a[j]
            if abs(aj) < 1e-12:
                continue
            if j < tab.nstruct and j in int_set:
                f = aj - math.floor(aj)
                pi[j] = f if f <= f0 else f0 * (1.0 - f) / (1.0 - f0)
            else:
                pi[j] = aj if aj > 0 else f0 * (-aj) / (1.0 - f0)
        if np.abs(pi).max() > 1e-12:
            cuts.append((pi, f0))
    return cuts


def solve_mip(lp: LinearProgram, integer_vars, incumbent=None,
              cut_rounds=50, node_limit=300) -> MipResult:
    """Optimal integer point of the LP with `integer_vars` integral.

    `incumbent`: optional known-feasible x (original space) used to warm
    the branch-and-bound pruning bound. `node_limit` bounds the search;
    if it is reached after at least one integer-feasible point is known,
    that best point is returned.
    """
    int_vars = sorted(int(j) for j in integer_vars)
    lo = np.array([b[0] for b in lp.bounds], dtype=float)
    for j in int_vars:
        if abs(lo[j] - round(lo[j])) > 1e-9:
            raise ValueError("integer variables need integral lower bounds")
    int_set = set(int_vars)

    tab, shift = build_tableau(lp)
    tab.solve()

    ncuts = 0
    stall = 0
    for _ in range(cut_rounds):
        vals = tab.values()[:tab.nstruct]
        if not _fractional(vals, int_vars):
            break
        cuts = _gmi_cuts(tab, int_set)
        if not cuts:
            break
        before = tab.zval
        for pi, f0 in cuts:
            tab.append_leq(-pi, -f0)   # pi @ x_nonbasic >= f0
            ncuts += 1
        # Stop once rounds no longer move the relaxation bound: further
        # cuts only enlarge the tableau that branch and bound inherits.
        if before - tab.zval < 1e-6 * max(1.0, abs(before)):
            stall += 1
            if stall >= 2:
                break
        else:
            stall = 0
    vals = tab.values()[:tab.nstruct]
    if not _fractional(vals, int_vars):
        return _finish(lp, shift, vals, int_vars, ncuts, 0)

    # Branch and bound, depth first. A LIFO stack keeps live tableaux
    # bounded by the branching depth (a best-first frontier can hold
    # thousands of tableau copies and exhaust memory on degenerate
    # instances); diving on the stronger child finds incumbents early so
    # the bound test prunes the rest.
    best_val = -np.inf
    best_x = None
    if incumbent is not None:
        xi = np.asarray(incumbent, dtype=float) - shift
        best_val = float(tab.c_struct @ xi)
        best_x = xi
    stack = [tab]
    nodes = 0
    capped = False
    while stack:
        node = stack.pop()
        if node.zval <= best_val + 1e-9:
            continue
        nodes += 1
        if nodes > node_limit:
            capped = True
            break
        vals = node.values()[:node.nstruct]
        fr = _fractional(vals, int_vars)
        if not fr:
            if node.zval > best_val:
                best_val = node.zval
                best_x = vals.copy()
            continue
        j = fr[0]
        vj = vals[j]
        ej = np.zeros(node.nstruct)
        ej[j] = 1.0
        children = []
        for down in (True, False):
            child = node.clone()
            try:
                if down:
                    child.append_leq(ej, math.floor(vj))
                else:
                    child.append_leq(-ej, -math.ceil(vj))
            except Infeasible:
                continue
            cvals = child.values()[:child.nstruct]
            if not _fractional(cvals, int_vars):
                if child.zval > best_val:
                    best_val = child.zval
                    best_x = cvals.copy()
            elif child.zval > best_val + 1e-9:
                children.append(child)
        # Weaker child first so the stronger one is explored next.
        children.sort(key=lambda c: c.zval)
        stack.extend(children)
    if best_x is None:
        if capped:
            raise SolverFailure("branch-and-bound node limit exceeded "
                                "before any integer-feasible point")
        raise Infeasible("no integer-feasible point exists")
    return _finish(lp, shift, best_x, int_vars, ncuts, nodes)


def _finish(lp, shift, x_std, int_vars, ncuts, nodes):
    x = np.asarray(x_std[:len(shift)], dtype=float) + shift
    x[int_vars] = np.round(x[int_vars])
    return MipResult(x, float(lp.c @ x), ncuts, nodes)
