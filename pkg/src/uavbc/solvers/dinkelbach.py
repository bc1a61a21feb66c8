"""Dinkelbach's method for concave/convex ratio maximization.

max N(x)/D(x) is reduced to the parametric problems max N(x) - lam*D(x);
the ratio lam is updated to the incumbent ratio until the parametric
optimum F(lam) falls below the tolerance.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvariantViolation, SolverFailure


@dataclass
class FractionalObjective:
    """Ratio N(x)/D(x) with concave N and convex D, D > 0 on the
    feasible set."""

    numerator: callable
    denominator: callable

    def ratio(self, x):
        d = self.denominator(x)
        if d <= 0:
            raise InvariantViolation("fractional denominator must be positive")
        return self.numerator(x) / d


@dataclass
class DinkelbachResult:
    x: np.ndarray
    ratio: float
    iterations: int
    trace: list = field(default_factory=list)   # (lam, F(lam)) pairs


def dinkelbach(frac: FractionalObjective, feasible_solver, x0,
               tol: float = 1e-6, max_iters: int = 30,
               lam_slack: float = 1e-7) -> DinkelbachResult:
    """Maximize the ratio starting from feasible x0.

    `feasible_solver(lam, x_warm)` must return a maximizer of
    N(x) - lam*D(x) over the feasible set. The lam sequence is checked to
    be nondecreasing (within `lam_slack` of solver noise).
    """
    x = np.asarray(x0, dtype=float)
    lam = frac.ratio(x)
    trace = []
    prev_f = None
    for it in range(1, max_iters + 1):
        x = np.asarray(feasible_solver(lam, x), dtype=float)
        num = frac.numerator(x)
        den = frac.denominator(x)
        if den <= 0:
            raise InvariantViolation("fractional denominator must be positive")
        f_lam = num - lam * den
        trace.append((float(lam), float(f_lam)))
        new_lam = num / den
        if new_lam < lam - lam_slack:
            raise InvariantViolation(
                f"Dinkelbach ratio decreased: {lam} -> {new_lam}")
        # Converged when the parametric value reaches the tolerance.
        # An inexact inner solver leaves a small positive floor under
        # F(lam) that outer iterations cannot remove; a plateaued small
        # F(lam) therefore also counts as converged.
        stalled = (prev_f is not None and f_lam <= 1e4 * tol
                   and prev_f - f_lam <= 1e-3 * abs(prev_f))
        prev_f = f_lam
        lam = max(lam, new_lam)
        if f_lam <= tol or stalled:
            return DinkelbachResult(x=x, ratio=float(lam),
                                    iterations=it, trace=trace)
    raise SolverFailure(
        f"Dinkelbach did not converge in {max_iters} iterations", trace=trace)
