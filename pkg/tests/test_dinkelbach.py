import numpy as np
import pytest

from uavbc.solvers import (BoxConstraints, ConcaveProgram,
                           FractionalObjective, dinkelbach, solve_concave)


def solve_power_ratio(c2, e_uav, p_max=6.0, ts=1.0):
    """max ts*log2(1 + c2*p) / (e_uav + ts*p) over p in [0, p_max]."""
    frac = FractionalObjective(
        numerator=lambda x: ts * float(np.log2(1.0 + c2 * x[0])),
        denominator=lambda x: e_uav + ts * float(x[0]))
    blocks = [BoxConstraints(1, [0], lo=0.0, hi=p_max)]

    def solver(lam, x_warm):
        def objective(x):
            p = x[0]
            val = ts * np.log2(1.0 + c2 * p) - lam * (e_uav + ts * p)
            grad = np.array([ts * c2 / (np.log(2.0) * (1.0 + c2 * p))
                             - lam * ts])
            hess = np.array([[-ts * c2 ** 2
                              / (np.log(2.0) * (1.0 + c2 * p) ** 2)]])
            return val, grad, hess
        prog = ConcaveProgram(n=1, objective=objective, constraints=blocks,
                              x0=np.asarray(x_warm, float))
        return solve_concave(prog, tol=1e-9, start_slack=1e-6).x

    return dinkelbach(frac, solver, np.array([p_max / 2.0]), tol=1e-10)


def grid_ratio(c2, e_uav, p_max=6.0, ts=1.0, step=1e-4):
    p = np.arange(step, p_max + step, step)
    r = ts * np.log2(1.0 + c2 * p) / (e_uav + ts * p)
    i = int(np.argmax(r))
    return float(p[i]), float(r[i])


def test_matches_grid_search_oracle():
    rng = np.random.default_rng(12)
    for _ in range(20):
        c2 = float(rng.uniform(0.5, 50.0))
        e_uav = float(rng.uniform(0.5, 30.0))
        res = solve_power_ratio(c2, e_uav)
        p_grid, r_grid = grid_ratio(c2, e_uav)
        assert res.x[0] == pytest.approx(p_grid, abs=1e-3)
        assert res.ratio == pytest.approx(r_grid, abs=1e-5)


def test_lambda_sequence_nondecreasing():
    res = solve_power_ratio(5.0, 2.0)
    lams = [lam for lam, _ in res.trace]
    assert all(b >= a - 1e-7 for a, b in zip(lams, lams[1:]))


def test_parametric_value_reaches_tolerance():
    res = solve_power_ratio(5.0, 2.0)
    assert res.trace[-1][1] <= 1e-10


def test_linear_over_linear_hits_endpoint():
    # max (2x + 1) / (x + 1) on [0, 3] is increasing -> x* = 3
    frac = FractionalObjective(lambda x: 2.0 * x[0] + 1.0,
                               lambda x: x[0] + 1.0)
    blocks = [BoxConstraints(1, [0], lo=0.0, hi=3.0)]

    def solver(lam, x_warm):
        def objective(x):
            val = (2.0 - lam) * x[0] + 1.0 - lam
            return val, np.array([2.0 - lam]), None
        prog = ConcaveProgram(n=1, objective=objective, constraints=blocks,
                              x0=np.asarray(x_warm, float))
        return solve_concave(prog, tol=1e-9, start_slack=1e-6).x

    res = dinkelbach(frac, solver, np.array([1.0]), tol=1e-8)
    assert res.x[0] == pytest.approx(3.0, abs=1e-4)
    assert res.ratio == pytest.approx(7.0 / 4.0, abs=1e-5)
