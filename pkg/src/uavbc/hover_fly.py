"""Hover-and-fly benchmark scheme.

The UAV visits one hover point per BD in a TSP order, receives only while
hovering, and flies between points at maximum speed. Given the fixed
visiting order, the scheme's EE is maximized by block coordinate descent
over the CE powers, the hover times and the hover positions; each block
is a fractional program solved by Dinkelbach iterations over the
interior-point solver, with SCA surrogates for the non-convex position
block (rate lower bounds plus leg-length slacks).
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import Infeasible, InvariantViolation
from .metrics import ConstraintCheck, FEASIBILITY_TOL
from .scenario import Scenario
from .solvers import (BoxConstraints, ConcaveProgram, FractionalObjective,
                      LinearConstraints, SmoothConstraints, dinkelbach,
                      solve_concave)
from .uav_power import propulsion_power

_LOG2E = np.log2(np.e)
_NORM_EPS = 1e-8     # m^2, smoothing of leg-length norms
_Z_EPS = 1e-12       # slack headroom so zero-length legs keep an interior


@dataclass
class HoverPlan:
    """One hover-and-fly operating plan in visiting order.

    positions has shape (K+1, 2) with positions[0] == positions[K]; leg i
    (i = 1..K) runs from positions[i-1] to positions[i]. order[i-1] is the
    BD served at hover i.
    """

    order: np.ndarray          # (K,) BD indices in visiting order
    positions: np.ndarray      # (K+1, 2) hover points, closed
    times: np.ndarray          # (K,) hover durations, s
    powers: np.ndarray         # (K,) CE power while serving hover i, W
    leg_slack: np.ndarray      # (K,) lower-bound slack on leg lengths, m
    v_max: float               # flight speed between hovers, m/s

    def legs(self) -> np.ndarray:
        """Leg lengths, shape (K,)."""
        return np.linalg.norm(np.diff(self.positions, axis=0), axis=1)

    def travel_time(self) -> float:
        return float(self.legs().sum() / self.v_max)


@dataclass
class HoverResult:
    plan: HoverPlan
    ee: float
    trace: list = field(default_factory=list)   # per-block exact EE
    status: str = "converged"


def tour_length(points, order) -> float:
    pts = np.asarray(points, float)[list(order)]
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def tsp_order(bd_positions) -> np.ndarray:
    """Short cyclic visiting order, deterministic. Small instances are
    solved exactly by enumeration; larger ones use the best
    nearest-neighbor construction over all starts refined to 2-opt
    local optimality (which alone can exceed the optimum by >5%)."""
    pts = np.asarray(bd_positions, float)
    K = pts.shape[0]
    if K <= 2:
        return np.arange(K)
    if K <= 8:
        best = min(((0,) + perm for perm in
                    itertools.permutations(range(1, K))),
                   key=lambda order: (tour_length(pts, order), order))
        return np.array(best, dtype=int)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)

    best = None
    best_len = np.inf
    for start in range(K):
        tour = [start]
        left = set(range(K)) - {start}
        while left:
            last = tour[-1]
            nxt = min(left, key=lambda j: (d[last, j], j))
            tour.append(nxt)
            left.remove(nxt)
        ln = tour_length(pts, tour)
        if ln < best_len - 1e-12:
            best_len = ln
            best = tour
    tour = best

    improved = True
    while improved:
        improved = False
        for i in range(K - 1):
            for j in range(i + 2, K):
                if i == 0 and j == K - 1:
                    continue   # reversing the whole tour changes nothing
                a, b = tour[i], tour[i + 1]
                c, e = tour[j], tour[(j + 1) % K]
                delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
                if delta < -1e-12:
                    tour[i + 1:j + 1] = reversed(tour[i + 1:j + 1])
                    improved = True
    return np.array(tour, dtype=int)


def exact_tsp_length(bd_positions) -> float:
    """Optimal cyclic tour length by enumeration (small K only)."""
    pts = np.asarray(bd_positions, float)
    K = pts.shape[0]
    if K <= 2:
        return tour_length(pts, range(K))
    best = np.inf
    for perm in itertools.permutations(range(1, K)):
        best = min(best, tour_length(pts, (0,) + perm))
    return best


def benchmark_energy(plan: HoverPlan, physics) -> tuple:
    """(UAV energy, CE energy) of a plan in joules."""
    p_tra = propulsion_power(physics, plan.v_max)
    p_hov = propulsion_power(physics, 0.0)
    legs = plan.legs()
    uav = p_tra * legs.sum() / plan.v_max + p_hov * plan.times.sum()
    ce = float((plan.powers * (plan.times + legs / plan.v_max)).sum())
    return float(uav), ce


def benchmark_bd_energy(plan: HoverPlan, scenario: Scenario, i: int) -> float:
    """Energy harvested by the BD served at hover i (1-based), joules.

    The BD harvests whenever its CE transmits except during its own hover.
    """
    k = int(plan.order[i - 1])
    m = int(scenario.association[k])
    beta = scenario.ce_bd_gain(k)
    legs = plan.legs()
    tau = plan.times + legs / plan.v_max
    same_ce = scenario.association[plan.order] == m
    total = float((plan.powers[same_ce] * tau[same_ce]).sum())
    return scenario.eta[k] * beta * (total - plan.powers[i - 1]
                                     * plan.times[i - 1])


def hover_rates(plan: HoverPlan, scenario: Scenario) -> np.ndarray:
    """Per-hover rates log2(1 + SNR) at the current plan, (K,) b/Hz/s."""
    order = plan.order
    w = scenario.bd_positions[order]
    beta = np.array([scenario.ce_bd_gain(int(k)) for k in order])
    d2 = ((plan.positions[1:] - w) ** 2).sum(axis=1)
    snr = (scenario.beta0 * beta * plan.powers
           / (scenario.noise_power * (scenario.altitude ** 2 + d2)))
    return np.log2(1.0 + snr)


def plan_ee(plan: HoverPlan, scenario: Scenario) -> float:
    thr = float((plan.times * hover_rates(plan, scenario)).sum())
    uav, ce = benchmark_energy(plan, scenario.uav)
    return thr / (uav + ce)


def audit_plan(plan: HoverPlan, scenario: Scenario,
               tol: float = FEASIBILITY_TOL) -> list:
    """Signed-slack report against the benchmark problem's constraints."""
    checks = []
    K = plan.order.size
    thr = plan.times * hover_rates(plan, scenario)
    for i in range(1, K + 1):
        k = int(plan.order[i - 1])
        checks.append(_check(f"throughput[{k}]", thr[i - 1]
                             - scenario.qbar[k], tol))
        checks.append(_check(f"harvest[{k}]",
                             benchmark_bd_energy(plan, scenario, i)
                             - scenario.ebar[k], tol))
        checks.append(_check(f"power[{i - 1}]",
                             min(plan.powers[i - 1],
                                 scenario.p_max - plan.powers[i - 1]), tol))
        checks.append(_check(f"hover_time[{i - 1}]", plan.times[i - 1], tol))
    budget = scenario.mission_time - plan.times.sum() - plan.travel_time()
    checks.append(_check("time", budget, tol))
    closure = -float(np.linalg.norm(plan.positions[0] - plan.positions[-1]))
    checks.append(_check("closure", closure, tol))
    return checks


def _check(cid, slack, tol):
    return ConstraintCheck(cid, float(slack), bool(slack >= -tol))


def initialize_plan(scenario: Scenario) -> HoverPlan:
    """Feasible starting plan: hover directly above each BD in TSP order,
    equal hover-time split, half power, repaired toward full power /
    floor-proportional times when the defaults are infeasible."""
    order = tsp_order(scenario.bd_positions)
    K = order.size
    pos = np.empty((K + 1, 2))
    pos[1:] = scenario.bd_positions[order]
    pos[0] = pos[K]
    plan = HoverPlan(order=order, positions=pos, times=np.zeros(K),
                     powers=np.full(K, scenario.p_max / 2.0),
                     leg_slack=np.zeros(K), v_max=scenario.v_max)
    travel = plan.travel_time()
    budget = scenario.mission_time - travel
    if budget <= 0:
        raise Infeasible(
            "hover-and-fly tour cannot be flown within the mission time",
            detail={"constraint": "time"})
    plan.times = np.full(K, budget / K)
    plan.leg_slack = plan.legs()
    if all(c.ok for c in audit_plan(plan, scenario)):
        return plan

    # Repair: full power, then hover times proportional to each BD's
    # minimum feasible hover duration.
    plan.powers = np.full(K, scenario.p_max)
    rates = hover_rates(plan, scenario)
    need = np.array([scenario.qbar[int(k)] for k in order])
    if np.any((rates <= 0) & (need > 0)):
        raise Infeasible("a BD with a throughput floor has zero rate",
                         detail={"constraint": "throughput"})
    with np.errstate(divide="ignore", invalid="ignore"):
        t_min = np.where(need > 0, need / np.maximum(rates, 1e-300), 0.0)
    if t_min.sum() > budget + 1e-12:
        raise Infeasible(
            "throughput floors exceed the available hover time",
            detail={"constraint": "time"})
    plan.times = t_min + (budget - t_min.sum()) / K
    checks = audit_plan(plan, scenario)
    if all(c.ok for c in checks):
        return plan
    raise Infeasible(
        "no feasible hover-and-fly initialization found",
        detail={"audit": [(c.cid, c.slack) for c in checks if not c.ok]})


def optimize_hover_fly(scenario: Scenario, seed: int = None,
                       epsilon: float = 1e-4, max_iters: int = 100):
    """Benchmark optimization; returns (HoverPlan, HoverResult).

    Fixed TSP order, BCD over (powers, times, positions) until the exact
    EE gain of a full iteration is below epsilon. The EE trace is
    nondecreasing within 1e-6. Deterministic given the scenario; `seed`
    is accepted for interface symmetry with the fly-scheme driver.
    """
    plan = initialize_plan(scenario)
    ee = plan_ee(plan, scenario)
    trace = [("init", ee)]
    status = "max_iters"
    for _ in range(max_iters):
        ee_start = ee
        for name, block in (("power", _optimize_powers),
                            ("time", _optimize_times),
                            ("position", _optimize_positions)):
            cand = block(scenario, plan)
            ee_new = plan_ee(cand, scenario)
            if ee_new < ee - 1e-6:
                raise InvariantViolation(
                    f"benchmark EE decreased in the {name} block: "
                    f"{ee} -> {ee_new}")
            if ee_new > ee:
                plan, ee = cand, ee_new
            trace.append((name, ee))
        if ee - ee_start < epsilon:
            status = "converged"
            break
    return plan, HoverResult(plan=plan, ee=ee, trace=trace, status=status)


def _plan_context(scenario, plan):
    order = plan.order
    K = order.size
    beta = np.array([scenario.ce_bd_gain(int(k)) for k in order])
    w = scenario.bd_positions[order]
    d2 = ((plan.positions[1:] - w) ** 2).sum(axis=1)
    kappa = scenario.beta0 * beta * plan.powers / scenario.noise_power
    qbar = scenario.qbar[order]
    ebar = scenario.ebar[order]
    eta = scenario.eta[order]
    return K, beta, w, d2, kappa, qbar, ebar, eta


def _harvest_matrix(scenario, plan):
    """(A_t, A_tau) with harvest_i = eta_i beta_i (A_tau[i] @ (p*tau)
    - p_i t_i) expressed as masks over hovers of the same CE."""
    same = (scenario.association[plan.order][None, :]
            == scenario.association[plan.order][:, None])
    return same


def _optimize_powers(scenario, plan):
    """Dinkelbach over the concave/linear power fractional program."""
    K, beta, w, d2, _, qbar, ebar, eta = _plan_context(scenario, plan)
    legs = plan.legs()
    tau = plan.times + legs / plan.v_max
    coef = (scenario.beta0 * beta
            / (scenario.noise_power * (scenario.altitude ** 2 + d2)))
    p_tra = propulsion_power(scenario.uav, plan.v_max)
    p_hov = propulsion_power(scenario.uav, 0.0)
    e_uav = p_tra * legs.sum() / plan.v_max + p_hov * plan.times.sum()
    t = plan.times
    same = _harvest_matrix(scenario, plan)

    def numerator(p):
        return float((t * np.log2(1.0 + coef * p)).sum())

    def denominator(p):
        return e_uav + float((p * tau).sum())

    # Feasibility at full power is necessary and sufficient.
    p_full = np.full(K, scenario.p_max)
    for i in range(K):
        if t[i] * np.log2(1.0 + coef[i] * scenario.p_max) < qbar[i] - 1e-12:
            raise Infeasible(
                f"benchmark throughput floor unreachable at hover {i}",
                detail={"constraint": f"throughput[{int(plan.order[i])}]"})
    harv_full = eta * beta * (same @ (p_full * tau) - p_full * t)
    for i in range(K):
        if harv_full[i] < ebar[i] - 1e-15:
            raise Infeasible(
                f"benchmark harvest floor unreachable at hover {i}",
                detail={"constraint": f"harvest[{int(plan.order[i])}]"})

    # The box block goes first: the domain check evaluates blocks in
    # order, and the throughput logs are only defined inside the box.
    blocks = [BoxConstraints(K, np.arange(K), lo=0.0, hi=scenario.p_max)]
    qi = np.flatnonzero(qbar > 0)
    if qi.size:
        rs = np.maximum(1.0, qbar[qi])

        def thr_values(p):
            return (qbar[qi] - t[qi] * np.log2(1.0 + coef[qi] * p[qi])) / rs

        def thr_jac(p):
            J = np.zeros((qi.size, K))
            J[np.arange(qi.size), qi] = (-t[qi] * coef[qi] / _np_log2arg(
                coef[qi], p[qi])) / rs
            return J

        def thr_hess(p, wts):
            H = np.zeros((K, K))
            H[qi, qi] = wts * t[qi] * coef[qi] ** 2 / (
                np.log(2.0) * (1.0 + coef[qi] * p[qi]) ** 2) / rs
            return H

        blocks.append(SmoothConstraints(thr_values, thr_jac, thr_hess,
                                        qi.size))
    ei = np.flatnonzero(ebar > 0)
    if ei.size:
        A = -(eta[ei, None] * beta[ei, None]
              * (same[ei] * tau[None, :]
                 - np.eye(K)[ei] * t[None, :]))
        blocks.append(LinearConstraints(A, -ebar[ei]))

    x0 = _interior_start(blocks, [np.clip(plan.powers, scenario.p_max * 1e-6,
                                          scenario.p_max * (1 - 1e-6)),
                                  p_full * (1 - 1e-9)])
    d0 = denominator(x0)
    frac = FractionalObjective(lambda p: numerator(p) / d0,
                               lambda p: denominator(p) / d0)

    def solve_parametric(lam, x_warm):
        def objective(p):
            val = (numerator(p) - lam * denominator(p)) / d0
            grad = (t * coef / (np.log(2.0) * (1.0 + coef * p))
                    - lam * tau) / d0
            hess = np.diag(-t * coef ** 2
                           / (np.log(2.0) * (1.0 + coef * p) ** 2) / d0)
            return val, grad, hess
        prog = ConcaveProgram(n=K, objective=objective, constraints=blocks,
                              x0=x_warm)
        return solve_concave(prog, tol=1e-7, start_slack=1e-5).x

    res = dinkelbach(frac, solve_parametric, x0)
    out = HoverPlan(order=plan.order, positions=plan.positions.copy(),
                    times=plan.times.copy(), powers=res.x,
                    leg_slack=plan.leg_slack.copy(), v_max=plan.v_max)
    return out


def _optimize_times(scenario, plan):
    """Dinkelbach over the linear/linear hover-time fractional program."""
    K, beta, w, d2, kappa, qbar, ebar, eta = _plan_context(scenario, plan)
    legs = plan.legs()
    rates = hover_rates(plan, scenario)
    p = plan.powers
    p_tra = propulsion_power(scenario.uav, plan.v_max)
    p_hov = propulsion_power(scenario.uav, 0.0)
    e_legs = p_tra * legs.sum() / plan.v_max \
        + float((p * legs).sum()) / plan.v_max
    same = _harvest_matrix(scenario, plan)
    budget = scenario.mission_time - legs.sum() / plan.v_max

    def numerator(t):
        return float((rates * t).sum())

    def denominator(t):
        return e_legs + float(((p_hov + p) * t).sum())

    blocks = []
    rows, rhs = [], []
    for i in np.flatnonzero(qbar > 0):
        if rates[i] <= 0:
            raise Infeasible(
                f"benchmark throughput floor unreachable at hover {i}",
                detail={"constraint": f"throughput[{int(plan.order[i])}]"})
        e = np.zeros(K)
        e[i] = -rates[i]
        rows.append(e / max(1.0, qbar[i]))
        rhs.append(-qbar[i] / max(1.0, qbar[i]))
    for i in np.flatnonzero(ebar > 0):
        # harvest_i(t) = eta*beta*(sum_j same p_j t_j - p_i t_i) + const legs
        a = -(eta[i] * beta[i] * (same[i] * p - np.eye(K)[i] * p))
        const = eta[i] * beta[i] * float((same[i] * p * legs).sum()) \
            / plan.v_max
        rows.append(a)
        rhs.append(const - ebar[i])
    e = np.ones(K)
    rows.append(e)
    rhs.append(budget)
    blocks.append(LinearConstraints(np.array(rows), np.array(rhs)))
    blocks.append(BoxConstraints(K, np.arange(K), lo=0.0))

    x0 = _interior_start(blocks, [np.maximum(plan.times, 1e-9) * (1 - 1e-9)])
    d0 = denominator(x0)
    frac = FractionalObjective(lambda t: numerator(t) / d0,
                               lambda t: denominator(t) / d0)

    def solve_parametric(lam, x_warm):
        gvec = (rates - lam * (p_hov + p)) / d0

        def objective(t):
            return ((numerator(t) - lam * denominator(t)) / d0,
                    gvec.copy(), None)
        prog = ConcaveProgram(n=K, objective=objective, constraints=blocks,
                              x0=x_warm)
        return solve_concave(prog, tol=1e-7, start_slack=1e-5).x

    res = dinkelbach(frac, solve_parametric, x0)
    return HoverPlan(order=plan.order, positions=plan.positions.copy(),
                     times=res.x, powers=plan.powers.copy(),
                     leg_slack=plan.leg_slack.copy(), v_max=plan.v_max)


def refine_positions(scenario, plan, max_rounds=20, gain_tol=1e-5) -> list:
    """SCA over hover positions with leg-length slacks; returns the list
    of accepted plans (starting plan first). The exact EE never decreases
    across accepted rounds."""
    history = [plan]
    ee_curr = plan_ee(plan, scenario)
    for _ in range(max_rounds):
        candidate = _position_round(scenario, history[-1])
        ee_new = plan_ee(candidate, scenario)
        if ee_new <= ee_curr:
            break
        gain = ee_new - ee_curr
        history.append(candidate)
        ee_curr = ee_new
        if gain < gain_tol:
            break
    return history


def _optimize_positions(scenario, plan):
    return refine_positions(scenario, plan)[-1]


def _position_round(scenario, plan):
    """One convexified position solve expanded at the current plan."""
    K, beta, w, d2e, kappa, qbar, ebar, eta = _plan_context(scenario, plan)
    t = plan.times
    p = plan.powers
    h2 = scenario.altitude ** 2
    p_tra = propulsion_power(scenario.uav, plan.v_max)
    p_hov = propulsion_power(scenario.uav, 0.0)
    e_hov = p_hov * t.sum() + float((p * t).sum())
    same = _harvest_matrix(scenario, plan)
    nv = 3 * K            # positions q(1..K), then K leg slacks
    zoff = 2 * K

    # Circular difference operator: leg i = q(i) - q(i-1), q(0) = q(K).
    D = np.zeros((2 * K, 2 * K))
    for i in range(K):
        prev = (i - 1) % K
        D[2 * i, 2 * i] += 1.0
        D[2 * i + 1, 2 * i + 1] += 1.0
        # accumulate so the K = 1 self-loop cancels to a zero leg
        D[2 * i, 2 * prev] -= 1.0
        D[2 * i + 1, 2 * prev + 1] -= 1.0

    alpha = np.log2(1.0 + kappa / (h2 + d2e))
    phi = _LOG2E * kappa / ((h2 + d2e + kappa) * (h2 + d2e))
    q_exp = plan.positions[1:]
    dq_exp = q_exp - np.roll(q_exp, 1, axis=0)   # leg i = q(i) - q(i-1)
    leg_exp = np.linalg.norm(dq_exp, axis=1)

    def bound_rates(q):
        d2 = ((q - w) ** 2).sum(axis=1)
        return alpha - phi * (d2 - d2e)

    def legs_smooth(q):
        dq = (D @ q.ravel()).reshape(K, 2)
        return np.sqrt((dq * dq).sum(axis=1) + _NORM_EPS), dq

    def numerator(x):
        q = x[:zoff].reshape(K, 2)
        return float((t * bound_rates(q)).sum())

    def denominator(x):
        q = x[:zoff].reshape(K, 2)
        s, _ = legs_smooth(q)
        return e_hov + float(((p_tra + p) * s).sum()) / plan.v_max

    def objective_factory(lam, d0):
        def objective(x):
            q = x[:zoff].reshape(K, 2)
            s, dq = legs_smooth(q)
            val = (numerator(x) - lam * denominator(x)) / d0
            grad = np.zeros(nv)
            gq = (-2.0 * t * phi)[:, None] * (q - w) / d0
            # denominator gradient through the smoothed norms
            gl = ((p_tra + p) / plan.v_max / s)[:, None] * dq
            grad[:zoff] = gq.ravel() - lam / d0 * (D.T @ gl.ravel())
            hess = np.zeros((nv, nv))
            idx = np.arange(zoff)
            hess[idx, idx] = np.repeat(-2.0 * t * phi / d0, 2)
            coef = (p_tra + p) / plan.v_max
            hleg = (coef / s)[:, None, None] * np.eye(2) \
                - (coef / s ** 3)[:, None, None] \
                * dq[:, :, None] * dq[:, None, :]
            hd = np.einsum("nij,njk->nik", hleg, D.reshape(K, 2, 2 * K))
            hess[:zoff, :zoff] -= lam / d0 * (D.T @ hd.reshape(2 * K, 2 * K))
            return val, grad, hess
        return objective

    blocks = []
    qi = np.flatnonzero(qbar > 0)
    if qi.size:
        rs = np.maximum(1.0, qbar[qi])

        def thr_values(x):
            q = x[:zoff].reshape(K, 2)
            return (qbar[qi] - t[qi] * bound_rates(q)[qi]) / rs

        def thr_jac(x):
            q = x[:zoff].reshape(K, 2)
            J = np.zeros((qi.size, nv))
            for r, i in enumerate(qi):
                J[r, 2 * i:2 * i + 2] = (2.0 * t[i] * phi[i]
                                         * (q[i] - w[i]) / rs[r])
            return J

        def thr_hess(x, wts):
            H = np.zeros((nv, nv))
            for r, i in enumerate(qi):
                sl = slice(2 * i, 2 * i + 2)
                H[sl, sl] += wts[r] * 2.0 * t[i] * phi[i] / rs[r] * np.eye(2)
            return H

        blocks.append(SmoothConstraints(thr_values, thr_jac, thr_hess,
                                        qi.size))

    ei = np.flatnonzero(ebar > 0)
    if ei.size:
        # harvest with z lower-bounding the leg lengths (conservative):
        # eta*beta*(sum_j same p_j (t_j + z_j/v) - p_i t_i) >= ebar
        A = np.zeros((ei.size, nv))
        rhs = np.zeros(ei.size)
        for r, i in enumerate(ei):
            A[r, zoff:] = -(eta[i] * beta[i] * same[i] * p) / plan.v_max
            fixed = eta[i] * beta[i] * (float((same[i] * p * t).sum())
                                        - p[i] * t[i])
            rhs[r] = fixed - ebar[i]
        blocks.append(LinearConstraints(A, rhs))

    # Mission-time budget over the smoothed leg lengths.
    budget = scenario.mission_time - t.sum()

    def time_values(x):
        q = x[:zoff].reshape(K, 2)
        s, _ = legs_smooth(q)
        return np.array([(s.sum() / plan.v_max - budget)
                         / max(1.0, scenario.mission_time)])

    def time_jac(x):
        q = x[:zoff].reshape(K, 2)
        s, dq = legs_smooth(q)
        J = np.zeros((1, nv))
        g = (dq / s[:, None]).ravel() / plan.v_max
        J[0, :zoff] = (D.T @ g) / max(1.0, scenario.mission_time)
        return J

    def time_hess(x, wts):
        q = x[:zoff].reshape(K, 2)
        s, dq = legs_smooth(q)
        h = (1.0 / s)[:, None, None] * np.eye(2) \
            - (1.0 / s ** 3)[:, None, None] * dq[:, :, None] * dq[:, None, :]
        hd = np.einsum("nij,njk->nik", h, D.reshape(K, 2, 2 * K))
        H = np.zeros((nv, nv))
        H[:zoff, :zoff] = (wts[0] / plan.v_max
                           / max(1.0, scenario.mission_time)
                           * (D.T @ hd.reshape(2 * K, 2 * K)))
        return H

    blocks.append(SmoothConstraints(time_values, time_jac, time_hess, 1))

    # Leg slack: z_i^2 <= linearized ||leg_i||^2 (underestimate, tight at
    # the expansion), so z never overstates a leg length.
    def slk_values(x):
        q = x[:zoff].reshape(K, 2)
        dq = (D @ q.ravel()).reshape(K, 2)
        z = x[zoff:]
        lin = 2.0 * (dq_exp * dq).sum(axis=1) - (dq_exp * dq_exp).sum(axis=1)
        return z * z - lin - _Z_EPS

    def slk_jac(x):
        z = x[zoff:]
        J = np.zeros((K, nv))
        J[:, :zoff] = -np.einsum("nj,njk->nk", 2.0 * dq_exp,
                                 D.reshape(K, 2, 2 * K))
        idx = np.arange(K)
        J[idx, zoff + idx] = 2.0 * z
        return J

    def slk_hess(x, wts):
        H = np.zeros((nv, nv))
        idx = np.arange(zoff, nv)
        H[idx, idx] = 2.0 * wts
        return H

    blocks.append(SmoothConstraints(slk_values, slk_jac, slk_hess, K))
    blocks.append(BoxConstraints(nv, np.arange(zoff, nv), lo=0.0))

    x0 = np.empty(nv)
    x0[:zoff] = q_exp.ravel()
    z0 = np.sqrt(np.maximum(leg_exp ** 2 - 1e-9, 0.0) + _Z_EPS / 2.0)
    x0[zoff:] = np.maximum(z0 * (1 - 1e-9), 1e-8)
    d0 = denominator(x0)
    frac = FractionalObjective(lambda x: numerator(x) / d0,
                               lambda x: denominator(x) / d0)

    def solve_parametric(lam, x_warm):
        prog = ConcaveProgram(n=nv, objective=objective_factory(lam, d0),
                              constraints=blocks, x0=x_warm)
        return solve_concave(prog, tol=1e-7, start_slack=1e-5).x

    res = dinkelbach(frac, solve_parametric, x0)
    q = res.x[:zoff].reshape(K, 2)
    positions = np.empty((K + 1, 2))
    positions[1:] = q
    positions[0] = q[K - 1]
    return HoverPlan(order=plan.order, positions=positions,
                     times=plan.times.copy(), powers=plan.powers.copy(),
                     leg_slack=res.x[zoff:].copy(), v_max=plan.v_max)


def _interior_start(blocks, candidates):
    for x in candidates:
        worst = max(float(b.values(x).max()) for b in blocks)
        if worst <= 1e-9:
            return np.asarray(x, float)
    return np.asarray(candidates[-1], float)


def _np_log2arg(coef, p):
    return np.log(2.0) * (1.0 + coef * p)
