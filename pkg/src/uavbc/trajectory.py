"""UAV trajectory subproblem: EE-optimal waypoints for a fixed schedule
and power profile.

The slot rates are non-concave in the waypoints and the propulsion power
is non-convex in the speed, so the block is solved by successive convex
approximation (SCA): each round replaces the rates with concave quadratic
lower bounds, the induced propulsion power with a slack variable whose
defining identity is linearized into a convex constraint, and the parasite
power with a smoothed convex cube of the step length. Every surrogate is
tight at the expansion point and conservative elsewhere, so the exact EE
is nondecreasing across rounds. Each convexified fractional program is
solved by Dinkelbach iterations over the interior-point solver.

Decision variables of one convex solve (N slots): the shared start/end
waypoint q0, the intermediate waypoints q(1..N-1), and one induced-power
slack per slot; the trajectory closure constraint is built into the
variable layout.
"""

from dataclasses import dataclass

import numpy as np

from .metrics import (PowerProfile, Schedule, Trajectory, ce_bd_gains,
                      energy_efficiency)
from .scenario import Scenario
from .solvers import (BoxConstraints, ConcaveProgram, FractionalObjective,
                      SmoothConstraints, dinkelbach, solve_concave)
from .uav_power import blade_profile_power, induced_power

_LOG2E = np.log2(np.e)
_CUBE_EPS = 1e-8      # m^2, smoothing of the parasite-power cube at V=0
_Y_FLOOR = 1e-3       # induced-power slack lower bound
_Y_NUDGE = 1e-6       # interiority margin added to the exact slack


@dataclass
class TrajectoryResult:
    """Accepted trajectory plus the solver's induced-power slacks."""

    trajectory: Trajectory
    slack: np.ndarray     # (N,) accepted per-slot induced-power slacks
    rounds: int           # SCA rounds that improved the exact EE
    ee: float


def induced_slack(physics, speed: float) -> float:
    """Exact induced-power slack: y with y^2 = sqrt(1+V^4/4v0^4) - V^2/2v0^2.

    The induced propulsion power at speed V equals P_i * y.
    """
    r = (speed / physics.mean_induced_velocity) ** 2 / 2.0
    return float(np.sqrt(np.sqrt(1.0 + r * r) - r))


def slack_identity_residual(physics, slot_length: float, y, dq) -> np.ndarray:
    """Residual of the slack identity 1/y^2 = y^2 + V^2/v0^2 (zero when the
    slack is tight for the implied speeds)."""
    y = np.asarray(y, float)
    dq = np.atleast_2d(np.asarray(dq, float))
    v2 = (dq * dq).sum(axis=1) / slot_length ** 2
    return 1.0 / (y * y) - y * y - v2 / physics.mean_induced_velocity ** 2


def rate_lower_bound(scenario: Scenario, k: int, power_watts: float,
                     q, q_exp) -> float:
    """Concave quadratic lower bound on the slot rate of BD k when the UAV
    is at q, expanded at q_exp; tight at q = q_exp."""
    alpha, phi, d2_exp = _rate_bound_coeffs(scenario, k, power_watts, q_exp)
    d2 = float(((scenario.bd_positions[k] - np.asarray(q, float)) ** 2).sum())
    return alpha - phi * (d2 - d2_exp)


def slack_rhs_lower_bound(physics, slot_length: float, y, dq,
                          y_exp, dq_exp) -> float:
    """Affine lower bound on y^2 + ||dq||^2/(v0*Ts)^2, the right-hand side
    of the induced-power slack identity; tight at (y_exp, dq_exp)."""
    dq = np.asarray(dq, float)
    dq_exp = np.asarray(dq_exp, float)
    s2 = (physics.mean_induced_velocity * slot_length) ** 2
    return (y_exp * y_exp + 2.0 * y_exp * (y - y_exp)
            + (2.0 * float(dq_exp @ dq) - float(dq_exp @ dq_exp)) / s2)


def _rate_bound_coeffs(scenario, k, power_watts, q_exp):
    """(alpha, phi, d2_exp) of the rate bound alpha - phi*(d2 - d2_exp)."""
    beta = scenario.ce_bd_gain(k)
    c3 = scenario.beta0 * beta * power_watts / scenario.noise_power
    h2 = scenario.altitude ** 2
    d2_exp = float(((scenario.bd_positions[k] - np.asarray(q_exp, float)) ** 2)
                   .sum())
    alpha = float(np.log2(1.0 + c3 / (h2 + d2_exp)))
    phi = _LOG2E * c3 / ((h2 + d2_exp + c3) * (h2 + d2_exp))
    return alpha, phi, d2_exp


def optimize_trajectory(scenario: Scenario, schedule: Schedule,
                        power: PowerProfile, traj: Trajectory,
                        max_rounds: int = 20,
                        gain_tol: float = 1e-5) -> TrajectoryResult:
    """EE-maximizing trajectory for the fixed (schedule, power) pair.

    Runs SCA rounds from the supplied trajectory; the exact EE of the
    returned trajectory is never below that of the input.
    """
    phys = scenario.uav
    ts = scenario.slot_length
    current = traj
    ee_curr = energy_efficiency(scenario, schedule, power, current)
    rounds = 0
    for _ in range(max_rounds):
        candidate, _ = _sca_round(scenario, schedule, power, current)
        ee_new = energy_efficiency(scenario, schedule, power, candidate)
        if ee_new <= ee_curr:
            break
        gain = ee_new - ee_curr
        current, ee_curr = candidate, ee_new
        rounds += 1
        if gain < gain_tol:
            break
    # The accepted slack is the tight closed form at the accepted speeds:
    # the solver's slack carries the SCA linearization margin, which only
    # vanishes at full convergence, while the energy model is evaluated at
    # the tight value.
    y = np.array([induced_slack(phys, v) for v in current.speeds(ts)])
    return TrajectoryResult(trajectory=current, slack=y, rounds=rounds,
                            ee=ee_curr)


def _sca_round(scenario: Scenario, schedule: Schedule, power: PowerProfile,
               traj: Trajectory):
    """One convexified fractional solve expanded at `traj`; returns the
    candidate trajectory and its slack vector."""
    N = scenario.num_slots
    ts = scenario.slot_length
    phys = scenario.uav
    nv = 3 * N            # q0 + q(1..N-1) waypoints, then N slacks
    yoff = 2 * N

    # Variable layout: x[0:2] = q0, x[2n:2n+2] = q(n) for n = 1..N-1,
    # x[yoff + n - 1] = slack of slot n. Slot n's step is q(n) - q(n-1)
    # with q(N) = q0. D maps flat positions to flat steps.
    D = np.zeros((2 * N, 2 * N))
    for n0 in range(N):
        to = 2 * ((n0 + 1) % N)
        D[2 * n0, to] += 1.0
        D[2 * n0 + 1, to + 1] += 1.0
        # accumulate so an N = 1 self-loop cancels to a zero step
        D[2 * n0, 2 * n0] -= 1.0
        D[2 * n0 + 1, 2 * n0 + 1] -= 1.0

    q_exp = traj.q
    dq_exp = np.diff(q_exp, axis=0)                  # (N, 2)
    v_exp = np.linalg.norm(dq_exp, axis=1) / ts
    y_exp = np.array([induced_slack(phys, v) for v in v_exp])

    flat = schedule.flat(scenario)
    pm = power.p[scenario.association]               # (K, N)
    # Scheduled pairs and their bound coefficients at the expansion point.
    ks, rows, alphas, phis, d2es = [], [], [], [], []
    for k in range(scenario.num_bds):
        for n0 in np.flatnonzero(flat[k] > 0.5):
            p_kn = pm[k, n0]
            if p_kn <= 0:
                continue
            a, phi, d2e = _rate_bound_coeffs(scenario, k, p_kn, q_exp[n0 + 1])
            ks.append(int(k))
            rows.append((int(n0) + 1) % N)           # waypoint index of slot
            alphas.append(a)
            phis.append(phi)
            d2es.append(d2e)
    ks = np.array(ks, dtype=int)
    rows = np.array(rows, dtype=int)
    alphas = np.array(alphas)
    phis = np.array(phis)
    d2es = np.array(d2es)
    wpos = scenario.bd_positions[ks] if ks.size else np.zeros((0, 2))

    # Energy model coefficients (per-slot energy as a function of the step
    # vector dq and slack y): blade term cb*||dq||^2, induced ci*y,
    # parasite cp*(||dq||^2 + eps)^(3/2), plus the constant hover part.
    pb = blade_profile_power(phys)
    pi = induced_power(phys)
    cb = 3.0 * pb / (phys.tip_speed ** 2 * ts)
    ci = ts * pi
    cp = (0.5 * phys.fuselage_drag_ratio * phys.air_density
          * phys.rotor_solidity * phys.disc_area / ts ** 2)
    const_energy = N * ts * pb + ts * float(power.p.sum())
    v0ts2 = (phys.mean_induced_velocity * ts) ** 2

    def steps_of(x):
        return (D @ x[:yoff]).reshape(N, 2)

    def bound_rates(q):
        """Per-scheduled-pair bound rates at waypoints q (N, 2)."""
        d2 = ((wpos - q[rows]) ** 2).sum(axis=1)
        return alphas - phis * (d2 - d2es)

    def denominator(x):
        dq = steps_of(x)
        n2 = (dq * dq).sum(axis=1)
        y = x[yoff:]
        return (const_energy + cb * n2.sum() + ci * y.sum()
                + cp * ((n2 + _CUBE_EPS) ** 1.5).sum())

    def numerator(x):
        if not ks.size:
            return 0.0
        q = x[:yoff].reshape(N, 2)
        return ts * float(bound_rates(q).sum())

    def den_grad_hess(x):
        dq = steps_of(x)
        n2 = (dq * dq).sum(axis=1)
        root = np.sqrt(n2 + _CUBE_EPS)
        g = (2.0 * cb + 3.0 * cp * root)[:, None] * dq          # (N, 2)
        grad = np.zeros(nv)
        grad[:yoff] = D.T @ g.ravel()
        grad[yoff:] = ci
        # Per-step 2x2 Hessian blocks, congruence-transformed through D.
        coef = 2.0 * cb + 3.0 * cp * root
        h = coef[:, None, None] * np.eye(2) \
            + (3.0 * cp / root)[:, None, None] * dq[:, :, None] * dq[:, None, :]
        hd = np.einsum("nij,njk->nik", h, D.reshape(N, 2, 2 * N))
        hess = np.zeros((nv, nv))
        hess[:yoff, :yoff] = D.T @ hd.reshape(2 * N, 2 * N)
        return grad, hess

    def objective_factory(lam, d0):
        # Per-waypoint curvature of the rate bounds is constant.
        curv = np.zeros(N)
        np.add.at(curv, rows, 2.0 * ts * phis)

        def objective(x):
            val = (numerator(x) - lam * denominator(x)) / d0
            dgrad, dhess = den_grad_hess(x)
            grad = -lam / d0 * dgrad
            hess = -lam / d0 * dhess
            q = x[:yoff].reshape(N, 2)
            gq = np.zeros((N, 2))
            np.add.at(gq, rows,
                      (-2.0 * ts * phis)[:, None] * (q[rows] - wpos))
            grad[:yoff] += gq.ravel() / d0
            idx = np.arange(yoff)
            hess[idx, idx] -= np.repeat(curv, 2) / d0
            return val, grad, hess
        return objective

    blocks, x0 = _constraint_blocks(scenario, ks, rows, phis, wpos, D, yoff,
                                    nv, q_exp, dq_exp, y_exp, v0ts2, ts,
                                    bound_rates)

    d0 = denominator(x0)
    frac = FractionalObjective(lambda x: numerator(x) / d0,
                               lambda x: denominator(x) / d0)

    def solve_parametric(lam, x_warm):
        prog = ConcaveProgram(n=nv, objective=objective_factory(lam, d0),
                              constraints=blocks, x0=x_warm)
        return solve_concave(prog, tol=1e-7, start_slack=1e-5).x

    res = dinkelbach(frac, solve_parametric, x0)
    q = np.empty((N + 1, 2))
    q[:N] = res.x[:yoff].reshape(N, 2)
    q[N] = q[0]
    return Trajectory(q), res.x[yoff:].copy()


def _constraint_blocks(scenario, ks, rows, phis, wpos, D, yoff, nv, q_exp,
                       dq_exp, y_exp, v0ts2, ts, bound_rates):
    """Constraint blocks of one SCA solve plus the strictly feasible start
    point (the expansion trajectory with gently lifted slacks)."""
    N = scenario.num_slots
    vcap2 = (scenario.v_max * ts) ** 2
    D3 = D.reshape(N, 2, 2 * N)
    blocks = []

    # Throughput floors over the bound rates (one row per constrained BD).
    kset = sorted(set(int(k) for k in ks) & set(
        np.flatnonzero(scenario.qbar > 0).tolist()))
    if kset:
        row_of = {k: i for i, k in enumerate(kset)}
        sel = np.array([row_of.get(int(k), -1) for k in ks])
        mask = sel >= 0
        rscale = np.maximum(1.0, scenario.qbar[kset])

        def thr_values(x):
            q = x[:yoff].reshape(N, 2)
            r = bound_rates(q)
            g = scenario.qbar[kset].astype(float).copy()
            np.add.at(g, sel[mask], -ts * r[mask])
            return g / rscale

        def thr_jac(x):
            q = x[:yoff].reshape(N, 2)
            J = np.zeros((len(kset), nv))
            diff = q[rows] - wpos                      # (S, 2)
            for s in np.flatnonzero(mask):
                sl = slice(2 * rows[s], 2 * rows[s] + 2)
                J[sel[s], sl] += 2.0 * ts * phis[s] * diff[s]
            return J / rscale[:, None]

        def thr_hess(x, wts):
            add = np.zeros(N)
            for s in np.flatnonzero(mask):
                add[rows[s]] += (wts[sel[s]] / rscale[sel[s]]
                                 * 2.0 * ts * phis[s])
            H = np.zeros((nv, nv))
            idx = np.arange(yoff)
            H[idx, idx] = np.repeat(add, 2)
            return H

        blocks.append(SmoothConstraints(thr_values, thr_jac, thr_hess,
                                        len(kset)))

    # Per-slot speed caps: ||q(n) - q(n-1)||^2 <= (v_max*Ts)^2.
    def spd_values(x):
        dq = (D @ x[:yoff]).reshape(N, 2)
        return ((dq * dq).sum(axis=1) - vcap2) / vcap2

    def spd_jac(x):
        dq = (D @ x[:yoff]).reshape(N, 2)
        J = np.zeros((N, nv))
        J[:, :yoff] = np.einsum("nj,njk->nk", 2.0 * dq / vcap2, D3)
        return J

    def spd_hess(x, wts):
        wrep = np.repeat(wts * 2.0 / vcap2, 2)
        H = np.zeros((nv, nv))
        H[:yoff, :yoff] = D.T @ (D * wrep[:, None])
        return H

    blocks.append(SmoothConstraints(spd_values, spd_jac, spd_hess, N))

    # Linearized slack identity: 1/y^2 <= (affine lower bound of
    # y^2 + V^2/v0^2); convex in (y, dq).
    J_slk_q = -np.einsum("nj,njk->nk", 2.0 * dq_exp / v0ts2, D3)  # constant

    def slk_values(x):
        dq = (D @ x[:yoff]).reshape(N, 2)
        y = x[yoff:]
        rhs = (y_exp * y_exp + 2.0 * y_exp * (y - y_exp)
               + (2.0 * (dq_exp * dq).sum(axis=1)
                  - (dq_exp * dq_exp).sum(axis=1)) / v0ts2)
        return 1.0 / (y * y) - rhs

    def slk_jac(x):
        y = x[yoff:]
        J = np.zeros((N, nv))
        J[:, :yoff] = J_slk_q
        idx = np.arange(N)
        J[idx, yoff + idx] = -2.0 / y ** 3 - 2.0 * y_exp
        return J

    def slk_hess(x, wts):
        y = x[yoff:]
        H = np.zeros((nv, nv))
        idx = np.arange(yoff, nv)
        H[idx, idx] = wts * 6.0 / y ** 4
        return H

    blocks.append(SmoothConstraints(slk_values, slk_jac, slk_hess, N))

    blocks.append(BoxConstraints(nv, np.arange(yoff, nv), lo=_Y_FLOOR))

    x0 = np.empty(nv)
    x0[:yoff] = q_exp[:N].ravel()
    x0[yoff:] = y_exp + _Y_NUDGE
    return blocks, x0
