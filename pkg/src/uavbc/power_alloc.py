"""CE power subproblem: EE-optimal transmit powers for a fixed schedule
and trajectory.

With the schedule and trajectory fixed the EE numerator is concave in the
power vector and the denominator is affine, so the fractional program is
solved exactly by Dinkelbach iterations over an interior-point solve of
each concave parametric problem.
"""

import numpy as np

from .errors import Infeasible
from .metrics import (PowerProfile, Schedule, Trajectory, ce_bd_gains,
                      total_energy)
from .scenario import Scenario
from .solvers import (BoxConstraints, ConcaveProgram, FractionalObjective,
                      LinearConstraints, SmoothConstraints, dinkelbach,
                      solve_concave)

_LN2 = np.log(2.0)


def snr_per_watt(scenario: Scenario, traj: Trajectory) -> np.ndarray:
    """Per-BD per-slot SNR per transmitted watt, shape (K, N)."""
    beta = ce_bd_gains(scenario)
    q = traj.q[1:]
    d2 = ((scenario.bd_positions[:, None, :] - q[None, :, :]) ** 2).sum(axis=2)
    return (scenario.beta0 * beta[:, None]
            / (scenario.noise_power * (scenario.altitude ** 2 + d2)))


def optimize_power(scenario: Scenario, schedule: Schedule, traj: Trajectory,
                   p_warm: PowerProfile = None) -> PowerProfile:
    """EE-maximizing PowerProfile for the fixed (schedule, trajectory).

    Variables are the M*N per-CE per-slot powers (row-major flat index
    m*N + n). Raises Infeasible when even full power cannot meet a
    throughput or harvest floor under the given schedule.
    """
    M, K, N = scenario.num_ces, scenario.num_bds, scenario.num_slots
    ts = scenario.slot_length
    nv = M * N
    flat = schedule.flat(scenario)
    gain = snr_per_watt(scenario, traj)
    beta = ce_bd_gains(scenario)
    uav_energy, _ = total_energy(scenario, PowerProfile(np.zeros((M, N))), traj)

    # Scheduled (BD, slot) pairs mapped to their power variable index.
    sched_var = []       # variable index per scheduled pair
    sched_coef = []      # SNR-per-watt per scheduled pair
    sched_bd = []        # owning BD per scheduled pair
    for k in range(K):
        m = int(scenario.association[k])
        for n in np.flatnonzero(flat[k] > 0.5):
            sched_var.append(m * N + int(n))
            sched_coef.append(gain[k, n])
            sched_bd.append(k)
    sched_var = np.array(sched_var, dtype=int)
    sched_coef = np.array(sched_coef)
    sched_bd = np.array(sched_bd, dtype=int)

    # Feasibility at full power is necessary and sufficient for the block
    # (throughput and harvest are both nondecreasing in every power).
    thr_cap = np.zeros(K)
    if sched_var.size:
        full = ts * np.log2(1.0 + sched_coef * scenario.p_max)
        np.add.at(thr_cap, sched_bd, full)
    harv_cap = (ts * scenario.eta * beta
                * scenario.p_max * (1.0 - flat).sum(axis=1))
    for k in range(K):
        if thr_cap[k] < scenario.qbar[k] - 1e-12:
            raise Infeasible(
                f"throughput floor unreachable for BD {k} at full power "
                f"under the given schedule",
                detail={"constraint": f"throughput[{k}]"})
        if harv_cap[k] < scenario.ebar[k] - 1e-15:
            raise Infeasible(
                f"harvest floor unreachable for BD {k} at full power "
                f"under the given schedule",
                detail={"constraint": f"harvest[{k}]"})

    def throughput_terms(x):
        p = x[sched_var]
        return ts * np.log2(1.0 + sched_coef * p)

    def numerator(x):
        return float(throughput_terms(x).sum()) if sched_var.size else 0.0

    def denominator(x):
        return uav_energy + ts * float(x.sum())

    # The box block goes first: the barrier domain check walks blocks in
    # order, and the throughput logs are only defined inside the box.
    blocks = [BoxConstraints(nv, np.arange(nv), lo=0.0, hi=scenario.p_max)]
    qb_bds = np.flatnonzero(scenario.qbar > 0)
    if qb_bds.size:
        for k in qb_bds:
            if not np.any(sched_bd == k):
                raise Infeasible(
                    f"BD {k} has a positive throughput floor but no "
                    f"scheduled slot",
                    detail={"constraint": f"throughput[{k}]"})
        row_of = {int(k): i for i, k in enumerate(qb_bds)}
        # Per-row normalization keeps this block on the same O(1) scale
        # as the other constraint blocks.
        rscale = np.maximum(1.0, scenario.qbar[qb_bds])

        def thr_values(x):
            g = scenario.qbar[qb_bds].astype(float).copy()
            terms = throughput_terms(x)
            for t, k in zip(terms, sched_bd):
                if k in row_of:
                    g[row_of[k]] -= t
            return g / rscale

        def thr_jac(x):
            J = np.zeros((qb_bds.size, nv))
            p = x[sched_var]
            d = ts / _LN2 * sched_coef / (1.0 + sched_coef * p)
            for dj, j, k in zip(d, sched_var, sched_bd):
                if k in row_of:
                    J[row_of[k], j] -= dj
            return J / rscale[:, None]

        def thr_hess(x, w):
            H = np.zeros(nv)
            p = x[sched_var]
            d2 = ts / _LN2 * sched_coef ** 2 / (1.0 + sched_coef * p) ** 2
            for d2j, j, k in zip(d2, sched_var, sched_bd):
                if k in row_of:
                    H[j] += w[row_of[k]] / rscale[row_of[k]] * d2j
            return np.diag(H)

        blocks.append(SmoothConstraints(thr_values, thr_jac, thr_hess,
                                        qb_bds.size))

    eb_bds = np.flatnonzero(scenario.ebar > 0)
    if eb_bds.size:
        A = np.zeros((eb_bds.size, nv))
        for i, k in enumerate(eb_bds):
            m = int(scenario.association[k])
            A[i, m * N:(m + 1) * N] = -ts * scenario.eta[k] * beta[k] \
                * (1.0 - flat[k])
        blocks.append(LinearConstraints(A, -scenario.ebar[eb_bds]))

    x0 = _start_point(scenario, blocks, p_warm, nv)

    # Normalizing both ratio terms by the start-point denominator leaves
    # the ratio unchanged but keeps the parametric objective O(1), which
    # the barrier solver needs for well-scaled Newton steps.
    d0 = denominator(x0)
    frac = FractionalObjective(lambda x: numerator(x) / d0,
                               lambda x: denominator(x) / d0)

    def solve_parametric(lam, x_warm):
        def objective(x):
            p = x[sched_var]
            val = (numerator(x) - lam * denominator(x)) / d0
            grad = np.full(nv, -lam * ts / d0)
            hdiag = np.zeros(nv)
            if sched_var.size:
                grad[sched_var] += ts / _LN2 / d0 * sched_coef \
                    / (1.0 + sched_coef * p)
                hdiag[sched_var] -= ts / _LN2 / d0 * sched_coef ** 2 \
                    / (1.0 + sched_coef * p) ** 2
            return val, grad, np.diag(hdiag)

        prog = ConcaveProgram(n=nv, objective=objective, constraints=blocks,
                              x0=x_warm)
        return solve_concave(prog, tol=1e-7, start_slack=1e-5).x

    res = dinkelbach(frac, solve_parametric, x0)
    return PowerProfile(res.x.reshape(M, N))


def _start_point(scenario, blocks, p_warm, nv):
    """A (near-)strictly-feasible start: the warm point pulled inside the
    box when it qualifies, otherwise near-full power (which maximizes the
    slack of every floor constraint)."""
    eps = scenario.p_max * 1e-6
    candidates = []
    if p_warm is not None:
        candidates.append(np.clip(p_warm.p.ravel(), eps,
                                  scenario.p_max - eps))
    candidates.append(np.full(nv, scenario.p_max * (1.0 - 1e-9)))
    for x in candidates:
        worst = max(float(b.values(x).max()) for b in blocks)
        if worst <= 1e-9:
            return x
    return candidates[-1]   # barrier start-shift absorbs boundary ties
