"""BD scheduling subproblem: optimal binary schedule for fixed power and
trajectory.

With power and trajectory fixed, every slot rate is a constant, the EE
denominator is a positive constant, and the problem reduces to a linear
MIP over the binary indicators: maximize total weighted rate subject to
per-BD throughput floors, per-BD harvested-energy floors and per-slot
TDMA exclusivity.
"""

import numpy as np

from .errors import Infeasible
from .metrics import PowerProfile, Schedule, Trajectory, ce_bd_gains, rate_matrix
from .scenario import Scenario
from .solvers import LinearProgram, solve_mip


def scheduling_instance(scenario: Scenario, power: PowerProfile,
                        traj: Trajectory):
    """Rate and energy coefficients of the scheduling MIP.

    Returns (rates (K, N) in bits/Hz/s, energy budget rhs (K,)) where the
    harvest constraint reads sum_n P_m(n) * b[k, n] <= budget[k].
    """
    rates = rate_matrix(scenario, power, traj)
    beta = ce_bd_gains(scenario)
    pm = power.p[scenario.association]          # (K, N)
    with np.errstate(divide="ignore"):
        need = np.where(scenario.ebar > 0,
                        scenario.ebar / (scenario.slot_length * scenario.eta * beta),
                        0.0)
    budget = pm.sum(axis=1) - need
    return rates, budget


def optimize_schedule(scenario: Scenario, power: PowerProfile,
                      traj: Trajectory, warm: Schedule = None) -> Schedule:
    """Optimal Schedule for the fixed (power, trajectory) pair.

    Raises Infeasible naming the first violated aggregate bound when no
    schedule can satisfy the throughput or harvest floors.
    """
    K, N = scenario.num_bds, scenario.num_slots
    ts = scenario.slot_length
    rates, budget = scheduling_instance(scenario, power, traj)
    pm = power.p[scenario.association]

    # Capacity prechecks give actionable errors before the MIP runs.
    for k in range(K):
        if ts * rates[k].sum() < scenario.qbar[k] - 1e-12:
            raise Infeasible(
                f"throughput floor unreachable for BD {k}: even scheduling "
                f"every slot yields {ts * rates[k].sum():.6g} bits/Hz "
                f"< {scenario.qbar[k]:.6g}",
                detail={"constraint": f"throughput[{k}]"})
        if budget[k] < -1e-12:
            raise Infeasible(
                f"harvest floor unreachable for BD {k}: even an all-zero "
                f"schedule cannot meet the energy floor",
                detail={"constraint": f"harvest[{k}]"})

    # Variables: b[k, n] for pairs with positive rate; zero-rate pairs are
    # fixed to 0 (they help neither the objective nor any constraint).
    var_of = {}
    pairs = []
    for k in range(K):
        for n in range(N):
            if rates[k, n] > 0.0:
                var_of[(k, n)] = len(pairs)
                pairs.append((k, n))
    nv = len(pairs)
    if nv == 0:
        flat = np.zeros((K, N))
        if np.any(scenario.qbar > 0):
            k = int(np.argmax(scenario.qbar > 0))
            raise Infeasible(f"no positive-rate slot exists for BD {k}",
                             detail={"constraint": f"throughput[{k}]"})
        return Schedule.from_flat(scenario, flat)

    c = np.array([rates[k, n] for k, n in pairs])
    lp = LinearProgram(c=c, bounds=[(0.0, 1.0)] * nv)
    for k in range(K):
        if scenario.qbar[k] > 0:
            row = np.zeros(nv)
            for n in range(N):
                j = var_of.get((k, n))
                if j is not None:
                    row[j] = ts * rates[k, n]
            lp.add_row(row, scenario.qbar[k], ">=")
        if scenario.ebar[k] > 0:
            row = np.zeros(nv)
            for n in range(N):
                j = var_of.get((k, n))
                if j is not None:
                    row[j] = pm[k, n]
            lp.add_row(row, budget[k], "<=")
    for n in range(N):
        row = np.zeros(nv)
        active = False
        for k in range(K):
            j = var_of.get((k, n))
            if j is not None:
                row[j] = 1.0
                active = True
        if active:
            lp.add_row(row, 1.0, "<=")

    incumbent = None
    if warm is not None:
        flat = warm.flat(scenario)
        cand = np.array([flat[k, n] for k, n in pairs])
        if _warm_ok(scenario, flat, rates, pm, budget, ts):
            incumbent = cand

    res = solve_mip(lp, range(nv), incumbent=incumbent)
    flat = np.zeros((K, N))
    for j, (k, n) in enumerate(pairs):
        flat[k, n] = res.x[j]
    return Schedule.from_flat(scenario, flat)


def _warm_ok(scenario, flat, rates, pm, budget, ts):
    """Is the previous schedule feasible for the current coefficients?"""
    if np.any((flat != 0) & (flat != 1)):
        return False
    if np.any(flat.sum(axis=0) > 1):
        return False
    thr = ts * (flat * rates).sum(axis=1)
    used = (flat * pm).sum(axis=1)
    return bool(np.all(thr >= scenario.qbar - 1e-9)
                and np.all(used <= budget + 1e-9))
