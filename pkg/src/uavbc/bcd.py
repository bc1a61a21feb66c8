"""Block-coordinate-descent driver for the communicate-while-fly scheme.

Alternates the three subproblem blocks (schedule, power, trajectory) from
a feasible initialization until the exact EE gain of a full iteration
drops below the configured threshold. The exact EE (recomputed from the
metrics module after every block) is checked to be nondecreasing at
runtime; a decrease beyond the slack is a solver bug and raises.
"""

from dataclasses import dataclass, field
import time

import numpy as np

from .errors import Infeasible, InvariantViolation
from .metrics import (PowerProfile, Schedule, Trajectory, audit, ce_bd_gains,
                      energy_efficiency, rate_matrix, solution_report)
from .power_alloc import optimize_power
from .scenario import Scenario
from .scheduling import optimize_schedule
from .trajectory import optimize_trajectory
from .uav_power import min_power_speed

MONOTONE_SLACK = 1e-6


@dataclass
class BcdConfig:
    """Stopping rule of the outer alternation."""

    epsilon: float = 1e-4       # minimum per-iteration EE gain to continue
    max_iters: int = 100
    traj_rounds: int = 20       # SCA round budget per trajectory block
    traj_gain_tol: float = 1e-5

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class BlockRecord:
    iteration: int
    block: str                  # "init" | "schedule" | "power" | "trajectory"
    ee: float
    seconds: float


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    status: str = "running"

    @property
    def ee_path(self) -> np.ndarray:
        return np.array([r.ee for r in self.records])

    @property
    def iterations(self) -> int:
        return max((r.iteration for r in self.records), default=0)


@dataclass
class Solution:
    scenario: Scenario
    schedule: Schedule
    power: PowerProfile
    trajectory: Trajectory
    trajectory_slack: np.ndarray
    ee: float

    def report(self):
        return solution_report(self.scenario, self.schedule, self.power,
                               self.trajectory)


def initial_trajectory(scenario: Scenario) -> Trajectory:
    """Closed circle at the BD centroid flown at the min-power speed.

    The circumference equals speed * mission time; the speed is clamped
    below v_max so the start point is strictly feasible.
    """
    speed = min(min_power_speed(scenario.uav), 0.95 * scenario.v_max)
    radius = speed * scenario.mission_time / (2.0 * np.pi)
    center = scenario.bd_positions.mean(axis=0)
    N = scenario.num_slots
    theta = np.linspace(0.0, 2.0 * np.pi, N + 1)
    q = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    q[-1] = q[0]
    return Trajectory(q)


def initialize(scenario: Scenario, seed: int = None,
               repair_budget: int = None):
    """Feasible starting triple (Schedule, PowerProfile, Trajectory).

    The schedule serves BDs in descending channel-gain order, giving each
    its best remaining slots until its throughput floor is met at full
    power; CE powers are full in scheduled slots and at the minimum
    uniform level meeting the harvest floors elsewhere. A repair loop
    grants extra slots / raises the idle power while the audit fails.
    """
    K, N = scenario.num_bds, scenario.num_slots
    ts = scenario.slot_length
    traj = initial_trajectory(scenario)
    p_full = PowerProfile(np.full((scenario.num_ces, N), scenario.p_max))
    rates = rate_matrix(scenario, p_full, traj)          # (K, N)
    beta = ce_bd_gains(scenario)
    if repair_budget is None:
        repair_budget = K * N

    order = np.argsort(-beta, kind="stable")
    flat = np.zeros((K, N))
    got = np.zeros(K)
    free = np.ones(N, dtype=bool)
    # Round-robin in descending gain order: each pass gives every BD that
    # is still short of its floor its best remaining slot.
    while True:
        assigned = False
        for k in order:
            if got[k] >= scenario.qbar[k] or not free.any():
                continue
            cand = np.flatnonzero(free)
            n = cand[np.argmax(rates[k, cand])]
            flat[k, n] = 1.0
            free[n] = False
            got[k] += ts * rates[k, n]
            assigned = True
        if not assigned:
            break
    if np.any(got < scenario.qbar):
        k = int(np.argmax(scenario.qbar - got))
        raise Infeasible(
            f"initialization cannot meet the throughput floor of BD {k} "
            f"even using every slot at full power",
            detail={"constraint": f"throughput[{k}]"})

    power = _initial_power(scenario, flat, beta)
    schedule = Schedule.from_flat(scenario, flat)

    for _ in range(repair_budget):
        checks = [c for c in audit(scenario, schedule, power, traj)
                  if not c.ok]
        if not checks:
            return schedule, power, traj
        cid = checks[0].cid
        if cid.startswith("throughput["):
            k = int(cid[len("throughput["):-1])
            cand = np.flatnonzero(free)
            if cand.size == 0:
                break
            n = cand[np.argmax(rates[k, cand])]
            flat[k, n] = 1.0
            free[n] = False
            power = _initial_power(scenario, flat, beta)
            schedule = Schedule.from_flat(scenario, flat)
        else:
            break
    checks = audit(scenario, schedule, power, traj)
    if all(c.ok for c in checks):
        return schedule, power, traj
    raise Infeasible(
        "no feasible initialization found within the repair budget",
        detail={"audit": [(c.cid, c.slack) for c in checks if not c.ok]})


def _initial_power(scenario, flat, beta):
    """Full power in scheduled slots; the minimum uniform level meeting
    every harvest floor in the remaining slots of each CE."""
    M, N = scenario.num_ces, scenario.num_slots
    ts = scenario.slot_length
    p = np.zeros((M, N))
    for m in range(M):
        bds = scenario.bds_of_ce(m)
        busy = flat[bds].sum(axis=0) > 0.5 if bds.size else np.zeros(N, bool)
        p[m, busy] = scenario.p_max
        level = 0.0
        for k in bds:
            if scenario.ebar[k] <= 0:
                continue
            coef = ts * scenario.eta[k] * beta[k]
            # harvest while other BDs of this CE transmit at full power
            others = busy & (flat[k] < 0.5)
            fixed = coef * scenario.p_max * others.sum()
            idle = (~busy).sum()
            if fixed >= scenario.ebar[k]:
                continue
            if idle == 0:
                level = np.inf
                break
            level = max(level,
                        (scenario.ebar[k] - fixed) / (coef * idle))
        if np.isinf(level):
            k = int(bds[0])
            raise Infeasible(
                f"initialization cannot meet a harvest floor of CE {m}: "
                f"no idle slot remains",
                detail={"constraint": f"harvest[{k}]"})
        if level > scenario.p_max + 1e-12:
            raise Infeasible(
                f"initialization cannot meet a harvest floor of CE {m} "
                f"within the power limit",
                detail={"constraint": "harvest"})
        p[m, ~busy] = min(level, scenario.p_max)
    return PowerProfile(p)


def run(scenario: Scenario, config: BcdConfig = None, seed: int = None):
    """Full BCD optimization; returns (Solution, ConvergenceTrace).

    The procedure is deterministic given the scenario; `seed` is accepted
    for interface symmetry with scenario generation.
    """
    config = config or BcdConfig()
    trace = ConvergenceTrace()

    t0 = time.perf_counter()
    schedule, power, traj = initialize(scenario, seed)
    ee = energy_efficiency(scenario, schedule, power, traj)
    trace.records.append(BlockRecord(0, "init", ee, time.perf_counter() - t0))
    slack = None

    for it in range(1, config.max_iters + 1):
        ee_start = ee

        t0 = time.perf_counter()
        cand = optimize_schedule(scenario, power, traj, warm=schedule)
        schedule, ee = _accept(scenario, (cand, power, traj),
                               (schedule, power, traj), ee, 0)
        trace.records.append(
            BlockRecord(it, "schedule", ee, time.perf_counter() - t0))

        t0 = time.perf_counter()
        cand = optimize_power(scenario, schedule, traj, p_warm=power)
        power, ee = _accept(scenario, (schedule, cand, traj),
                            (schedule, power, traj), ee, 1)
        trace.records.append(
            BlockRecord(it, "power", ee, time.perf_counter() - t0))

        t0 = time.perf_counter()
        res = optimize_trajectory(scenario, schedule, power, traj,
                                  max_rounds=config.traj_rounds,
                                  gain_tol=config.traj_gain_tol)
        traj, ee = _accept(scenario, (schedule, power, res.trajectory),
                           (schedule, power, traj), ee, 2)
        if traj is res.trajectory:
            slack = res.slack
        trace.records.append(
            BlockRecord(it, "trajectory", ee, time.perf_counter() - t0))

        if ee - ee_start < config.epsilon:
            trace.status = "converged"
            break
    else:
        trace.status = "max_iters"

    if slack is None:
        from .trajectory import induced_slack
        slack = np.array([induced_slack(scenario.uav, v)
                          for v in traj.speeds(scenario.slot_length)])
    solution = Solution(scenario=scenario, schedule=schedule, power=power,
                        trajectory=traj, trajectory_slack=slack, ee=ee)
    return solution, trace


def _accept(scenario, new_triple, old_triple, ee_old, idx):
    """Keep the block update only if the exact EE does not decrease;
    a decrease beyond the slack is a broken-solver invariant."""
    ee_new = energy_efficiency(scenario, *new_triple)
    if ee_new < ee_old - MONOTONE_SLACK:
        raise InvariantViolation(
            f"EE decreased across a block update: {ee_old} -> {ee_new}")
    if ee_new < ee_old:
        return old_triple[idx], ee_old
    return new_triple[idx], ee_new
