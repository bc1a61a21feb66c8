"""Evaluation of candidate solutions: throughput, energy, EE and audits.

All functions here are pure evaluations of the discrete-time problem
quantities for a (Schedule, PowerProfile, Trajectory) triple; they are the
single source of truth that the optimizer blocks and the tests share.
"""

from dataclasses import dataclass, field

import numpy as np

from .scenario import Scenario, channel_gain_ce_bd
from .uav_power import propulsion_power

FEASIBILITY_TOL = 1e-6


@dataclass
class Schedule:
    """Binary scheduling tensor of shape (M, K_bar, N).

    Entry (m, j, n) refers to the j-th BD of CE m (ordered by flat BD
    index); entries for non-existent (m, j) pairs stay 0. At most one BD
    transmits per slot.
    """

    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)

    @classmethod
    def from_flat(cls, scenario: Scenario, flat: np.ndarray) -> "Schedule":
        """Build from a (K, N) per-BD indicator matrix."""
        flat = np.asarray(flat, dtype=float)
        b = np.zeros((scenario.num_ces, scenario.max_group_size,
                      scenario.num_slots))
        for m in range(scenario.num_ces):
            for j, k in enumerate(scenario.bds_of_ce(m)):
                b[m, j, :] = flat[k]
        return cls(b)

    def flat(self, scenario: Scenario) -> np.ndarray:
        """Per-BD (K, N) view of the tensor."""
        out = np.zeros((scenario.num_bds, scenario.num_slots))
        for m in range(scenario.num_ces):
            for j, k in enumerate(scenario.bds_of_ce(m)):
                out[k] = self.b[m, j, :]
        return out


@dataclass
class PowerProfile:
    """Per-CE per-slot transmit power, shape (M, N), watts."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)


@dataclass
class Trajectory:
    """UAV waypoints, shape (N+1, 2), meters; q[0] is the start point."""

    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)

    def speeds(self, slot_length: float) -> np.ndarray:
        """Implied per-slot speeds, shape (N,)."""
        return np.linalg.norm(np.diff(self.q, axis=0), axis=1) / slot_length


@dataclass
class ConstraintCheck:
    cid: str
    slack: float
    ok: bool


@dataclass
class SolutionReport:
    ee: float
    per_bd_throughput: np.ndarray
    per_bd_energy: np.ndarray
    uav_energy: float
    ce_energy: float
    constraint_audit: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return all(c.ok for c in self.constraint_audit)


def ce_bd_gains(scenario: Scenario) -> np.ndarray:
    """Per-BD pathloss gain to the associated CE, shape (K,)."""
    return np.array([
        channel_gain_ce_bd(scenario, int(scenario.association[k]), k)
        for k in range(scenario.num_bds)
    ])


def rate_matrix(scenario: Scenario, power: PowerProfile,
                traj: Trajectory) -> np.ndarray:
    """Per-BD per-slot rates log2(1 + SNR), shape (K, N), bits/Hz/s.

    Slot n uses the waypoint q(n) (1-based slot index maps to q[n]).
    """
    beta = ce_bd_gains(scenario)                         # (K,)
    q = traj.q[1:]                                       # (N, 2)
    d2 = ((scenario.bd_positions[:, None, :] - q[None, :, :]) ** 2).sum(axis=2)
    pm = power.p[scenario.association]                   # (K, N)
    snr = (scenario.beta0 * beta[:, None] * pm
           / (scenario.noise_power * (scenario.altitude ** 2 + d2)))
    return np.log2(1.0 + snr)


def slot_rate(scenario: Scenario, m: int, k: int, n: int,
              power: PowerProfile, traj: Trajectory) -> float:
    """Rate of BD k (served by CE m) in slot n (1-based), bits/Hz/s."""
    beta = channel_gain_ce_bd(scenario, m, k)
    d2 = float(((scenario.bd_positions[k] - traj.q[n]) ** 2).sum())
    snr = (scenario.beta0 * beta * power.p[m, n - 1]
           / (scenario.noise_power * (scenario.altitude ** 2 + d2)))
    return float(np.log2(1.0 + snr))


def bd_throughput(scenario: Scenario, schedule: Schedule,
                  power: PowerProfile, traj: Trajectory) -> np.ndarray:
    """Per-BD throughput over the mission, shape (K,), bits/Hz."""
    flat = schedule.flat(scenario)
    rates = rate_matrix(scenario, power, traj)
    return scenario.slot_length * (flat * rates).sum(axis=1)


def bd_harvested_energy(scenario: Scenario, schedule: Schedule,
                        power: PowerProfile) -> np.ndarray:
    """Per-BD harvested energy, shape (K,), joules."""
    flat = schedule.flat(scenario)
    beta = ce_bd_gains(scenario)
    pm = power.p[scenario.association]                   # (K, N)
    return (scenario.slot_length * scenario.eta * beta
            * (pm * (1.0 - flat)).sum(axis=1))


def total_energy(scenario: Scenario, power: PowerProfile,
                 traj: Trajectory) -> tuple:
    """(UAV propulsion energy, CE transmission energy) in joules."""
    speeds = traj.speeds(scenario.slot_length)
    uav = scenario.slot_length * sum(
        propulsion_power(scenario.uav, v) for v in speeds)
    ce = scenario.slot_length * power.p.sum()
    return float(uav), float(ce)


def energy_efficiency(scenario: Scenario, schedule: Schedule,
                      power: PowerProfile, traj: Trajectory) -> float:
    """Network EE: total throughput / total consumed energy, bits/Hz/J."""
    total = bd_throughput(scenario, schedule, power, traj).sum()
    uav, ce = total_energy(scenario, power, traj)
    return float(total / (uav + ce))


def audit(scenario: Scenario, schedule: Schedule, power: PowerProfile,
          traj: Trajectory, tol: float = FEASIBILITY_TOL) -> list:
    """Signed-slack report for every constraint instance.

    A constraint is satisfied iff its slack >= -tol. Identifiers are
    semantic: throughput[k], harvest[k], tdma[n], binary[k,n],
    power[m,n], speed[n], closure.
    """
    checks = []
    flat = schedule.flat(scenario)
    thr = bd_throughput(scenario, schedule, power, traj)
    energy = bd_harvested_energy(scenario, schedule, power)
    for k in range(scenario.num_bds):
        checks.append(_check(f"throughput[{k}]", thr[k] - scenario.qbar[k], tol))
        checks.append(_check(f"harvest[{k}]", energy[k] - scenario.ebar[k], tol))
    per_slot = flat.sum(axis=0)
    for n in range(scenario.num_slots):
        checks.append(_check(f"tdma[{n}]", 1.0 - per_slot[n], tol))
    dist = np.minimum(np.abs(flat), np.abs(flat - 1.0))
    for k in range(scenario.num_bds):
        for n in range(scenario.num_slots):
            checks.append(_check(f"binary[{k},{n}]", -dist[k, n], tol))
    for m in range(scenario.num_ces):
        for n in range(scenario.num_slots):
            slack = min(power.p[m, n], scenario.p_max - power.p[m, n])
            checks.append(_check(f"power[{m},{n}]", slack, tol))
    step = np.linalg.norm(np.diff(traj.q, axis=0), axis=1)
    vcap = scenario.v_max * scenario.slot_length
    for n in range(scenario.num_slots):
        checks.append(_check(f"speed[{n}]", vcap - step[n], tol))
    closure = -float(np.linalg.norm(traj.q[0] - traj.q[-1]))
    checks.append(_check("closure", closure, tol))
    return checks


def _check(cid, slack, tol):
    return ConstraintCheck(cid, float(slack), bool(slack >= -tol))


def solution_report(scenario: Scenario, schedule: Schedule,
                    power: PowerProfile, traj: Trajectory,
                    tol: float = FEASIBILITY_TOL) -> SolutionReport:
    thr = bd_throughput(scenario, schedule, power, traj)
    energy = bd_harvested_energy(scenario, schedule, power)
    uav, ce = total_energy(scenario, power, traj)
    return SolutionReport(
        ee=float(thr.sum() / (uav + ce)),
        per_bd_throughput=thr,
        per_bd_energy=energy,
        uav_energy=uav,
        ce_energy=ce,
        constraint_audit=audit(scenario, schedule, power, traj, tol),
    )
