import numpy as np
import pytest

from uavbc.metrics import (PowerProfile, Schedule, Trajectory, audit,
                           bd_harvested_energy, bd_throughput, ce_bd_gains,
                           energy_efficiency, rate_matrix, slot_rate,
                           solution_report, total_energy)
from uavbc.scenario import generate_scenario
from uavbc.uav_power import propulsion_power


@pytest.fixture(scope="module")
def setup():
    sc = generate_scenario(1)
    rng = np.random.default_rng(0)
    N = sc.num_slots
    flat = np.zeros((sc.num_bds, N))
    for n in range(N):
        k = rng.integers(0, sc.num_bds + 1)
        if k < sc.num_bds:
            flat[k, n] = 1.0
    schedule = Schedule.from_flat(sc, flat)
    power = PowerProfile(rng.uniform(0.1, sc.p_max, (sc.num_ces, N)))
    q = rng.uniform(0, 56, (N + 1, 2))
    q[-1] = q[0]
    traj = Trajectory(q)
    return sc, schedule, power, traj, flat


def test_schedule_flat_round_trip(setup):
    sc, schedule, _, _, flat = setup
    assert np.array_equal(schedule.flat(sc), flat)


def test_rate_matrix_matches_scalar_rates(setup):
    sc, _, power, traj, _ = setup
    rates = rate_matrix(sc, power, traj)
    for k in (0, sc.num_bds - 1):
        m = int(sc.association[k])
        for n in (1, sc.num_slots):
            assert rates[k, n - 1] == pytest.approx(
                slot_rate(sc, m, k, n, power, traj), rel=1e-12)


def test_throughput_summation_oracle(setup):
    sc, schedule, power, traj, flat = setup
    thr = bd_throughput(sc, schedule, power, traj)
    rates = rate_matrix(sc, power, traj)
    for k in range(sc.num_bds):
        manual = sc.slot_length * sum(
            rates[k, n] for n in range(sc.num_slots) if flat[k, n] > 0.5)
        assert thr[k] == pytest.approx(manual, rel=1e-12)


def test_harvest_summation_oracle(setup):
    sc, schedule, power, _, flat = setup
    beta = ce_bd_gains(sc)
    energy = bd_harvested_energy(sc, schedule, power)
    for k in range(sc.num_bds):
        m = int(sc.association[k])
        manual = sum(sc.slot_length * sc.eta[k] * beta[k] * power.p[m, n]
                     for n in range(sc.num_slots) if flat[k, n] < 0.5)
        assert energy[k] == pytest.approx(manual, rel=1e-12)


def test_harvest_excludes_own_transmission(setup):
    sc, schedule, power, _, flat = setup
    # granting BD 0 every slot leaves it nothing to harvest
    all_on = np.zeros_like(flat)
    all_on[0, :] = 1.0
    energy = bd_harvested_energy(sc, Schedule.from_flat(sc, all_on), power)
    assert energy[0] == 0.0


def test_total_energy_oracle(setup):
    sc, _, power, traj, _ = setup
    uav, ce = total_energy(sc, power, traj)
    speeds = traj.speeds(sc.slot_length)
    manual_uav = sc.slot_length * sum(propulsion_power(sc.uav, v)
                                      for v in speeds)
    assert uav == pytest.approx(manual_uav, rel=1e-12)
    assert ce == pytest.approx(sc.slot_length * power.p.sum(), rel=1e-12)


def test_energy_efficiency_is_ratio(setup):
    sc, schedule, power, traj, _ = setup
    ee = energy_efficiency(sc, schedule, power, traj)
    thr = bd_throughput(sc, schedule, power, traj).sum()
    uav, ce = total_energy(sc, power, traj)
    assert ee == pytest.approx(thr / (uav + ce), rel=1e-12)


def test_audit_detects_violations(setup):
    sc, schedule, power, traj, flat = setup
    checks = {c.cid: c for c in audit(sc, schedule, power, traj)}
    # TDMA: schedule two BDs in slot 0
    bad = flat.copy()
    bad[:, 0] = 0.0
    bad[0, 0] = bad[1, 0] = 1.0
    bad_checks = {c.cid: c
                  for c in audit(sc, Schedule.from_flat(sc, bad), power, traj)}
    assert not bad_checks["tdma[0]"].ok
    assert checks["tdma[0]"].ok
    # power cap violation
    over = PowerProfile(power.p.copy())
    over.p[0, 0] = sc.p_max + 1.0
    assert not {c.cid: c for c in audit(sc, schedule, over, traj)}[
        "power[0,0]"].ok
    # speed violation
    q = traj.q.copy()
    q[1] = q[0] + np.array([sc.v_max * sc.slot_length + 1.0, 0.0])
    assert not {c.cid: c for c in audit(sc, schedule, power,
                                        Trajectory(q))}["speed[0]"].ok
    # open path violates closure
    q = traj.q.copy()
    q[-1] = q[0] + np.array([1.0, 0.0])
    assert not {c.cid: c for c in audit(sc, schedule, power,
                                        Trajectory(q))}["closure"].ok


def test_binary_audit(setup):
    sc, _, power, traj, flat = setup
    frac = flat.copy()
    frac[0, 0] = 0.4
    checks = {c.cid: c
              for c in audit(sc, Schedule.from_flat(sc, frac), power, traj)}
    assert not checks["binary[0,0]"].ok


def test_solution_report_consistency(setup):
    sc, schedule, power, traj, _ = setup
    report = solution_report(sc, schedule, power, traj)
    assert report.ee == pytest.approx(
        energy_efficiency(sc, schedule, power, traj), rel=1e-12)
    assert report.feasible == all(c.ok for c in report.constraint_audit)
