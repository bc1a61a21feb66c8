import numpy as np
import pytest

from uavbc import bcd
from uavbc.metrics import (Trajectory, audit, energy_efficiency, rate_matrix,
                           slot_rate)
from uavbc.scenario import generate_scenario
from uavbc.trajectory import (induced_slack, optimize_trajectory,
                              rate_lower_bound, slack_identity_residual,
                              slack_rhs_lower_bound)
from uavbc.uav_power import UavPhysics, propulsion_power


@pytest.fixture(scope="module")
def physics():
    return UavPhysics()


def test_induced_slack_satisfies_identity(physics):
    for v in (0.0, 1.0, 5.76, 10.0, 25.0):
        y = induced_slack(physics, v)
        lhs = 1.0 / y ** 2
        rhs = y ** 2 + (v / physics.mean_induced_velocity) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_induced_slack_reproduces_induced_power(physics):
    # induced propulsion term equals P_i * y at every speed
    from uavbc.uav_power import blade_profile_power, induced_power
    for v in (0.0, 3.0, 5.76, 9.0):
        y = induced_slack(physics, v)
        pb = blade_profile_power(physics) * (1 + 3 * v ** 2
                                             / physics.tip_speed ** 2)
        parasite = (0.5 * physics.fuselage_drag_ratio * physics.air_density
                    * physics.rotor_solidity * physics.disc_area * v ** 3)
        expected = pb + induced_power(physics) * y + parasite
        assert propulsion_power(physics, v) == pytest.approx(expected,
                                                             rel=1e-12)


def test_slack_identity_residual_zero_at_exact(physics):
    ts = 0.6
    rng = np.random.default_rng(0)
    dq = rng.normal(size=(8, 2)) * 2.0
    v = np.linalg.norm(dq, axis=1) / ts
    y = np.array([induced_slack(physics, vi) for vi in v])
    res = slack_identity_residual(physics, ts, y, dq)
    assert np.max(np.abs(res)) < 1e-10


def test_rate_bound_below_exact_and_tight():
    sc = generate_scenario(0)
    rng = np.random.default_rng(5)
    k, m = 0, int(sc.association[0])
    p = 3.0
    worst_gap = 0.0
    for _ in range(1000):
        q_exp = rng.uniform(0, 56, 2)
        q = rng.uniform(0, 56, 2)
        lb = rate_lower_bound(sc, k, p, q, q_exp)
        d2 = float(((sc.bd_positions[k] - q) ** 2).sum())
        exact = float(np.log2(1.0 + sc.beta0 * sc.ce_bd_gain(k) * p
                              / (sc.noise_power
                                 * (sc.altitude ** 2 + d2))))
        assert lb <= exact + 1e-12
        tight = rate_lower_bound(sc, k, p, q_exp, q_exp)
        d2e = float(((sc.bd_positions[k] - q_exp) ** 2).sum())
        exact_e = float(np.log2(1.0 + sc.beta0 * sc.ce_bd_gain(k) * p
                                / (sc.noise_power
                                   * (sc.altitude ** 2 + d2e))))
        assert abs(tight - exact_e) < 1e-9
        worst_gap = max(worst_gap, exact - lb)
    assert worst_gap > 0  # bound is not vacuously equal everywhere


def test_slack_rhs_bound_below_exact_and_tight(physics):
    ts = 0.6
    rng = np.random.default_rng(9)
    for _ in range(1000):
        y_exp = float(rng.uniform(0.3, 1.0))
        dq_exp = rng.normal(size=2) * 2
        y = float(rng.uniform(0.3, 1.0))
        dq = rng.normal(size=2) * 2
        lb = slack_rhs_lower_bound(physics, ts, y, dq, y_exp, dq_exp)
        s2 = (physics.mean_induced_velocity * ts) ** 2
        exact = y ** 2 + float(dq @ dq) / s2
        assert lb <= exact + 1e-12
        tight = slack_rhs_lower_bound(physics, ts, y_exp, dq_exp,
                                      y_exp, dq_exp)
        exact_e = y_exp ** 2 + float(dq_exp @ dq_exp) / s2
        assert abs(tight - exact_e) < 1e-9


@pytest.fixture(scope="module")
def optimized_small():
    sc = generate_scenario(2, M=1, K=2, num_slots=12, qbar=8.0, ebar=1e-5)
    schedule, power, traj = bcd.initialize(sc)
    ee0 = energy_efficiency(sc, schedule, power, traj)
    res = optimize_trajectory(sc, schedule, power, traj)
    return sc, schedule, power, traj, ee0, res


def test_trajectory_block_improves_ee(optimized_small):
    sc, schedule, power, _, ee0, res = optimized_small
    assert res.ee >= ee0 - 1e-9
    assert res.ee == pytest.approx(
        energy_efficiency(sc, schedule, power, res.trajectory), rel=1e-12)


def test_trajectory_block_keeps_feasibility(optimized_small):
    sc, schedule, power, _, _, res = optimized_small
    checks = audit(sc, schedule, power, res.trajectory)
    assert all(c.ok for c in checks), [c.cid for c in checks if not c.ok]


def test_trajectory_stays_closed(optimized_small):
    _, _, _, _, _, res = optimized_small
    q = res.trajectory.q
    assert np.linalg.norm(q[0] - q[-1]) < 1e-9


def test_returned_slack_is_tight(optimized_small):
    sc, _, _, _, _, res = optimized_small
    dq = np.diff(res.trajectory.q, axis=0)
    residual = slack_identity_residual(sc.uav, sc.slot_length,
                                       res.slack, dq)
    assert np.max(np.abs(residual)) <= 1e-4


def test_single_bd_trajectory_approaches_it():
    # generous floors, distant initial circle: mean distance must drop
    sc = generate_scenario(6, M=1, K=1, num_slots=12, qbar=0.0, ebar=0.0)
    from uavbc.metrics import PowerProfile, Schedule
    schedule = Schedule.from_flat(sc, np.ones((1, sc.num_slots)))
    power = PowerProfile(np.full((1, sc.num_slots), sc.p_max))
    center = sc.bd_positions[0] + np.array([25.0, 0.0])
    theta = np.linspace(0, 2 * np.pi, sc.num_slots + 1)
    q = center + 3.0 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    q[-1] = q[0]
    far = Trajectory(q)
    res = optimize_trajectory(sc, schedule, power, far)
    d_before = np.linalg.norm(far.q[1:] - sc.bd_positions[0], axis=1).mean()
    d_after = np.linalg.norm(res.trajectory.q[1:] - sc.bd_positions[0],
                             axis=1).mean()
    assert d_after < d_before
