import itertools

import numpy as np
import pytest

from uavbc.errors import Infeasible
from uavbc.metrics import (PowerProfile, Schedule, Trajectory,
                           bd_harvested_energy, bd_throughput, rate_matrix)
from uavbc.scenario import generate_scenario
from uavbc.scheduling import optimize_schedule, scheduling_instance


def random_instance(seed, K=None, N=None, qbar_frac=0.3, ebar_frac=0.3):
    rng = np.random.default_rng(seed)
    K = K or int(rng.integers(1, 4))
    N = N or int(rng.integers(2, 7))
    sc = generate_scenario(seed, M=1, K=K, num_slots=N,
                           qbar=0.0, ebar=0.0)
    power = PowerProfile(rng.uniform(0.5, sc.p_max, (1, N)))
    q = rng.uniform(0, 56, (N + 1, 2))
    q[-1] = q[0]
    traj = Trajectory(q)
    rates = rate_matrix(sc, power, traj)
    ts = sc.slot_length
    # floors scaled off the best single-BD throughput / full-idle harvest
    qbar = qbar_frac * ts * np.sort(rates, axis=1)[:, -2:].sum(axis=1)
    full_harvest = bd_harvested_energy(
        sc, Schedule.from_flat(sc, np.zeros((K, N))), power)
    ebar = ebar_frac * full_harvest
    sc = sc.with_overrides(qbar=qbar, ebar=ebar)
    return sc, power, traj


def enumerate_best(sc, power, traj):
    """Optimal total throughput by exhausting every TDMA assignment."""
    K, N = sc.num_bds, sc.num_slots
    best = None
    for assign in itertools.product(range(K + 1), repeat=N):
        flat = np.zeros((K, N))
        for n, a in enumerate(assign):
            if a < K:
                flat[a, n] = 1.0
        schedule = Schedule.from_flat(sc, flat)
        thr = bd_throughput(sc, schedule, power, traj)
        if np.any(thr < sc.qbar - 1e-12):
            continue
        if np.any(bd_harvested_energy(sc, schedule, power)
                  < sc.ebar - 1e-15):
            continue
        total = float(thr.sum())
        if best is None or total > best:
            best = total
    return best


def test_matches_enumeration_on_random_instances():
    checked = 0
    for seed in range(60):
        sc, power, traj = random_instance(seed)
        expected = enumerate_best(sc, power, traj)
        if expected is None:
            with pytest.raises(Infeasible):
                optimize_schedule(sc, power, traj)
            continue
        schedule = optimize_schedule(sc, power, traj)
        total = float(bd_throughput(sc, schedule, power, traj).sum())
        assert total == pytest.approx(expected, abs=1e-9)
        checked += 1
        if checked >= 50:
            break
    assert checked >= 40


def test_result_is_binary_and_tdma():
    sc, power, traj = random_instance(1)
    flat = optimize_schedule(sc, power, traj).flat(sc)
    assert np.allclose(np.minimum(np.abs(flat), np.abs(flat - 1)), 0,
                       atol=1e-9)
    assert np.all(flat.sum(axis=0) <= 1 + 1e-9)


def test_floors_respected():
    solved = 0
    for seed in range(20):
        sc, power, traj = random_instance(seed, qbar_frac=0.5,
                                          ebar_frac=0.5)
        try:
            schedule = optimize_schedule(sc, power, traj)
        except Infeasible:
            continue
        assert np.all(bd_throughput(sc, schedule, power, traj)
                      >= sc.qbar - 1e-9)
        assert np.all(bd_harvested_energy(sc, schedule, power)
                      >= sc.ebar - 1e-12)
        solved += 1
    assert solved >= 5


def test_infeasible_throughput_floor_detected():
    sc, power, traj = random_instance(3)
    sc = sc.with_overrides(qbar=np.full(sc.num_bds, 1e6))
    with pytest.raises(Infeasible) as exc:
        optimize_schedule(sc, power, traj)
    assert "throughput" in str(exc.value.detail)


def test_infeasible_harvest_floor_detected():
    sc, power, traj = random_instance(4)
    sc = sc.with_overrides(ebar=np.full(sc.num_bds, 1.0))
    with pytest.raises(Infeasible) as exc:
        optimize_schedule(sc, power, traj)
    assert "harvest" in str(exc.value.detail)


def test_warm_start_matches_cold_solution():
    sc, power, traj = random_instance(5)
    cold = optimize_schedule(sc, power, traj)
    warm = optimize_schedule(sc, power, traj, warm=cold)
    t_cold = float(bd_throughput(sc, cold, power, traj).sum())
    t_warm = float(bd_throughput(sc, warm, power, traj).sum())
    assert t_warm == pytest.approx(t_cold, abs=1e-9)


def test_instance_shapes():
    sc, power, traj = random_instance(6)
    rates, budget = scheduling_instance(sc, power, traj)
    assert rates.shape == (sc.num_bds, sc.num_slots)
    assert budget.shape == (sc.num_bds,)
    assert np.all(rates >= 0)
