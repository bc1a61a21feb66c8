import numpy as np
import pytest

from uavbc import hover_fly as hf
from uavbc.errors import Infeasible
from uavbc.scenario import generate_scenario
from uavbc.uav_power import UavPhysics, propulsion_power


def small_scenario(seed=0, **kw):
    base = dict(M=1, K=3, num_slots=12, qbar=5.0, ebar=1e-5)
    base.update(kw)
    return generate_scenario(seed, **base)


def make_plan(scenario, rng=None):
    rng = rng or np.random.default_rng(0)
    order = hf.tsp_order(scenario.bd_positions)
    K = order.size
    pos = np.empty((K + 1, 2))
    pos[1:] = scenario.bd_positions[order] + rng.normal(size=(K, 2))
    pos[0] = pos[K]
    plan = hf.HoverPlan(order=order, positions=pos,
                        times=rng.uniform(1.0, 3.0, K),
                        powers=rng.uniform(0.5, scenario.p_max, K),
                        leg_slack=np.zeros(K), v_max=scenario.v_max)
    plan.leg_slack = plan.legs()
    return plan


# --- TSP -------------------------------------------------------------------

def test_tsp_order_is_permutation_and_deterministic():
    pts = np.random.default_rng(1).uniform(0, 50, (6, 2))
    order = hf.tsp_order(pts)
    assert sorted(order.tolist()) == list(range(6))
    assert np.array_equal(order, hf.tsp_order(pts))


def test_tsp_near_optimal_small():
    for seed in range(20):
        pts = np.random.default_rng(seed).uniform(0, 50, (6, 2))
        heur = hf.tour_length(pts, hf.tsp_order(pts))
        exact = hf.exact_tsp_length(pts)
        assert heur <= 1.05 * exact + 1e-9


def test_tsp_trivial_sizes():
    assert hf.tsp_order(np.zeros((1, 2))).tolist() == [0]
    assert hf.tsp_order(np.array([[0.0, 0.0], [1.0, 1.0]])).tolist() == [0, 1]


# --- energy oracles ---------------------------------------------------------

def test_benchmark_energy_oracle():
    sc = small_scenario()
    plan = make_plan(sc)
    uav, ce = hf.benchmark_energy(plan, sc.uav)
    legs = plan.legs()
    manual_uav = (propulsion_power(sc.uav, sc.v_max) * legs.sum() / sc.v_max
                  + propulsion_power(sc.uav, 0.0) * plan.times.sum())
    manual_ce = sum(plan.powers[i] * (plan.times[i] + legs[i] / sc.v_max)
                    for i in range(plan.order.size))
    assert uav == pytest.approx(manual_uav, rel=1e-12)
    assert ce == pytest.approx(manual_ce, rel=1e-12)


def test_bd_energy_matches_summation_oracle():
    sc = small_scenario()
    plan = make_plan(sc)
    legs = plan.legs()
    for i in range(1, plan.order.size + 1):
        k = int(plan.order[i - 1])
        m = int(sc.association[k])
        beta = sc.ce_bd_gain(k)
        total = sum(plan.powers[j] * (plan.times[j] + legs[j] / sc.v_max)
                    for j in range(plan.order.size)
                    if sc.association[plan.order[j]] == m)
        manual = sc.eta[k] * beta * (total - plan.powers[i - 1]
                                     * plan.times[i - 1])
        assert hf.benchmark_bd_energy(plan, sc, i) == pytest.approx(
            manual, rel=1e-12)


def test_bd_energy_single_bd_zero_legs_is_zero():
    sc = small_scenario(K=1, qbar=0.0, ebar=0.0)
    pos = np.vstack([sc.bd_positions[0], sc.bd_positions[0]])
    plan = hf.HoverPlan(order=np.array([0]), positions=pos,
                        times=np.array([5.0]), powers=np.array([2.0]),
                        leg_slack=np.zeros(1), v_max=sc.v_max)
    assert hf.benchmark_bd_energy(plan, sc, 1) == pytest.approx(0.0,
                                                                abs=1e-15)


def test_bd_energy_zero_power_reduces_to_co_bd_sum():
    sc = small_scenario()
    plan = make_plan(sc)
    plan.powers[0] = 0.0
    legs = plan.legs()
    k = int(plan.order[0])
    m = int(sc.association[k])
    co = sum(plan.powers[j] * (plan.times[j] + legs[j] / sc.v_max)
             for j in range(1, plan.order.size)
             if sc.association[plan.order[j]] == m)
    expected = sc.eta[k] * sc.ce_bd_gain(k) * co
    assert hf.benchmark_bd_energy(plan, sc, 1) == pytest.approx(expected,
                                                                rel=1e-12)


# --- optimization -----------------------------------------------------------

def test_optimize_small_scenario_feasible_and_monotone():
    sc = small_scenario()
    plan, result = hf.optimize_hover_fly(sc)
    checks = hf.audit_plan(plan, sc)
    assert all(c.ok for c in checks), [c.cid for c in checks if not c.ok]
    ees = [e for _, e in result.trace]
    assert all(b >= a - 1e-6 for a, b in zip(ees, ees[1:]))
    assert result.ee == pytest.approx(hf.plan_ee(plan, sc), rel=1e-12)


def test_single_bd_hover_above_it():
    sc = generate_scenario(3, M=1, K=1, qbar=0.0, ebar=0.0)
    plan, result = hf.optimize_hover_fly(sc)
    assert np.linalg.norm(plan.positions[1] - sc.bd_positions[0]) < 0.5
    assert result.status == "converged"


def test_sca_rounds_move_toward_single_bd():
    sc = generate_scenario(3, M=1, K=1, qbar=0.0, ebar=0.0)
    pos = np.tile(sc.bd_positions[0] + np.array([8.0, 0.0]), (2, 1))
    plan = hf.HoverPlan(order=np.array([0]), positions=pos,
                        times=np.array([20.0]), powers=np.array([2.0]),
                        leg_slack=np.zeros(1), v_max=sc.v_max)
    history = hf.refine_positions(sc, plan)
    assert len(history) > 1
    dists = [np.linalg.norm(p.positions[1] - sc.bd_positions[0])
             for p in history]
    assert all(b <= a + 1e-9 for a, b in zip(dists, dists[1:]))
    assert dists[-1] < dists[0]


def test_infeasible_mission_time_raises():
    sc = small_scenario().with_overrides(mission_time=1e-3)
    with pytest.raises(Infeasible):
        hf.optimize_hover_fly(sc)


def test_infeasible_throughput_raises():
    sc = small_scenario().with_overrides(qbar=np.full(3, 1e6))
    with pytest.raises(Infeasible):
        hf.optimize_hover_fly(sc)


def test_plan_is_closed_tour():
    sc = small_scenario()
    plan, _ = hf.optimize_hover_fly(sc)
    assert np.allclose(plan.positions[0], plan.positions[-1])


def test_rate_bound_mirrors_exact_rate():
    sc = small_scenario()
    plan = make_plan(sc)
    rates = hf.hover_rates(plan, sc)
    # rates computed from the exact SNR expression
    for i in range(plan.order.size):
        k = int(plan.order[i])
        d2 = float(((plan.positions[i + 1] - sc.bd_positions[k]) ** 2).sum())
        snr = (sc.beta0 * sc.ce_bd_gain(k) * plan.powers[i]
               / (sc.noise_power * (sc.altitude ** 2 + d2)))
        assert rates[i] == pytest.approx(np.log2(1.0 + snr), rel=1e-12)


def test_leg_linearization_underestimates():
    rng = np.random.default_rng(4)
    for _ in range(200):
        dq_exp = rng.normal(size=2) * 3
        dq = rng.normal(size=2) * 3
        lin = 2.0 * float(dq_exp @ dq) - float(dq_exp @ dq_exp)
        assert lin <= float(dq @ dq) + 1e-12
    dq = rng.normal(size=2)
    tight = 2.0 * float(dq @ dq) - float(dq @ dq)
    assert tight == pytest.approx(float(dq @ dq), rel=1e-12)


def test_deterministic():
    sc = small_scenario()
    p1, r1 = hf.optimize_hover_fly(sc)
    p2, r2 = hf.optimize_hover_fly(sc)
    assert np.array_equal(p1.positions, p2.positions)
    assert np.array_equal(p1.times, p2.times)
    assert r1.ee == r2.ee
