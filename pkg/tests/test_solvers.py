"""Offline oracle, rolling step, and projection allocator tests."""

import numpy as np
import pytest

from evchargelab.model import ChargingSchedule, horizon_cost, validate_schedule
from evchargelab.solvers import (
    InfeasibleScenarioError,
    kkt_residual,
    project_allocation,
    solve_offline,
    solve_rolling_step,
)

from conftest import make_ev, make_scenario, random_feasible_scenario
from test_scenario import five_ev_fleet


def grid_best_cost(scenario, step=0.1):
    """Exhaustive search over per-EV grid schedules; tiny instances only."""
    from itertools import product

    n, t = scenario.n_evs, scenario.horizon
    mask = scenario.window_mask()
    best = np.inf
    per_ev_options = []
    for i, ev in enumerate(scenario.evs):
        slots = np.nonzero(mask[i])[0]
        levels = np.round(np.arange(0.0, ev.b_max + step / 2, step), 10)
        rows = []
        for combo in product(levels, repeat=len(slots)):
            if abs(sum(combo) - ev.demand_kwh) < step / 2:
                row = np.zeros(t)
                row[slots] = combo
                rows.append(row)
        per_ev_options.append(rows)
    for rows in product(*per_ev_options):
        sched = ChargingSchedule(np.stack(rows))
        totals = sched.slot_totals() + scenario.base_load
        if np.any(totals > scenario.load_cap + 1e-9):
            continue
        best = min(best, horizon_cost(sched, scenario))
    return best


class TestSolveOffline:
    def test_symmetric_split(self):
        scn = make_scenario([make_ev(demand=4.0)], horizon=2, base_load=[1.0, 1.0], k1=0.5)
        sol = solve_offline(scn)
        assert sol.schedule.amounts[0] == pytest.approx([2.0, 2.0], abs=1e-5)

    def test_asymmetric_base_load(self):
        # Stationarity with l_b = (0, 2), k0 = 0, k1 = 0.5: b1 - (4 - b1) - 2 = 0.
        scn = make_scenario([make_ev(demand=4.0)], horizon=2, base_load=[0.0, 2.0], k0=0.0, k1=0.5)
        sol = solve_offline(scn)
        assert sol.schedule.amounts[0] == pytest.approx([3.0, 1.0], abs=1e-5)

    def test_linear_price_objective(self):
        # k1 = 0: every demand-feasible schedule has the same cost k0 * sum(D).
        evs = [make_ev(0, 1, 3, demand=4.0, b_max=2.0), make_ev(1, 2, 4, demand=3.0, b_max=2.0)]
        scn = make_scenario(evs, horizon=4, base_load=[1.0] * 4, k0=0.25, k1=0.0)
        sol = solve_offline(scn)
        assert sol.objective == pytest.approx(0.25 * 7.0, abs=1e-6)
        assert validate_schedule(sol.schedule, scn).passed

    def test_certificate_and_validation(self, rng):
        for k in range(10):
            scn = random_feasible_scenario(np.random.default_rng(k), with_cap=(k % 2 == 0))
            sol = solve_offline(scn)
            assert validate_schedule(sol.schedule, scn, tol=1e-5).passed
            assert sol.kkt_residual <= 1e-5

    def test_matches_grid_search(self):
        rng = np.random.default_rng(5)
        for k in range(5):
            n = int(rng.integers(1, 3))
            horizon = int(rng.integers(2, 4))
            evs = []
            for i in range(n):
                t_arr = int(rng.integers(1, horizon))
                t_dep = int(rng.integers(t_arr + 1, horizon + 1))
                demand = round(float(rng.uniform(0.2, 1.2)), 1)
                evs.append(make_ev(i, t_arr, t_dep, demand, b_max=1.0))
            scn = make_scenario(evs, horizon, rng.uniform(0, 3, horizon), k1=0.05)
            sol = solve_offline(scn)
            brute = grid_best_cost(scn, step=0.1)
            # Grid answers are only as fine as the step; allow Lipschitz slack.
            lipschitz = max(
                scn.price.k0 + 2 * scn.price.k1 * (scn.base_load.max() + sum(e.b_max for e in evs))
                for e in evs
            )
            slack = lipschitz * 0.1 * n * horizon
            assert sol.objective <= brute + 1e-6
            assert sol.objective >= brute - slack

    def test_infeasible_demand_detected(self):
        ev = make_ev(demand=4.0, b_max=1.0, t_arr=1, t_dep=2)
        scn = make_scenario([ev], horizon=2)
        with pytest.raises(InfeasibleScenarioError):
            solve_offline(scn)

    def test_infeasible_cap_detected(self):
        evs = [make_ev(i, 1, 2, demand=4.0, b_max=2.0) for i in range(3)]
        scn = make_scenario(evs, horizon=2, base_load=[4.0, 4.0], load_cap=8.0)
        with pytest.raises(InfeasibleScenarioError):
            solve_offline(scn)

    def test_load_cap_respected(self):
        evs = [make_ev(i, 1, 4, demand=6.0, b_max=3.0) for i in range(2)]
        scn = make_scenario(evs, horizon=4, base_load=[1.0] * 4, load_cap=5.0)
        sol = solve_offline(scn)
        report = validate_schedule(sol.schedule, scn, tol=1e-5)
        assert report.passed
        assert np.all(sol.schedule.slot_totals() + scn.base_load <= 5.0 + 1e-5)

    def test_epsilon_oscillation_at_optimum_converges(self):
        # Regression: an iterate parked at the optimum can flip its objective
        # by one float epsilon, triggering a momentum restart on exactly the
        # iterations that carry the convergence check; this instance used to
        # spin for the full iteration budget and raise.
        evs = [
            make_ev(0, 1, 2, demand=6.017815107008625, b_max=3.62184061204899, capacity=40.0),
            make_ev(2, 1, 2, demand=0.4560825295308928, b_max=1.879455530703803, capacity=40.0),
        ]
        scn = make_scenario(evs, horizon=2, base_load=[4.6650511604379945, 4.596971254147205])
        sol = solve_offline(scn)
        assert sol.iterations < 1000
        assert sol.objective == pytest.approx(0.72830450654, abs=1e-8)


class TestKktResidual:
    def test_zero_at_optimum(self):
        scn = make_scenario([make_ev(demand=4.0)], horizon=2, base_load=[1.0, 1.0], k1=0.5)
        sol = solve_offline(scn, tol=1e-8)
        assert kkt_residual(sol.schedule.amounts, scn) <= 1e-7

    def test_positive_off_optimum(self):
        scn = make_scenario([make_ev(demand=4.0)], horizon=2, base_load=[1.0, 1.0], k1=0.5)
        bad = np.array([[4.0, 0.0]])
        assert kkt_residual(bad, scn) > 1e-3


class TestRollingStep:
    def test_forced_single_slot(self):
        ev = make_ev(1, t_arr=3, t_dep=3, demand=2.0, b_max=3.0)
        scn = make_scenario([ev], horizon=4, base_load=[1.0] * 4)
        step = solve_rolling_step(scn, 3, {1: 2.0})
        assert step.column(3) == pytest.approx({1: 2.0})

    def test_window_spans_fig1_instance(self):
        scn = make_scenario(five_ev_fleet(), horizon=10, base_load=[1.0] * 10)
        residuals = {ev.id: ev.demand_kwh for ev in scn.evs if ev.parked(4)}
        step = solve_rolling_step(scn, 4, residuals)
        assert sorted(step.ev_ids) == [2, 3, 4, 5]
        assert list(step.window) == [4, 5, 6, 7, 8, 9]

    def test_identical_evs_split_equally(self):
        evs = [make_ev(i, 1, 3, demand=3.0, b_max=2.0) for i in range(2)]
        scn = make_scenario(evs, horizon=3, base_load=[2.0] * 3, k1=0.1)
        step = solve_rolling_step(scn, 1, {0: 3.0, 1: 3.0})
        col = step.column(1)
        assert col[0] == pytest.approx(col[1], abs=1e-5)

    def test_residual_exceeding_window_rejected(self):
        ev = make_ev(1, t_arr=2, t_dep=3, demand=2.0, b_max=1.0)
        scn = make_scenario([ev], horizon=3)
        with pytest.raises(InfeasibleScenarioError):
            solve_rolling_step(scn, 3, {1: 2.0})


class TestProjectAllocation:
    def test_equalities_force_allocation(self):
        evs = [make_ev(0, 1, 1, demand=3.0, b_max=4.0), make_ev(1, 1, 1, demand=1.0, b_max=4.0)]
        scn = make_scenario(evs, horizon=1, base_load=[0.0])
        res = project_allocation(np.array([4.0]), scn)
        assert res.schedule.amounts[:, 0] == pytest.approx([3.0, 1.0], abs=1e-6)
        assert res.distance == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_demands(self):
        evs = [make_ev(i, 1, 1, demand=2.0, b_max=4.0) for i in range(2)]
        scn = make_scenario(evs, horizon=1, base_load=[0.0])
        res = project_allocation(np.array([4.0]), scn)
        assert res.schedule.amounts[:, 0] == pytest.approx([2.0, 2.0], abs=1e-6)

    def test_target_clipped_to_box(self):
        scn = make_scenario([make_ev(0, 1, 2, demand=4.0, b_max=4.0)], horizon=2)
        res = project_allocation(np.array([5.0, 0.0]), scn)
        assert res.clipped_target == pytest.approx([4.0, 0.0])
        assert res.clip_magnitude == pytest.approx(1.0)
        assert res.schedule.amounts[0] == pytest.approx([4.0, 0.0], abs=1e-6)
        assert res.distance == pytest.approx(0.0, abs=1e-8)

    def test_idempotent_on_feasible_sums(self, rng):
        for k in range(5):
            scn = random_feasible_scenario(np.random.default_rng(100 + k))
            base = solve_offline(scn).schedule
            res = project_allocation(base.slot_totals(), scn)
            assert res.schedule.slot_totals() == pytest.approx(base.slot_totals(), abs=1e-5)
            assert res.distance == pytest.approx(0.0, abs=1e-6)
            assert validate_schedule(res.schedule, scn, tol=1e-5).passed

    def test_schedule_always_demand_feasible(self, rng):
        # Even wildly infeasible targets must come back as valid schedules.
        for k in range(5):
            scn = random_feasible_scenario(np.random.default_rng(200 + k))
            target = rng.uniform(0, 20, scn.horizon)
            res = project_allocation(target, scn)
            assert validate_schedule(res.schedule, scn, tol=1e-5).passed
