"""Deterministic optimization: offline oracle, rolling step, projection allocator.

The offline problem is a convex QP (strictly convex in the per-slot
aggregates when k1 > 0). It is solved with accelerated projected gradient
descent; the feasible-set projection is exact when the load cap is slack
and falls back to Dykstra's alternating projections when the cap binds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChargingSchedule, EVProfile, Scenario
from .projections import (
    project_capped_simplex,
    project_cols_box_capped,
    project_cols_capped_simplex,
    project_rows_capped_simplex,
)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50000
_DYKSTRA_MAX_ITER = 2000


class SolverError(RuntimeError):
    pass


class InfeasibleScenarioError(SolverError):
    """No schedule can satisfy the demands within the bounds and load cap."""


class ConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class QpSolution:
    schedule: ChargingSchedule
    objective: float
    iterations: int
    kkt_residual: float


@dataclass(frozen=True)
class RollingStepResult:
    """Window plan of one online re-solve; the caller commits only slot t."""

    ev_ids: tuple[int, ...]
    window: range
    amounts: np.ndarray  # (n_active, len(window))

    def column(self, t: int) -> dict[int, float]:
        col = t - self.window.start
        return {ev_id: float(self.amounts[row, col]) for row, ev_id in enumerate(self.ev_ids)}


@dataclass(frozen=True)
class ProjectionResult:
    schedule: ChargingSchedule
    surrogate: ChargingSchedule  # column sums equal the clipped aggregate target
    distance: float  # squared-norm gap between the two
    clipped_target: np.ndarray
    clip_magnitude: float  # total kWh removed from the raw target


def _check_per_ev_feasibility(scenario: Scenario, tol: float):
    for ev in scenario.evs:
        deliverable = ev.b_max * ev.n_slots
        if ev.demand_kwh > deliverable + tol:
            raise InfeasibleScenarioError(
                f"EV {ev.id}: demand {ev.demand_kwh} exceeds deliverable {deliverable}"
            )


def _project_feasible(B, scenario: Scenario, mask, b_max, demands, caps, tol: float):
    """Project onto {demand equalities, box, aggregate cap} (Dykstra if cap binds)."""
    X = project_rows_capped_simplex(B, b_max, demands, mask)
    if np.all(X.sum(axis=0) <= caps + tol):
        return X
    # Dykstra between the row set (demand simplexes) and the capped-column set.
    P = np.zeros_like(X)
    Q = np.zeros_like(X)
    for _ in range(_DYKSTRA_MAX_ITER):
        Y = project_cols_box_capped(X + P, b_max, mask, caps)
        P = X + P - Y
        X_new = project_rows_capped_simplex(Y + Q, b_max, demands, mask)
        Q = Y + Q - X_new
        if np.max(np.abs(X_new - X)) < 0.1 * tol and np.all(X_new.sum(axis=0) <= caps + tol):
            return X_new
        X = X_new
    if np.all(X.sum(axis=0) <= caps + 10 * tol):
        return X
    worst = int(np.argmax(X.sum(axis=0) - caps))
    raise InfeasibleScenarioError(
        f"aggregate load cap unreachable: slot {worst + 1} needs "
        f"{X.sum(axis=0)[worst] + scenario.base_load[worst]:.3f} kWh against cap {scenario.load_cap}"
    )


def _objective(S, lb, pm):
    return float(np.sum(pm.k0 * S + pm.k1 * S * S + 2.0 * pm.k1 * lb * S))


def solve_offline(scenario: Scenario, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> QpSolution:
    """Minimize total charging cost with full knowledge of the fleet.

    Returns a solution whose KKT residual (projected-gradient fixed-point
    residual) is at most tol; raises ConvergenceError otherwise.
    """
    _check_per_ev_feasibility(scenario, tol)
    n, T = scenario.n_evs, scenario.horizon
    pm = scenario.price
    lb = scenario.base_load
    if n == 0:
        return QpSolution(ChargingSchedule(np.zeros((0, T))), 0.0, 0, 0.0)
    mask = scenario.window_mask()
    b_max = scenario.b_max_vector
    demands = scenario.demand_vector
    caps = np.full(T, scenario.load_cap) - lb

    project = lambda B: _project_feasible(B, scenario, mask, b_max, demands, caps, tol)

    if pm.k1 == 0.0:
        # Linear objective with fixed per-EV totals: every feasible point is
        # optimal; return the minimum-norm one for determinism.
        B = project(np.zeros((n, T)))
        return QpSolution(ChargingSchedule(B), _objective(B.sum(axis=0), lb, pm), 0, 0.0)

    L = 2.0 * pm.k1 * n
    eta = 1.0 / L
    B = project(np.tile((demands / np.maximum(mask.sum(axis=1), 1))[:, None], (1, T)) * mask)
    Y = B.copy()
    t_mom = 1.0
    f_prev = np.inf
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        S = Y.sum(axis=0)
        grad_slot = pm.k0 + 2.0 * pm.k1 * (S + lb)
        G = np.where(mask, grad_slot[None, :], 0.0)
        B_new = project(Y - eta * G)
        f_new = _objective(B_new.sum(axis=0), lb, pm)
        if f_new > f_prev:  # restart momentum on objective increase
            t_mom = 1.0
            Y = B.copy()
            f_prev = np.inf
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            Y = B_new + ((t_mom - 1.0) / t_next) * (B_new - B)
            B, t_mom, f_prev = B_new, t_next, f_new
        # The check must also run on restart iterations: an iterate parked at
        # the optimum can oscillate by one float epsilon and restart forever.
        if iterations % 10 == 0 or iterations == max_iter:
            residual = kkt_residual(B, scenario, mask, b_max, demands, caps, tol)
            if residual <= tol:
                break
    else:  # pragma: no cover - loop always breaks or exhausts via range
        pass
    if residual > tol:
        raise ConvergenceError(f"no convergence after {iterations} iterations, residual {residual:.3g}")
    return QpSolution(ChargingSchedule(B), _objective(B.sum(axis=0), lb, pm), iterations, residual)


def kkt_residual(B, scenario: Scenario, mask=None, b_max=None, demands=None, caps=None, tol=DEFAULT_TOL) -> float:
    """Fixed-point residual of the projected-gradient map (0 at a KKT point)."""
    if mask is None:
        mask = scenario.window_mask()
        b_max = scenario.b_max_vector
        demands = scenario.demand_vector
        caps = np.full(scenario.horizon, scenario.load_cap) - scenario.base_load
    pm = scenario.price
    S = B.sum(axis=0)
    grad_slot = pm.k0 + 2.0 * pm.k1 * (S + scenario.base_load)
    G = np.where(mask, grad_slot[None, :], 0.0)
    step = 1.0 / (2.0 * pm.k1 * max(scenario.n_evs, 1)) if pm.k1 > 0 else 1.0
    moved = _project_feasible(B - step * G, scenario, mask, b_max, demands, caps, tol)
    return float(np.max(np.abs(B - moved)) / step)


def _window_subscenario(scenario: Scenario, t: int, residuals: dict[int, float]):
    """Reduced scenario over W(t) for the EVs parked at t with their residuals."""
    parked = [ev for ev in scenario.evs if ev.t_arr <= t <= ev.t_dep and ev.id in residuals]
    if not parked:
        return None, None, None
    t_end = max(ev.t_dep for ev in parked)
    window = range(t, t_end + 1)
    sub_evs = [
        EVProfile(
            id=ev.id,
            t_arr=1,
            t_dep=ev.t_dep - t + 1,
            demand_kwh=max(residuals[ev.id], 0.0),
            b_max=ev.b_max,
            capacity_kwh=ev.capacity_kwh,
            soc_init=0.0,
        )
        for ev in parked
    ]
    sub = Scenario(
        horizon=len(window),
        base_load=scenario.base_load[t - 1 : t_end],
        evs=sub_evs,
        price=scenario.price,
        load_cap=scenario.load_cap,
        slot_hours=scenario.slot_hours,
    )
    return sub, window, tuple(ev.id for ev in parked)


def solve_rolling_step(scenario: Scenario, t: int, residuals: dict[int, float], tol: float = DEFAULT_TOL) -> RollingStepResult:
    """Re-solve the window problem at slot t for the currently parked EVs.

    residuals maps parked EV ids to their remaining demand; negative
    residuals are rejected.
    """
    if any(r < -tol for r in residuals.values()):
        raise SolverError("residual demands must be non-negative")
    sub, window, ids = _window_subscenario(scenario, t, residuals)
    if sub is None:
        raise SolverError(f"no EV parked at slot {t}")
    solution = solve_offline(sub, tol=tol)
    return RollingStepResult(ev_ids=ids, window=window, amounts=solution.schedule.amounts)


def project_allocation(aggregate_target, scenario: Scenario, tol: float = DEFAULT_TOL) -> ProjectionResult:
    """Split a per-slot aggregate charging target into a demand-feasible schedule.

    The target is first clipped to what the parked fleet and the load cap can
    absorb per slot; the clipped amount is reported, never raised. Alternating
    projections between the target-matching set and the demand-feasible set
    converge to the closest pair, so distance is 0 exactly when the clipped
    target is achievable.
    """
    _check_per_ev_feasibility(scenario, tol)
    target = np.asarray(aggregate_target, dtype=float)
    if target.shape != (scenario.horizon,):
        raise SolverError(f"target length {target.shape} does not match horizon {scenario.horizon}")
    mask = scenario.window_mask()
    b_max = scenario.b_max_vector
    demands = scenario.demand_vector
    caps = np.full(scenario.horizon, scenario.load_cap) - scenario.base_load
    slot_capacity = np.minimum((np.where(mask, b_max[:, None], 0.0)).sum(axis=0), caps)
    clipped = np.clip(target, 0.0, slot_capacity)
    clip_magnitude = float(np.sum(np.abs(target - clipped)))

    n = scenario.n_evs
    if n == 0:
        empty = ChargingSchedule(np.zeros((0, scenario.horizon)))
        return ProjectionResult(empty, empty, 0.0, clipped, clip_magnitude)

    upper = np.where(mask, b_max[:, None], 0.0)

    def project_target(V):
        return project_cols_capped_simplex(np.where(mask, V, 0.0), upper, clipped)

    B = _project_feasible(project_target(np.zeros((n, scenario.horizon))), scenario, mask, b_max, demands, caps, tol)
    B_star = project_target(B)
    for _ in range(_DYKSTRA_MAX_ITER):
        B_new = _project_feasible(B_star, scenario, mask, b_max, demands, caps, tol)
        B_star_new = project_target(B_new)
        delta = max(np.max(np.abs(B_new - B)), np.max(np.abs(B_star_new - B_star)))
        B, B_star = B_new, B_star_new
        if delta < 0.1 * tol:
            break
    distance = float(np.sum((B - B_star) ** 2))
    if distance < tol * tol:
        distance = 0.0 if np.allclose(B, B_star, atol=tol) else distance
    return ProjectionResult(
        schedule=ChargingSchedule(B),
        surrogate=ChargingSchedule(B_star),
        distance=distance,
        clipped_target=clipped,
        clip_magnitude=clip_magnitude,
    )
