"""Charging environments for the learning schedulers.

Two views of the same scenario dynamics:

- ChargingEnv: full state (per-EV SOC vector, normalized price), per-EV
  continuous actions.
- AggregateEnv: reduced two-dimensional state (fleet SOC sum, base load),
  a single scalar action for the whole fleet.

Both clamp actions to a feasibility corridor: the upper end is
min(b_max, residual demand) and the lower end is the laxity minimum (the
charge needed now so the rest still fits before departure). The clamp
makes every rollout demand-feasible regardless of policy quality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..baselines import _allocate_aggregate, laxity_minimum
from ..model import Scenario, slot_cost

REWARD_EXACT = "exact-cost"
REWARD_PER_EV = "per-ev-quadratic"  # per-EV quadratic form, no cross-EV terms
REWARD_MODES = (REWARD_EXACT, REWARD_PER_EV)


@dataclass(frozen=True)
class RlState:
    """Full state: fixed-length SOC vector (zero for absent EVs) plus price."""

    soc: np.ndarray
    price: float

    def vector(self) -> np.ndarray:
        return np.concatenate([self.soc, [self.price]])


@dataclass(frozen=True)
class ReducedState:
    """Aggregate state: summed SOC of parked EVs and the base load."""

    soc_ev: float
    l_b: float

    def vector(self) -> np.ndarray:
        return np.array([self.soc_ev, self.l_b])


@dataclass(frozen=True)
class EnvTransition:
    state: object
    action: np.ndarray
    reward: float
    next_state: object
    terminal: bool


def _reward(amounts: np.ndarray, l_b: float, scenario: Scenario, mode: str) -> float:
    pm = scenario.price
    if mode == REWARD_EXACT:
        return -slot_cost(amounts, l_b, pm)
    if mode == REWARD_PER_EV:
        return float(-np.sum((pm.k0 + 2.0 * pm.k1 * amounts + 2.0 * pm.k1 * l_b) * amounts))
    raise ValueError(f"unknown reward mode {mode!r}")


class ChargingEnv:
    """Per-EV continuous-action environment over one scenario episode."""

    def __init__(self, scenario: Scenario, reward_mode: str = REWARD_EXACT):
        if reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {reward_mode!r}")
        self.scenario = scenario
        self.reward_mode = reward_mode
        self.price_scale = scenario.price.k0 + 2.0 * scenario.price.k1 * (
            scenario.load_cap if np.isfinite(scenario.load_cap) else 2.0 * scenario.base_load.max()
        )
        self.state_dim = scenario.n_evs + 1
        self.action_dim = scenario.n_evs
        self.reset()

    def reset(self) -> RlState:
        self.t = 1
        self.residuals = self.scenario.demand_vector.copy()
        self.charged = np.zeros(self.scenario.n_evs)
        self._last_ev_load = 0.0
        self.done = self.t > self.scenario.horizon
        self.state = self._observe()
        return self.state

    def _price(self) -> float:
        # Known information at decision time: this slot's base load plus the
        # EV load just realized in the previous slot.
        lb = self.scenario.base_load[min(self.t, self.scenario.horizon) - 1]
        return (self.scenario.price.k0 + 2.0 * self.scenario.price.k1 * (lb + self._last_ev_load)) / self.price_scale

    def _observe(self) -> RlState:
        t = min(self.t, self.scenario.horizon)
        soc = np.array(
            [
                min(ev.soc_init + self.charged[row] / ev.capacity_kwh, 1.0) if ev.parked(t) else 0.0
                for row, ev in enumerate(self.scenario.evs)
            ]
        )
        return RlState(soc=soc, price=self._price())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Feasibility corridor [lo, hi] for each EV in the current slot."""
        lo = np.zeros(self.scenario.n_evs)
        hi = np.zeros(self.scenario.n_evs)
        for row, ev in enumerate(self.scenario.evs):
            if not ev.parked(self.t) or self.residuals[row] <= 0:
                continue
            slots_left = ev.t_dep - self.t + 1
            hi[row] = min(ev.b_max, self.residuals[row])
            lo[row] = min(laxity_minimum(self.residuals[row], ev.b_max, slots_left), hi[row])
        return lo, hi

    def step(self, action: np.ndarray) -> EnvTransition:
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        lo, hi = self.bounds()
        amounts = np.clip(np.asarray(action, dtype=float), lo, hi)
        lb = self.scenario.base_load[self.t - 1]
        reward = _reward(amounts, lb, self.scenario, self.reward_mode)
        self.residuals -= amounts
        self.charged += amounts
        self._last_ev_load = float(amounts.sum())
        prev_state = self.state
        self.t += 1
        self.done = self.t > self.scenario.horizon or (
            self.residuals.size > 0 and bool(np.all(self.residuals <= 1e-9))
        )
        self.state = self._observe()
        transition = EnvTransition(prev_state, amounts, reward, self.state, self.done)
        return transition


class AggregateEnv:
    """Scalar-action environment on the reduced state for two-stage learning."""

    state_dim = 2
    action_dim = 1

    def __init__(self, scenario: Scenario, reward_mode: str = REWARD_EXACT):
        if reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {reward_mode!r}")
        self.scenario = scenario
        self.reward_mode = reward_mode
        self.n_scale = max(scenario.n_evs, 1)
        self.lb_scale = max(scenario.base_load.max(), 1e-9)
        # Actions are expressed in units of the mean fleet energy per slot so
        # the policy operates on O(1) values regardless of fleet size.
        self.action_scale = max(float(scenario.demand_vector.sum()) / max(scenario.horizon, 1), 1e-9)
        self.reset()

    def reset(self) -> ReducedState:
        self.t = 1
        self.residuals = self.scenario.demand_vector.copy()
        self.soc = np.array([ev.soc_init for ev in self.scenario.evs])
        self.done = self.t > self.scenario.horizon
        self.state = self._observe()
        return self.state

    def _parked_rows(self):
        return [
            row
            for row, ev in enumerate(self.scenario.evs)
            if ev.parked(self.t) and self.residuals[row] > 1e-9
        ]

    def _observe(self) -> ReducedState:
        t = min(self.t, self.scenario.horizon)
        soc_ev = sum(self.soc[row] for row, ev in enumerate(self.scenario.evs) if ev.parked(t))
        return ReducedState(soc_ev=soc_ev / self.n_scale, l_b=self.scenario.base_load[t - 1] / self.lb_scale)

    def _bounds_kwh(self) -> tuple[float, float]:
        rows = self._parked_rows()
        lo = hi = 0.0
        for row in rows:
            ev = self.scenario.evs[row]
            slots_left = ev.t_dep - self.t + 1
            hi += min(ev.b_max, self.residuals[row])
            lo += laxity_minimum(self.residuals[row], ev.b_max, slots_left)
        return min(lo, hi), hi

    def bounds(self) -> tuple[float, float]:
        """Aggregate corridor (in action units): laxity minima up to headroom."""
        lo, hi = self._bounds_kwh()
        return lo / self.action_scale, hi / self.action_scale

    def step(self, action: float) -> EnvTransition:
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        lo, hi = self._bounds_kwh()
        budget = float(np.clip(self.action_scale * np.asarray(action, dtype=float).reshape(()), lo, hi))
        rows = self._parked_rows()
        slots_left = {row: self.scenario.evs[row].t_dep - self.t + 1 for row in rows}
        amounts = _allocate_aggregate(self.scenario, rows, self.residuals, slots_left, budget)
        lb = self.scenario.base_load[self.t - 1]
        reward = _reward(amounts, lb, self.scenario, self.reward_mode)
        self.residuals -= amounts
        for row, ev in enumerate(self.scenario.evs):
            self.soc[row] = min(self.soc[row] + amounts[row] / ev.capacity_kwh, 1.0)
        prev_state = self.state
        committed = float(amounts.sum())
        self.t += 1
        self.done = self.t > self.scenario.horizon or (
            self.residuals.size > 0 and bool(np.all(self.residuals <= 1e-9))
        )
        self.state = self._observe()
        return EnvTransition(prev_state, np.array([committed]), reward, self.state, self.done)
