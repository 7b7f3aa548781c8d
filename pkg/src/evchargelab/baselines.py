"""Comparison algorithms: eager charging, rolling online control, tabular Q-learning.

The Q-learning baseline acts on an aggregate per-EV charge level drawn from
an evenly spaced grid of `levels` values in [0, b_max]; the aggregate budget
is allocated to vehicles earliest-deadline-first. A laxity clamp forces the
minimum charge an EV needs to stay on schedule, so greedy rollouts always
meet demand (within one action quantum for quantized amounts).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ChargingSchedule, Scenario, slot_cost
from .solvers import solve_rolling_step

_Q_CLAMP = 1e9


def laxity_minimum(residual: float, b_max: float, slots_left: float) -> float:
    """Smallest charge this slot that keeps the residual deliverable later."""
    return max(0.0, residual - b_max * max(slots_left - 1, 0))


def ec_schedule(scenario: Scenario) -> ChargingSchedule:
    """Eager charging: every parked EV draws min(b_max, residual) each slot."""
    B = np.zeros((scenario.n_evs, scenario.horizon))
    for row, ev in enumerate(scenario.evs):
        residual = ev.demand_kwh
        for t in range(ev.t_arr, ev.t_dep + 1):
            if residual <= 0:
                break
            amount = min(ev.b_max, residual)
            B[row, t - 1] = amount
            residual -= amount
    return ChargingSchedule(B)


def oa_schedule(scenario: Scenario, tol: float = 1e-6) -> ChargingSchedule:
    """Rolling online control: re-solve the window problem at each event.

    Events are EV arrivals, departures, and base-load changes; between
    events the previously computed window plan is committed slot by slot.
    """
    B = np.zeros((scenario.n_evs, scenario.horizon))
    row_of = {ev.id: row for row, ev in enumerate(scenario.evs)}
    residuals = {ev.id: ev.demand_kwh for ev in scenario.evs}
    plan = None
    lb = scenario.base_load
    for t in range(1, scenario.horizon + 1):
        parked = {ev.id for ev in scenario.evs if ev.parked(t)}
        active = {i for i in parked if residuals[i] > tol}
        if not active:
            plan = None
            continue
        arrival = any(ev.t_arr == t for ev in scenario.evs)
        departure = any(ev.t_dep == t - 1 for ev in scenario.evs)
        base_change = t > 1 and lb[t - 1] != lb[t - 2]
        stale = plan is None or t not in plan.window
        if arrival or departure or base_change or stale:
            plan = solve_rolling_step(scenario, t, {i: residuals[i] for i in active}, tol=tol)
        for ev_id, amount in plan.column(t).items():
            if ev_id not in active:
                continue
            committed = min(amount, residuals[ev_id])
            B[row_of[ev_id], t - 1] = committed
            residuals[ev_id] -= committed
    return ChargingSchedule(B)


@dataclass
class QTable:
    """Discretized state-action values for the aggregate charging policy."""

    soc_bins: int
    load_bins: int
    levels: int
    b_max: float
    values: np.ndarray = None  # (soc_bins * load_bins, levels)
    visit_counts: np.ndarray = None

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("at least 2 action levels required")
        n_states = self.soc_bins * self.load_bins
        if self.values is None:
            self.values = np.zeros((n_states, self.levels))
        if self.visit_counts is None:
            self.visit_counts = np.zeros((n_states, self.levels), dtype=np.int64)

    @property
    def quantum(self) -> float:
        return self.b_max / (self.levels - 1)

    def state_index(self, soc_fraction: float, load_fraction: float) -> int:
        s = min(int(np.clip(soc_fraction, 0.0, 1.0) * self.soc_bins), self.soc_bins - 1)
        l = min(int(np.clip(load_fraction, 0.0, 1.0) * self.load_bins), self.load_bins - 1)
        return s * self.load_bins + l

    def save(self, path):
        lines = [f"# soc_bins={self.soc_bins} load_bins={self.load_bins} levels={self.levels} b_max={self.b_max!r}"]
        for s in range(self.values.shape[0]):
            for a in range(self.levels):
                lines.append(f"{s} {a} {float(self.values[s, a])!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "QTable":
        text = Path(path).read_text().strip().split("\n")
        header = dict(kv.split("=") for kv in text[0].lstrip("# ").split())
        table = cls(
            soc_bins=int(header["soc_bins"]),
            load_bins=int(header["load_bins"]),
            levels=int(header["levels"]),
            b_max=float(header["b_max"]),
        )
        for line in text[1:]:
            s, a, v = line.split()
            table.values[int(s), int(a)] = float(v)
        return table


@dataclass(frozen=True)
class QLearnConfig:
    learning_rate: float = 0.1
    discount: float = 0.95
    episodes: int = 400
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate {self.learning_rate} outside (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount {self.discount} outside [0, 1)")

    def epsilon(self, episode: int) -> float:
        # linear decay over the first half of the episodes
        half = max(self.episodes // 2, 1)
        frac = min(episode / half, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def _allocate_aggregate(scenario, parked_rows, residuals, slots_left, budget):
    """Split an aggregate budget earliest-deadline-first, honoring laxity minima."""
    amounts = np.zeros(len(residuals))
    order = sorted(parked_rows, key=lambda row: scenario.evs[row].t_dep)
    for row in order:
        ev = scenario.evs[row]
        forced = laxity_minimum(residuals[row], ev.b_max, slots_left[row])
        amounts[row] = min(forced, ev.b_max, residuals[row])
        budget -= amounts[row]
    for row in order:
        if budget <= 0:
            break
        ev = scenario.evs[row]
        extra = min(budget, ev.b_max - amounts[row], residuals[row] - amounts[row])
        if extra > 0:
            amounts[row] += extra
            budget -= extra
    return amounts


def _aem_rollout(table: QTable, scenario: Scenario, pick_action, lb_scale: float):
    """Roll one episode; yields (state, action, reward, next_state, done) and fills a schedule."""
    n, T = scenario.n_evs, scenario.horizon
    B = np.zeros((n, T))
    residuals = scenario.demand_vector.copy()
    total_demand = max(residuals.sum(), 1e-12)
    transitions = []
    for t in range(1, T + 1):
        parked = [row for row, ev in enumerate(scenario.evs) if ev.parked(t) and residuals[row] > 1e-9]
        soc_frac = 1.0 - residuals.sum() / total_demand
        state = table.state_index(soc_frac, scenario.base_load[t - 1] / lb_scale)
        if not parked:
            continue
        action = pick_action(state)
        budget = action * table.quantum * len(parked)
        slots_left = {row: scenario.evs[row].t_dep - t + 1 for row in parked}
        amounts = _allocate_aggregate(scenario, parked, residuals, slots_left, budget)
        B[:, t - 1] = amounts
        residuals -= amounts
        reward = -slot_cost(amounts[amounts > 0], scenario.base_load[t - 1], scenario.price)
        soc_next = 1.0 - residuals.sum() / total_demand
        lb_next = scenario.base_load[t] / lb_scale if t < T else scenario.base_load[t - 1] / lb_scale
        next_state = table.state_index(soc_next, lb_next)
        transitions.append((state, action, reward, next_state, t == T))
    return ChargingSchedule(B), transitions


def aem_train(scenario_sampler, cfg: QLearnConfig, levels: int, soc_bins: int = 20, load_bins: int = 10) -> QTable:
    """One-step Q-learning over episodes drawn from the sampler."""
    rng = np.random.default_rng(cfg.seed)
    probe = scenario_sampler(0)
    b_max = probe.b_max_vector.max() if probe.n_evs else 1.0
    table = QTable(soc_bins=soc_bins, load_bins=load_bins, levels=levels, b_max=float(b_max))
    lb_scale = max(probe.base_load.max(), 1e-9)
    for episode in range(cfg.episodes):
        scenario = scenario_sampler(episode)
        eps = cfg.epsilon(episode)

        def pick(state):
            if rng.random() < eps:
                return int(rng.integers(table.levels))
            return int(np.argmax(table.values[state]))

        _, transitions = _aem_rollout(table, scenario, pick, lb_scale)
        for state, action, reward, next_state, done in transitions:
            target = reward if done else reward + cfg.discount * table.values[next_state].max()
            updated = table.values[state, action] + cfg.learning_rate * (target - table.values[state, action])
            if not np.isfinite(updated) or abs(updated) > _Q_CLAMP:
                warnings.warn("Q-value clamped to finite bounds; check learning rate")
                updated = float(np.clip(np.nan_to_num(updated), -_Q_CLAMP, _Q_CLAMP))
            table.values[state, action] = updated
            table.visit_counts[state, action] += 1
    return table


def aem_schedule(table: QTable, scenario: Scenario) -> ChargingSchedule:
    """Greedy rollout of a trained table."""
    lb_scale = max(scenario.base_load.max(), 1e-9)
    schedule, _ = _aem_rollout(
        table, scenario, lambda state: int(np.argmax(table.values[state])), lb_scale
    )
    return schedule
