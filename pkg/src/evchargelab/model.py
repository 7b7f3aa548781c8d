"""Physical and economic core: price model, EV profiles, scenarios, schedules.

All charging amounts are stored as kWh per slot. With the default slot
duration of 1 hour, kW and kWh-per-slot are numerically identical, which
keeps every other module free of unit conversions.

Slots are 1-based (t in 1..T) at the API surface; schedule matrices use
0-based columns internally, so column t-1 holds slot t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_K0 = 0.1  # currency per kWh
DEFAULT_K1 = 0.001  # currency per kWh^2
DEFAULT_TOL = 1e-6  # kWh


class ModelError(ValueError):
    """Invalid model data or mismatched dimensions."""


@dataclass(frozen=True)
class PriceModel:
    """Linear unit-price model p = k0 + 2*k1*load (quadratic slot cost)."""

    k0: float = DEFAULT_K0
    k1: float = DEFAULT_K1

    def __post_init__(self):
        if self.k0 < 0 or self.k1 < 0:
            raise ModelError(f"price coefficients must be non-negative, got k0={self.k0}, k1={self.k1}")


@dataclass(frozen=True)
class EVProfile:
    """One vehicle: parking window, demand, and battery limits.

    demand_kwh is the energy the station must deliver; it may not exceed
    the battery headroom capacity*(1 - soc_init) by more than a tolerance.
    """

    id: int
    t_arr: int
    t_dep: int
    demand_kwh: float
    b_max: float  # kWh per slot
    capacity_kwh: float
    soc_init: float

    def __post_init__(self):
        if self.t_arr > self.t_dep:
            raise ModelError(f"EV {self.id}: arrival {self.t_arr} after departure {self.t_dep}")
        if self.demand_kwh < 0:
            raise ModelError(f"EV {self.id}: negative demand {self.demand_kwh}")
        if self.b_max <= 0 or self.capacity_kwh <= 0:
            raise ModelError(f"EV {self.id}: b_max and capacity must be positive")
        if not 0.0 <= self.soc_init <= 1.0:
            raise ModelError(f"EV {self.id}: soc_init {self.soc_init} outside [0, 1]")
        headroom = self.capacity_kwh * (1.0 - self.soc_init)
        if self.demand_kwh > headroom + 1e-6:
            raise ModelError(
                f"EV {self.id}: demand {self.demand_kwh} exceeds battery headroom {headroom}"
            )

    @property
    def n_slots(self) -> int:
        return self.t_dep - self.t_arr + 1

    def parked(self, t: int) -> bool:
        return self.t_arr <= t <= self.t_dep


@dataclass(frozen=True)
class Scenario:
    """A charging-station instance: horizon, base load, fleet, price, cap."""

    horizon: int
    base_load: np.ndarray  # kWh per slot, length horizon
    evs: tuple[EVProfile, ...]
    price: PriceModel = field(default_factory=PriceModel)
    load_cap: float = float("inf")  # kWh per slot, total load bound
    slot_hours: float = 1.0

    def __post_init__(self):
        base = np.asarray(self.base_load, dtype=float)
        object.__setattr__(self, "base_load", base)
        object.__setattr__(self, "evs", tuple(self.evs))
        if self.horizon < 1:
            raise ModelError(f"horizon must be >= 1, got {self.horizon}")
        if base.shape != (self.horizon,):
            raise ModelError(f"base_load length {base.shape} does not match horizon {self.horizon}")
        if np.any(base < 0):
            raise ModelError("base_load entries must be non-negative")
        if base.size and self.load_cap < base.max():
            raise ModelError(f"load_cap {self.load_cap} below peak base load {base.max()}")
        for ev in self.evs:
            if ev.t_arr < 1 or ev.t_dep > self.horizon:
                raise ModelError(f"EV {ev.id}: window [{ev.t_arr}, {ev.t_dep}] outside [1, {self.horizon}]")

    @property
    def n_evs(self) -> int:
        return len(self.evs)

    @property
    def b_max_vector(self) -> np.ndarray:
        return np.array([ev.b_max for ev in self.evs])

    @property
    def demand_vector(self) -> np.ndarray:
        return np.array([ev.demand_kwh for ev in self.evs])

    def window_mask(self) -> np.ndarray:
        """Boolean (n_evs, horizon) matrix, True where the EV is parked."""
        mask = np.zeros((self.n_evs, self.horizon), dtype=bool)
        for row, ev in enumerate(self.evs):
            mask[row, ev.t_arr - 1 : ev.t_dep] = True
        return mask


class ChargingSchedule:
    """Per-EV per-slot charging amounts, row order matching Scenario.evs."""

    def __init__(self, amounts: np.ndarray):
        self.amounts = np.asarray(amounts, dtype=float)
        if self.amounts.ndim != 2:
            raise ModelError(f"amounts must be 2-D, got shape {self.amounts.shape}")

    @classmethod
    def zeros(cls, scenario: Scenario) -> "ChargingSchedule":
        return cls(np.zeros((scenario.n_evs, scenario.horizon)))

    @property
    def n_evs(self) -> int:
        return self.amounts.shape[0]

    @property
    def horizon(self) -> int:
        return self.amounts.shape[1]

    def slot_totals(self) -> np.ndarray:
        return self.amounts.sum(axis=0)

    def ev_totals(self) -> np.ndarray:
        return self.amounts.sum(axis=1)

    def __repr__(self) -> str:
        return f"ChargingSchedule(n_evs={self.n_evs}, horizon={self.horizon})"


@dataclass(frozen=True)
class SlotLoad:
    """Load decomposition of one slot."""

    l_ev: float
    l_b: float

    @property
    def total(self) -> float:
        return self.l_ev + self.l_b


def unit_price(l_ev: float, l_b: float, pm: PriceModel) -> float:
    """Unit electricity price at total load l_ev + l_b."""
    if l_ev < 0 or l_b < 0:
        raise ModelError(f"loads must be non-negative, got l_ev={l_ev}, l_b={l_b}")
    return pm.k0 + 2.0 * pm.k1 * (l_ev + l_b)


def slot_cost(b_vec, l_b: float, pm: PriceModel) -> float:
    """Electricity bill of one slot: the price integral from l_b to l_b + sum(b).

    Closed form: k0*S + k1*S^2 + 2*k1*l_b*S with S = sum(b_vec).
    """
    b = np.asarray(b_vec, dtype=float)
    if np.any(b < 0):
        raise ModelError("charging amounts must be non-negative")
    s = float(b.sum())
    return pm.k0 * s + pm.k1 * s * s + 2.0 * pm.k1 * l_b * s


def horizon_cost(schedule: ChargingSchedule, scenario: Scenario) -> float:
    """Total charging cost of the schedule over the scenario horizon."""
    if schedule.n_evs != scenario.n_evs or schedule.horizon != scenario.horizon:
        raise ModelError(
            f"schedule shape {schedule.amounts.shape} does not match scenario "
            f"({scenario.n_evs}, {scenario.horizon})"
        )
    s = schedule.slot_totals()
    lb = scenario.base_load
    pm = scenario.price
    return float(np.sum(pm.k0 * s + pm.k1 * s * s + 2.0 * pm.k1 * lb * s))


@dataclass(frozen=True)
class Violation:
    """One constraint violation found during schedule validation."""

    kind: str  # "demand" | "bound" | "window" | "load_cap"
    ev_id: int | None
    slot: int | None
    magnitude: float

    def __str__(self) -> str:
        where = []
        if self.ev_id is not None:
            where.append(f"ev={self.ev_id}")
        if self.slot is not None:
            where.append(f"slot={self.slot}")
        return f"{self.kind}({', '.join(where)}, magnitude={self.magnitude:.6g})"


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[Violation, ...]

    def max_demand_gap(self) -> float:
        gaps = [v.magnitude for v in self.violations if v.kind == "demand"]
        return max(gaps, default=0.0)


def validate_schedule(schedule: ChargingSchedule, scenario: Scenario, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check demand satisfaction, per-slot bounds, window containment, load cap.

    Violations are data, not errors; infeasible schedules yield a failed report.
    """
    if schedule.n_evs != scenario.n_evs or schedule.horizon != scenario.horizon:
        raise ModelError("schedule dimensions do not match scenario")
    violations: list[Violation] = []
    b = schedule.amounts
    for row, ev in enumerate(scenario.evs):
        gap = abs(b[row].sum() - ev.demand_kwh)
        if gap > tol:
            violations.append(Violation("demand", ev.id, None, gap))
        for col in range(scenario.horizon):
            t = col + 1
            amount = b[row, col]
            if not ev.parked(t):
                if abs(amount) > tol:
                    violations.append(Violation("window", ev.id, t, abs(amount)))
                continue
            if amount < -tol:
                violations.append(Violation("bound", ev.id, t, -amount))
            elif amount > ev.b_max + tol:
                violations.append(Violation("bound", ev.id, t, amount - ev.b_max))
    totals = schedule.slot_totals() + scenario.base_load
    for col in range(scenario.horizon):
        excess = totals[col] - scenario.load_cap
        if excess > tol:
            violations.append(Violation("load_cap", None, col + 1, excess))
    return ValidationReport(passed=not violations, violations=tuple(violations))
