"""Why timing matters: the clairvoyant schedule vs. eager and rolling online.

A tiny community with a quadratic price on total load. Three EVs arrive in
a burst; an eager charger slams them all into the arrival slots, the rolling
online solver spreads whatever it currently knows about, and the offline
oracle (which sees the future) spreads everything perfectly. Run with:

    python3 demos/oracle_vs_online.py
"""

import numpy as np

from evchargelab.baselines import ec_schedule, oa_schedule
from evchargelab.model import EVProfile, PriceModel, Scenario, horizon_cost
from evchargelab.solvers import solve_offline


def bar(value: float, scale: float = 2.0) -> str:
    return "#" * int(round(value * scale))


def main():
    horizon = 8
    evs = tuple(
        EVProfile(id=i, t_arr=arr, t_dep=dep, demand_kwh=6.0, b_max=3.0,
                  capacity_kwh=24.0, soc_init=0.0)
        for i, (arr, dep) in enumerate([(2, 6), (2, 7), (5, 8)])
    )
    scenario = Scenario(
        horizon=horizon,
        base_load=np.full(horizon, 2.0),
        evs=evs,
        price=PriceModel(k0=0.05, k1=0.02),
    )

    runs = [
        ("eager (charge on arrival)", ec_schedule(scenario)),
        ("rolling online re-solve", oa_schedule(scenario)),
        ("offline oracle", solve_offline(scenario).schedule),
    ]

    print("Three EVs, 6 kWh each; slot price grows with the square of total load.\n")
    for name, schedule in runs:
        totals = schedule.slot_totals() + scenario.base_load
        print(f"{name}: cost {horizon_cost(schedule, scenario):.3f}, "
              f"peak {totals.max():.1f} kWh")
        for t, load in enumerate(totals, start=1):
            print(f"  slot {t}: {load:5.2f} {bar(load)}")
        print()
    print("The oracle's flat profile is the lower bound every online policy chases;")
    print("the rolling solver recovers most of the gap except for arrivals it has")
    print("not seen yet, and eager charging pays the full quadratic penalty.")


if __name__ == "__main__":
    main()
