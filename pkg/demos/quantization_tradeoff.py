"""Action quantization trade-off for the tabular Q-learning baseline.

The discrete baseline picks charging rates from an evenly spaced grid.
More levels mean finer control (lower cost) but a bigger table and slower
training. This sweeps the level count on a 10-EV community:

    python3 demos/quantization_tradeoff.py
"""

import time
from dataclasses import replace

import numpy as np

from evchargelab.baselines import QLearnConfig, aem_schedule, aem_train
from evchargelab.harness import BENCHMARK_SEEDS, benchmark_spec, build_scenario, make_sampler
from evchargelab.model import horizon_cost


def main():
    spec = replace(benchmark_spec(), n_evs=10)
    sampler = make_sampler(spec)
    print(f"{'levels':>7} {'mean cost':>10} {'train s':>8}")
    for levels in (5, 33, 330, 3300):
        t0 = time.time()
        table = aem_train(sampler, QLearnConfig(episodes=300, seed=1), levels)
        wall = time.time() - t0
        costs = []
        for seed in BENCHMARK_SEEDS:
            sc, _ = build_scenario(spec, seed)
            costs.append(horizon_cost(aem_schedule(table, sc), sc))
        print(f"{levels:>7} {np.mean(costs):>10.2f} {wall:>8.1f}")
    print("\nCost falls (or holds) as the grid refines while training time grows —")
    print("the argument for continuous-action policies at scale.")


if __name__ == "__main__":
    main()
