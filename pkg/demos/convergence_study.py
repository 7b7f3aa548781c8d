"""Learning-rate sensitivity of the aggregate actor-critic trainer.

Trains the aggregate policy twice with matched seeds — actor rate 1e-4 vs
1e-3 — at a strongly myopic discount, and prints the moving-average episode
reward of both. The small rate flattens out; the large rate converges faster
but swings harder (larger drawdowns). Curves are also written to
convergence_study.csv.

    python3 demos/convergence_study.py
"""

import csv
from dataclasses import replace

import numpy as np

from evchargelab.harness import benchmark_spec, make_sampler
from evchargelab.rl.train import TrainConfig, train_calc_stage1


def sparkline(series: np.ndarray, width: int = 60) -> str:
    blocks = "▁▂▃▄▅▆▇█"
    idx = np.linspace(0, series.size - 1, width).astype(int)
    sample = series[idx]
    lo, hi = sample.min(), sample.max()
    span = (hi - lo) or 1.0
    return "".join(blocks[int(7 * (v - lo) / span)] for v in sample)


def main():
    spec = replace(benchmark_spec(), n_evs=10)
    sampler = make_sampler(spec)
    curves = {}
    for beta_a in (1e-4, 1e-3):
        cfg = TrainConfig(beta_a=beta_a, beta_c=1e-3, discount=0.01, k_max=60_000,
                          n_workers=2, seed=9)
        curves[beta_a] = train_calc_stage1(sampler, cfg).moving_rewards()

    for beta_a, mr in curves.items():
        drawdown = np.max(np.maximum.accumulate(mr) - mr)
        print(f"actor rate {beta_a:g}: final moving reward {mr[-1]:.1f}, "
              f"max drawdown {drawdown:.2f}")
        print(f"  {sparkline(mr)}")

    with open("convergence_study.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode"] + [f"beta_a_{b:g}" for b in curves])
        size = min(len(v) for v in curves.values())
        for i in range(size):
            writer.writerow([i] + [repr(float(curves[b][i])) for b in curves])
    print("\nwrote convergence_study.csv")


if __name__ == "__main__":
    main()
