"""Compare the Mayer synthesis with the brute-force grid oracle on random
swing instances, reporting the switch count of each synthesized winner."""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from swingski import models, synthesis
from swingski.errors import TargetUnreachable
from swingski.oracle import grid_oracle


@dataclass
class ComparisonConfig:
    r_minus: float = 1.0
    r_plus: float = 2.0
    instances: int = 12
    seed: int = 2024
    s_grid: int = 100
    oracle_step: float = 1e-3


def instances(cfg: ComparisonConfig):
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.instances):
        x1 = rng.uniform(-1.2, 1.2)
        x2 = rng.uniform(-4.0, 4.0)
        target = float(np.clip(x1 + rng.choice([-1, 1]) * rng.uniform(0.2, 0.8), -1.5, 1.5))
        yield np.array([x1, x2]), target


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=ComparisonConfig.instances)
    ap.add_argument("--seed", type=int, default=ComparisonConfig.seed)
    args = ap.parse_args()
    cfg = ComparisonConfig(instances=args.instances, seed=args.seed)
    params = models.SwingParams(cfg.r_minus, cfg.r_plus)
    pair = models.make_swing_pair(params).pair
    print(f"{'#':>3} {'x1':>8} {'x2':>8} {'target':>8} {'T_synth':>12} {'pattern':>8} {'T_oracle':>12} {'diff':>10} {'sec':>6}")
    for k, (x0, target) in enumerate(instances(cfg)):
        t0 = time.perf_counter()
        try:
            res = synthesis.solve_mayer(pair, x0, target, s_grid=cfg.s_grid)
        except TargetUnreachable:
            print(f"{k:3d} {x0[0]:8.4f} {x0[1]:8.4f} {target:8.4f} {'unreachable':>12}")
            continue
        orc = grid_oracle(params, x0, target, step=cfg.oracle_step, horizon=res.value + 0.5)
        pat = res.optimal.trajectory.pattern
        print(
            f"{k:3d} {x0[0]:8.4f} {x0[1]:8.4f} {target:8.4f} {res.value:12.8f} {pat:>8} "
            f"{orc.value:12.8f} {res.value - orc.value:10.2e} {time.perf_counter() - t0:6.1f}"
        )


if __name__ == "__main__":
    main()
