"""Sweep r+/r- across the golden ratio and record whether the regular
turnpike of the swing reaches x1 = pi."""
from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from swingski import models


@dataclass
class SweepConfig:
    r_minus: float = 1.0
    half_width: float = 0.05
    points: int = 21


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r-minus", type=float, default=SweepConfig.r_minus)
    ap.add_argument("--points", type=int, default=SweepConfig.points)
    args = ap.parse_args()
    cfg = SweepConfig(r_minus=args.r_minus, points=args.points)
    ratios = models.GOLDEN + np.linspace(-cfg.half_width, cfg.half_width, cfg.points)
    print(f"{'ratio':>10} {'phi(pi)':>12} {'reaches pi':>10}")
    for q in ratios:
        p = models.SwingParams(cfg.r_minus, q * cfg.r_minus)
        print(f"{q:10.6f} {models.swing_phi_limit_pi(p):12.8f} {str(models.regular_reaches_pi(p)):>10}")
    print(f"golden ratio {models.GOLDEN:.10f}")


if __name__ == "__main__":
    main()
