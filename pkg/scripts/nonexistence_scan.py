"""Scan the turnpike-time slope dT/ds over a grid of swing parameters.

A negative slope means that sliding the start further along the turnpike
shortens the hitting time, so the auxiliary optimum is a limit that the
original system cannot realize. Prints a table and, optionally, solves
the first negative case.
"""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from swingski import elliptic, models, synthesis


@dataclass
class ScanConfig:
    r_minus: tuple = (0.05, 0.1)
    r_plus: tuple = (5.0, 10.0)
    offsets: tuple = (0.05, 0.1, 0.2)
    target: float = 1.5 * math.pi
    s_grid: int = 100


def scan(cfg: ScanConfig):
    rows = []
    for rm in cfg.r_minus:
        for rp in cfg.r_plus:
            for dx in cfg.offsets:
                p = models.SwingParams(rm, rp)
                slope = elliptic.t_of_s_derivative(p, elliptic.turnpike_origin(p, math.pi + dx)).total
                rows.append((rm, rp, dx, slope))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--solve", action="store_true", help="run the synthesis on the first negative case")
    args = ap.parse_args()
    cfg = ScanConfig()
    rows = scan(cfg)
    print(f"{'r-':>6} {'r+':>6} {'x1-pi':>6} {'dT/ds':>12}")
    for rm, rp, dx, slope in rows:
        print(f"{rm:6.3g} {rp:6.3g} {dx:6.3g} {slope:12.6g}")
    neg = [r for r in rows if r[3] < 0]
    print(f"{len(neg)}/{len(rows)} configurations with negative slope")
    if args.solve and neg:
        rm, rp, dx, _ = neg[0]
        p = models.SwingParams(rm, rp)
        pair = models.make_swing_pair(p).pair
        res = synthesis.solve_mayer(
            pair, elliptic.turnpike_origin(p, math.pi + dx), cfg.target,
            s_grid=cfg.s_grid, backbones=("turnpike",),
        )
        print(f"value {res.value:.10g}, pattern {res.optimal.trajectory.pattern}, original_exists={res.original_exists}")


if __name__ == "__main__":
    main()
