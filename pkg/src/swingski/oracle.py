"""Brute-force reference for swing Mayer problems.

Enumerates bang-bang schedules with at most two switches on a uniform grid
of switching times. The first two arcs are stepped with a vectorized
classical RK4; the hitting time of the final arc comes from the pendulum
first integral in closed form (Legendre F via scipy.special.ellipkinc).
Nothing here shares code with the adaptive integrator or the quadrature
used elsewhere, so it serves as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ellipkinc

from .models import SwingParams


def bang_constants(params: SwingParams, u: int) -> tuple[float, float]:
    """(alpha, kappa) with x1' = alpha x2, x2' = -kappa sin x1 for u = +-1."""
    r = params.r_minus if u > 0 else params.r_plus
    return 1.0 / r**2, params.g * r


def pendulum_hit_time(alpha: float, kappa: float, x1, x2, target: float) -> np.ndarray:
    """First time x1 = target along x1' = alpha x2, x2' = -kappa sin x1 (inf if never)."""
    x1 = np.atleast_1d(np.asarray(x1, float))
    x2 = np.atleast_1d(np.asarray(x2, float))
    w2 = alpha * kappa
    w = math.sqrt(w2)
    D = alpha**2 * x2**2 + 4 * w2 * np.sin(x1 / 2) ** 2
    out = np.full(x1.shape, np.inf)
    out[x1 == target] = 0.0
    todo = x1 != target
    with np.errstate(divide="ignore", invalid="ignore"):
        m = 4 * w2 / D
        rot = todo & (m < 1.0)
        if np.any(rot):
            ahead = (target - x1[rot]) * x2[rot] > 0
            Fc = ellipkinc(target / 2, m[rot])
            F0 = ellipkinc(x1[rot] / 2, m[rot])
            t = 2 / np.sqrt(D[rot]) * np.abs(Fc - F0)
            out[rot] = np.where(ahead, t, np.inf)
        lib = todo & (m >= 1.0)
        if np.any(lib):
            k = np.round(x1[lib] / (2 * math.pi))
            y = x1[lib] - 2 * math.pi * k
            c = target - 2 * math.pi * k
            a = np.sqrt(m[lib])
            inv = 1.0 / m[lib]
            ymax = 2 * np.arcsin(np.minimum(1.0, 1.0 / a))
            reach = np.abs(c) <= ymax

            def P(z):
                s = np.clip(a * np.sin(z / 2), -1.0, 1.0)
                return ellipkinc(np.arcsin(s), inv) / w

            Py, Pc, Pm = P(y), P(np.clip(c, -ymax, ymax)), P(ymax)
            sgn = np.sign(x2[lib])
            sgn = np.where(sgn == 0, -np.sign(y), sgn)
            fwd = np.where(c >= y, Pc - Py, 2 * Pm - Py - Pc)
            bwd = np.where(c <= y, Py - Pc, 2 * Pm + Py + Pc)
            t = np.where(sgn > 0, fwd, bwd)
            out[lib] = np.where(reach, t, np.inf)
    return out


def _rk4_step(x1, x2, alpha, kappa, h):
    def f(a1, a2):
        return alpha * a2, -kappa * np.sin(a1)

    k1 = f(x1, x2)
    k2 = f(x1 + h / 2 * k1[0], x2 + h / 2 * k1[1])
    k3 = f(x1 + h / 2 * k2[0], x2 + h / 2 * k2[1])
    k4 = f(x1 + h * k3[0], x2 + h * k3[1])
    return (
        x1 + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        x2 + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


@dataclass
class OracleResult:
    value: float
    schedule: tuple  # (u0, t_switch1, t_switch2) with None for unused switches
    evaluated: int


def grid_oracle(
    params: SwingParams,
    origin,
    target: float,
    step: float = 1e-3,
    horizon: Optional[float] = None,
    substeps: int = 1,
) -> OracleResult:
    """Minimum hitting time over <=2-switch bang-bang schedules, switch grid ``step``."""
    x0 = np.asarray(origin, float)
    if x0[0] == target:
        return OracleResult(0.0, (1, None, None), 1)
    best, sched, count = math.inf, None, 0
    for u0 in (1, -1):
        t0 = pendulum_hit_time(*bang_constants(params, u0), x0[0], x0[1], target)[0]
        count += 1
        if t0 < best:
            best, sched = t0, (u0, None, None)
    limit = horizon if horizon is not None else (best if np.isfinite(best) else 20.0)
    n1 = int(math.ceil(limit / step)) + 1
    h = step / substeps
    for u0 in (1, -1):
        a0, k0 = bang_constants(params, u0)
        a1, k1 = bang_constants(params, -u0)
        # first arc sampled on the switching grid
        xs1 = np.empty((n1, 2))
        p1, p2 = x0[0], x0[1]
        alive = n1
        for i in range(n1):
            xs1[i] = p1, p2
            if i * step >= min(best, limit):
                alive = i + 1
                break
            for _ in range(substeps):
                q1, q2 = _rk4_step(p1, p2, a0, k0, h)
                if (q1 - target) * (p1 - target) <= 0:
                    alive = min(alive, i + 1)
                p1, p2 = q1, q2
            if alive <= i + 1:
                alive = i + 1
                break
        xs1 = xs1[:alive]
        t1 = np.arange(alive) * step
        # one switch
        tt = t1 + pendulum_hit_time(a1, k1, xs1[:, 0], xs1[:, 1], target)
        count += alive
        j = int(np.argmin(tt))
        if tt[j] < best:
            best, sched = float(tt[j]), (u0, float(t1[j]), None)
        # two switches: step the second arc on all live first-arc states at once
        idx = np.arange(alive)
        q1, q2 = xs1[:, 0].copy(), xs1[:, 1].copy()
        t2 = 0.0
        while idx.size:
            t2 += step
            keep = np.ones(idx.size, dtype=bool)
            for _ in range(substeps):
                n1_, n2_ = _rk4_step(q1, q2, a1, k1, h)
                keep &= (n1_ - target) * (q1 - target) > 0
                q1, q2 = n1_, n2_
            keep &= t1[idx] + t2 < min(best, limit)
            idx, q1, q2 = idx[keep], q1[keep], q2[keep]
            if not idx.size:
                break
            tt = t1[idx] + t2 + pendulum_hit_time(a0, k0, q1, q2, target)
            count += idx.size
            j = int(np.argmin(tt))
            if tt[j] < best:
                best, sched = float(tt[j]), (u0, float(t1[idx[j]]), float(t1[idx[j]] + t2))
    return OracleResult(best, sched, count)
