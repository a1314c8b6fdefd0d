"""Acceptance gate: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines appear in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from swingski import elliptic as el
from swingski import integrate as ig
from swingski import models as md
from swingski import synthesis as sy
from swingski import vecfield as vf
from swingski.errors import EventNotFound, NotMonotone, TargetUnreachable
from swingski.oracle import grid_oracle

RESULTS: dict = {}


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    RESULTS[n] = line
    print(line)


def rel_err(a, b, floor=0.0):
    return abs(a - b) / max(abs(b), floor)


# ------------------------------------------------------------------ 1


def test_closed_form_equivalence():
    t0 = time.perf_counter()
    params = md.SwingParams(1.0, 2.0)
    env = md.make_swing_pair(params)
    # generic calculus only: drop the analytic gradient so phi uses differences
    generic = dataclasses.replace(env.pair, grad_delta_b=None)
    rng = np.random.default_rng(11)
    pts = np.column_stack([rng.uniform(-2 * math.pi, 2 * math.pi, 1000), rng.uniform(-6, 6, 1000)])
    worst_a = max(rel_err(vf.delta_a(generic, x), md.swing_delta_a_closed(params, x)) for x in pts)
    worst_b = max(rel_err(vf.delta_b(generic, x), md.swing_delta_b_closed(params, x)) for x in pts)
    x1s = rng.uniform(math.pi / 2 + 0.01, 1.5 * math.pi - 0.01, 1000)
    locus = [np.array([t, md.swing_locus_x2(params, t, rng.choice([-1, 1]))]) for t in x1s]
    worst_phi = max(rel_err(vf.turnpike_control(generic, x), md.swing_phi_closed(params, x[0])) for x in locus)
    elapsed = time.perf_counter() - t0
    ok = max(worst_a, worst_b, worst_phi) <= 1e-8 and elapsed < 1.0
    report(1, ok, f"max rel err delta_a {worst_a:.1e}, delta_b {worst_b:.1e}, phi {worst_phi:.1e} (tol 1e-8); {elapsed:.2f}s (< 1s)")
    assert ok


# ------------------------------------------------------------------ 2


def _reaches_pi(params) -> bool:
    env = md.make_swing_pair(params)
    arcs = vf.find_turnpikes(env.pair, [math.pi / 2 + 0.05, math.pi, 0.0, 12.0], seed_cols=16, seed_rows=101)
    ends = [a.x1_range[1] for a in arcs if a.regular and a.is_turnpike]
    return bool(ends) and max(ends) >= math.pi - 1e-3


def test_turnpike_locus_and_golden_flip():
    t0 = time.perf_counter()
    params = md.SwingParams(1.0, 2.0)
    env = md.make_swing_pair(params)
    lo, hi = math.pi / 2 + 0.05, 1.5 * math.pi - 0.05
    worst, count = 0.0, 0
    for x2lo, x2hi, branch in ((0.0, 12.0, 1), (-12.0, 0.0, -1)):
        for arc in vf.find_turnpikes(env.pair, [lo, hi, x2lo, x2hi], seed_cols=16, seed_rows=101):
            for x1, x2 in arc.points:
                expected = md.swing_locus_x2(params, x1, branch)
                worst = max(worst, abs(x2 - expected) / max(1.0, abs(expected)))
                count += 1
    below = _reaches_pi(md.SwingParams(1.0, md.GOLDEN - 1e-3))
    above = _reaches_pi(md.SwingParams(1.0, md.GOLDEN + 1e-3))
    closed_flip = not md.regular_reaches_pi(md.SwingParams(1.0, md.GOLDEN - 1e-3)) and md.regular_reaches_pi(
        md.SwingParams(1.0, md.GOLDEN + 1e-3)
    )
    elapsed = time.perf_counter() - t0
    ok = count > 1000 and worst <= 1e-6 and (not below) and above and closed_flip and elapsed < 5.0
    report(
        2, ok,
        f"locus err {worst:.1e} over {count} traced points (tol 1e-6); reaches pi at golden-1e-3: {below}, "
        f"at golden+1e-3: {above}; {elapsed:.2f}s (< 5s)",
    )
    assert ok


# ------------------------------------------------------------------ 3


def _pmp_checks(pair, ext):
    residual = ig.pmp_residual(ext, pair)
    pairing_err, sign_bad, sign_n = 0.0, 0, 0
    for arc in ext.trajectory.arcs:
        if arc.duration <= 0 or arc.lam is None:
            continue
        ts = np.linspace(arc.t0, arc.t1, 100)
        var = ig.integrate_variational(pair, arc, [1.0, 0.3], arc.t0, arc.t1)
        vals = np.array([arc.at(t)[2:4] @ var.at(t) for t in ts])
        pairing_err = max(pairing_err, np.ptp(vals) / max(np.abs(vals).max(), 1e-300))
        rot = ig.rotation_angle(pair, arc, n=100)
        db = np.array([vf.normalized_delta_b(pair, arc.state(t)) for t in rot.t])
        strong = np.abs(db) > 1e-6
        sign_n += int(strong.sum())
        sign_bad += int(np.sum(np.sign(rot.rate[strong]) != np.sign(db[strong])))
    return residual, pairing_err, sign_bad, sign_n


def test_pmp_invariants():
    cases = []
    p12 = md.SwingParams(1.0, 2.0)
    pair12 = md.make_swing_pair(p12).pair
    for origin, target in (((0.933, -1.709), 0.269), ((-0.137, -1.776), 0.190), ((1.0, 2.0), 1.3)):
        cases.append((pair12, sy.solve_mayer(pair12, origin, target, s_grid=60).optimal))
    pz = md.SwingParams(0.1, 5.0)
    pairz = md.make_swing_pair(pz).pair
    res = sy.solve_mayer(pairz, el.turnpike_origin(pz, math.pi + 0.1), 1.5 * math.pi, s_grid=40, backbones=("turnpike",))
    cases.append((pairz, res.optimal))
    ski = md.make_ski_pair(md.SkiParams(c=0.05)).pair
    cases.append((ski, sy.solve_mayer(ski, (70.0, 200.0), 85.0, s_grid=60).optimal))
    worst_h, worst_pair, bad, total = 0.0, 0.0, 0, 0
    for pair, ext in cases:
        h, pe, sb, sn = _pmp_checks(pair, ext)
        worst_h, worst_pair = max(worst_h, h), max(worst_pair, pe)
        bad, total = bad + sb, total + sn
    ok = worst_h <= 1e-6 and worst_pair <= 1e-8 and bad == 0 and total > 0
    report(
        3, ok,
        f"{len(cases)} extremals: max |H+lambda0| {worst_h:.1e} (tol 1e-6), pairing drift {worst_pair:.1e} (tol 1e-8), "
        f"sgn(rate) != sgn(delta_b) at {bad}/{total} samples",
    )
    assert ok


# ------------------------------------------------------------------ 4


def test_elliptic_cross_validation():
    t0 = time.perf_counter()
    params = md.SwingParams(1.0, 2.0)
    pair = md.make_swing_pair(params).pair
    rng = np.random.default_rng(5)
    errs = []
    while len(errs) < 50:
        x0 = np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-6.0, 6.0)])
        if abs(x0[1]) < 0.2:
            continue
        stall = ig.Event("stall", lambda t, y: y[1], True, 0)
        arc = ig.integrate_arc(pair, x0, ig.BANG_PLUS, rng.uniform(0.05, 1.0), [stall])
        # skip arcs ending close to a turning point, where x1 = target is nearly tangent
        if arc.event == "stall" or arc.duration < 0.02 or abs(arc.end[1]) < 0.2:
            continue
        target = arc.end[0]
        try:
            closed = el.y_arc_time(params, x0, target)
        except NotMonotone:
            continue
        # ODE time from an independent event-located run
        ode = ig.integrate_arc(pair, x0, ig.BANG_PLUS, None, [ig.event_target_x1(target)], max_time=5.0)
        errs.append(rel_err(closed, ode.duration))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-7 and elapsed < 10.0
    report(4, ok, f"50 admissible Y-arcs: max rel err {max(errs):.1e} (tol 1e-7); {elapsed:.2f}s (< 10s)")
    assert ok


# ------------------------------------------------------------------ 5


def q_instances(seed=2024):
    rng = np.random.default_rng(seed)
    while True:
        x1 = rng.uniform(-1.2, 1.2)
        x2 = rng.uniform(-4.0, 4.0)
        target = float(np.clip(x1 + rng.choice([-1, 1]) * rng.uniform(0.2, 0.8), -1.5, 1.5))
        yield np.array([x1, x2]), target


@pytest.mark.slow
def test_oracle_optimality():
    t0 = time.perf_counter()
    params = md.SwingParams(1.0, 2.0)
    pair = md.make_swing_pair(params).pair
    compared, gaps, beaten, unreachable, never_worse = 0, [], 0, 0, True
    for origin, target in q_instances():
        try:
            res = sy.solve_mayer(pair, origin, target, s_grid=100)
        except TargetUnreachable:
            # needs more pumping than the synthesis enumerates
            unreachable += 1
            continue
        # a schedule slower than res.value cannot affect the comparison
        orc = grid_oracle(params, origin, target, horizon=res.value + 0.5)
        switches = len(res.optimal.trajectory.pattern) - 1
        never_worse &= res.value <= orc.value + 1e-4
        if switches <= 2:
            gaps.append(abs(res.value - orc.value))
            compared += 1
        else:
            # more switches than the oracle enumerates; it must not lose to it
            beaten += 1
        if compared == 10:
            break
    elapsed = time.perf_counter() - t0
    ok = max(gaps) <= 1e-4 and never_worse and elapsed < 300
    report(
        5, ok,
        f"10 Q instances within oracle class: max |T - T_oracle| {max(gaps):.1e} (tol 1e-4); "
        f"{beaten} further instances with >2 switches all at or below the oracle: {never_worse}; "
        f"{unreachable} skipped as unreachable; {elapsed:.0f}s (< 300s)",
    )
    assert ok


# ------------------------------------------------------------------ 6 / 7


@pytest.fixture(scope="module")
def nonexistence():
    t0 = time.perf_counter()
    scan = []
    for rm in (0.05, 0.1):
        for rp in (5.0, 10.0):
            for dx in (0.05, 0.1, 0.2):
                p = md.SwingParams(rm, rp)
                slope = el.t_of_s_derivative(p, el.turnpike_origin(p, math.pi + dx)).total
                scan.append((rm, rp, dx, slope))
    rm, rp, dx, slope = next(row for row in scan if row[3] < 0)
    params = md.SwingParams(rm, rp)
    pair = md.make_swing_pair(params).pair
    origin = el.turnpike_origin(params, math.pi + dx)
    res = sy.solve_mayer(pair, origin, 1.5 * math.pi, s_grid=100, backbones=("turnpike",), eps=1e-3)
    return dict(scan=scan, choice=(rm, rp, dx, slope), params=params, pair=pair, res=res,
                elapsed=time.perf_counter() - t0)


def test_bang_bang_approximation(nonexistence):
    pair, res = nonexistence["pair"], nonexistence["res"]
    z = [a for a in res.optimal.trajectory.arcs if a.label == ig.SINGULAR][0]
    rows = []
    for n in (8, 16, 32, 64):
        ap = sy.bang_bang_approximation(pair, z, n)
        rows.append((n, ap.deviation, ap.bound, ap.time_gap))
    within = all(dev <= bound for _, dev, bound, _ in rows)
    gaps = [r[3] for r in rows]
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    ok = within and monotone
    detail = ", ".join(f"n={n}: dev {d:.2e} <= {b:.2e}, |dT| {g:.1e}" for n, d, b, g in rows)
    report(6, ok, f"{detail}; |dT| nonincreasing: {monotone}")
    assert ok


def test_nonexistence_scenario(nonexistence):
    rm, rp, dx, slope = nonexistence["choice"]
    res = nonexistence["res"]
    sched = res.near_optimal_original
    negatives = sum(1 for row in nonexistence["scan"] if row[3] < 0)
    ok = (
        slope < 0
        and res.original_exists is False
        and res.contains_singular
        and sched is not None
        and 0.0 <= sched["time"] - res.value <= 1e-3
        and nonexistence["elapsed"] < 120
    )
    report(
        7, ok,
        f"{negatives}/12 scanned configs have dT/ds < 0; chosen r-={rm}, r+={rp}, x1=pi+{dx} (slope {slope:.3f}): "
        f"pattern {res.optimal.trajectory.pattern}, original_exists={res.original_exists}, "
        f"eps-schedule n={sched['n'] if sched else None} gap {sched['gap'] if sched else math.nan:.1e} (<= 1e-3); "
        f"{nonexistence['elapsed']:.0f}s (< 120s)",
    )
    assert ok


# ------------------------------------------------------------------ 8


def _forward_reachable(pair, x0, target):
    stall = ig.Event("stall", lambda t, y: y[1], True, -1)
    for label in (ig.BANG_PLUS, ig.BANG_MINUS):
        try:
            arc = ig.integrate_arc(pair, x0, label, None, [ig.event_target_x1(target), stall], max_time=60.0)
        except EventNotFound:
            continue
        if arc.event == "x1=target":
            return True
    return False


def test_ski_structure():
    # discriminant over sampled parameter sets that pass the regime conditions
    rng = np.random.default_rng(3)
    valid, disc_bad = 0, 0
    while valid < 200:
        p = md.SkiParams(
            c=float(rng.choice([-1, 1]) * rng.uniform(0.01, 0.2)),
            m=rng.uniform(40, 120), m_s=rng.uniform(0.5, 8), alpha=rng.uniform(0.1, 3),
            n=int(rng.integers(2, 30)), r_minus=rng.uniform(0.3, 0.6), r_plus=rng.uniform(0.8, 1.2),
        )
        if not all(p.validity().values()):
            continue
        valid += 1
        disc_bad += sum(p.disc_p(yp) >= 0 for yp in rng.uniform(-1, 1, 5) if abs(yp) > 1e-3)

    # locus of the c < 0 pair against the circle-trail formula
    neg = md.SkiParams(c=-0.05)
    env = md.make_ski_pair(neg)
    trail = env.extras["trail"]
    lo, hi = trail.domain
    arcs = vf.find_turnpikes(env.pair, [lo + 0.5, hi - 0.5, 1.0, 400.0], seed_cols=16, seed_rows=101)
    worst, count = 0.0, 0
    for arc in arcs:
        for s, pp in arc.points:
            expected = math.sqrt(md.ski_turnpike_p2_circle(neg, trail, s))
            worst = max(worst, abs(pp - expected) / expected)
            count += 1

    # restricted c > 0 problem: forward motion to a farther position
    pos = md.SkiParams(c=0.05)
    penv = md.make_ski_pair(pos)
    plo, phi_ = penv.extras["trail"].domain
    rng = np.random.default_rng(7)
    patterns = []
    while len(patterns) < 6:
        s0, p0 = rng.uniform(plo + 2, phi_ - 20), rng.uniform(20, 300)
        target = min(phi_ - 0.5, s0 + rng.uniform(3, 15))
        if not _forward_reachable(penv.pair, (s0, p0), target):
            continue
        res = sy.solve_mayer(penv.pair, (s0, p0), target, s_grid=60)
        p_min = min(a.x[:, 1].min() for a in res.optimal.trajectory.arcs)
        patterns.append((res.optimal.trajectory.pattern, res.original_exists, p_min))
    two = all(len(pat) - 1 <= 2 and set(pat) <= set("XY") and ex and pm > 0 for pat, ex, pm in patterns)
    ok = disc_bad == 0 and count > 100 and worst <= 1e-6 and two
    report(
        8, ok,
        f"disc(P) < 0 on {valid} valid parameter sets ({disc_bad} violations); c<0 locus vs circle formula "
        f"max rel err {worst:.1e} over {count} points (tol 1e-6); c>0 restricted winners "
        f"{[p for p, _, _ in patterns]} all bang-bang with <= 2 switches: {two}",
    )
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
