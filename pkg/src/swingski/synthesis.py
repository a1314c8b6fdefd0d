"""Candidate extremal families, Mayer-problem selection and bang-bang approximation.

The family from an origin follows a backbone arc (a bang arc or a singular
arc on a regular turnpike) for a time s, then switches. The covector at the
switch is the unit vector orthogonal to G oriented so that the new control
maximizes the Hamiltonian with H >= 0. Roots of the transversality residual
psi(s) = lambda_2 at the target select the Mayer optimum.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, root

from .errors import (
    BackboneLeavesDomain,
    EventNotFound,
    LeftTurnpike,
    NoIntersection,
    NoSwitchSeed,
    NoTransversalRoot,
    NotOrdinary,
    RegionNotClassified,
    StepFailure,
    TargetUnreachable,
)
from .integrate import (
    BANG_MINUS,
    BANG_PLUS,
    SINGULAR,
    Arc,
    Extremal,
    Trajectory,
    bang_label,
    event_target_x1,
    follow_extremal,
    hamiltonian,
    integrate_arc,
    integrate_covector,
)
from .models import SwingParams, feedback_v
from .vecfield import (
    DEGENERATE,
    ORDINARY,
    AffinePair,
    PlanarField,
    classify_point,
    delta_a,
    lie_bracket,
)

PSI_TOL = 1e-6
TIE_TOL = 1e-9


def in_q(x) -> bool:
    return abs(x[0]) <= math.pi / 2


def _prunes(pair: AffinePair, origin) -> bool:
    """Axis-crossing pruning applies to the swing strip |x1| <= pi/2 only."""
    return pair.name == "swing" and in_q(origin)


# ---------------------------------------------------------------- structure


@dataclass
class Verdict:
    admissible: bool
    region: str
    pattern: str
    reason: str = ""


def _region_kind(pair: AffinePair, points) -> str:
    signs = set()
    for x in points:
        pc = classify_point(pair, x)
        if pc.tag == DEGENERATE:
            raise RegionNotClassified(f"degenerate point {np.round(x, 6).tolist()} in region")
        if pc.tag != ORDINARY:
            return "near-ordinary"
        signs.add(np.sign(pc.f))
    if signs == {1.0}:
        return "ordinary f>0"
    if signs == {-1.0}:
        return "ordinary f<0"
    return "near-ordinary"


def structure_check(pair: AffinePair, trajectory: Trajectory, region: Optional[Sequence[float]] = None, samples: int = 25) -> Verdict:
    """Is the arc pattern (time order, e.g. 'XY') locally admissible for optimality?

    ``region`` is a rectangle (x1min, x1max, x2min, x2max) sampled on a grid;
    without one the trajectory's own samples are classified.
    """
    pattern = trajectory.pattern
    if region is not None:
        g1 = np.linspace(region[0], region[1], samples)
        g2 = np.linspace(region[2], region[3], samples)
        pts = [np.array([a, b]) for a in g1 for b in g2]
    else:
        pts = []
        for arc in trajectory.arcs:
            if arc.duration > 0:
                pts.extend(arc.sample(samples)[1][:, :2])
    kind = _region_kind(pair, pts)
    if kind == "ordinary f>0":
        ok = pattern in ("", "X", "Y", "XY")
        return Verdict(ok, kind, pattern, "" if ok else "f>0 allows X, Y or X then Y")
    if kind == "ordinary f<0":
        ok = pattern in ("", "X", "Y", "YX")
        return Verdict(ok, kind, pattern, "" if ok else "f<0 allows X, Y or Y then X")
    ok = len(pattern) <= 5 and set(pattern) <= set("XYZ")
    return Verdict(ok, kind, pattern, "" if ok else "more than five arcs near a nonordinary point")


# ------------------------------------------------------------------ family


@dataclass
class Candidate:
    s: float
    extremal: Optional[Extremal]
    hit_time: Optional[float]
    psi: float
    valid: bool = True
    note: str = ""
    pruned: bool = False

    @property
    def switch_points(self) -> list:
        if self.extremal is None:
            return []
        return [a.start for a in self.extremal.trajectory.arcs[1:] if a.duration > 0]


@dataclass
class CandidateFamily:
    origin: np.ndarray
    backbone: Arc
    kind: str
    candidates: list = field(default_factory=list)


@dataclass
class SwitchingCurve:
    points: np.ndarray
    quadrant: list


def _perp_unit(v) -> np.ndarray:
    n = np.array([-v[1], v[0]], dtype=float)
    return n / np.linalg.norm(n)


def seed_covector(pair: AffinePair, x, u_new: float) -> Optional[np.ndarray]:
    """Unit covector orthogonal to G(x) with H >= 0 whose switching function
    starts moving towards sgn(u_new); None when no orientation qualifies."""
    Gx = pair.G(x)
    if np.linalg.norm(Gx) <= 1e-14:
        raise NoSwitchSeed(f"G vanishes at {np.asarray(x).tolist()}")
    lam = _perp_unit(Gx)
    Fx, B = pair.F(x), lie_bracket(pair, x)
    scale = np.linalg.norm(Fx) + 1e-300
    for sgn in (1.0, -1.0):
        l = sgn * lam
        if l @ Fx >= -1e-12 * scale and u_new * (l @ B) > 0:
            return l
    return None


def _axis_crossings(pair: AffinePair, arc: Arc, n: int = 400) -> int:
    if arc.duration <= 0:
        return 0
    _, ys = arc.sample(n)
    da = np.array([delta_a(pair, y[:2]) for y in ys])
    da = da[np.abs(da) > 1e-12 * (1 + np.abs(da).max())]
    return int(np.sum(np.sign(da[1:]) != np.sign(da[:-1])))


def lemma_axis_prune(pair: AffinePair, extremal: Extremal) -> bool:
    """True when some bang arc inside Q meets the axis locus twice without switching."""
    for arc in extremal.trajectory.arcs:
        if arc.label in (BANG_PLUS, BANG_MINUS) and in_q(arc.start) and in_q(arc.end):
            if _axis_crossings(pair, arc) >= 2:
                return True
    return False


def _max_sign_violation(pair, arc: Arc) -> float:
    """Largest wrong-sign switching value on a bang arc, relative to |lambda||G|."""
    u = 1.0 if arc.label == BANG_PLUS else -1.0
    worst = 0.0
    for y in arc.y:
        Gx = pair.G(y[:2])
        scale = np.linalg.norm(y[2:4]) * np.linalg.norm(Gx) + 1e-300
        worst = max(worst, -u * float(y[2:4] @ Gx) / scale)
    return worst


def _psi(ext: Extremal) -> float:
    return float(ext.trajectory.arcs[-1].lam[-1][1])


def _bang_candidate(pair, backbone: Arc, s: float, target, max_switches, max_time, prune_q) -> Candidate:
    u_b = 1.0 if backbone.label == BANG_PLUS else -1.0
    u_new = -u_b
    x_s = backbone.state(s)
    lam_s = seed_covector(pair, x_s, u_new)
    if lam_s is None:
        return Candidate(s, None, None, math.nan, False, "no admissible covector orientation")
    events = [event_target_x1(target)] if target is not None else []
    arcs = []
    if s > 0:
        lam0 = integrate_covector(pair, backbone, lam_s, "backward", t_start=s).at(backbone.t0)
        first = integrate_arc(pair, backbone.start, backbone.label, s, lam0=lam0)
        if _max_sign_violation(pair, first) > 1e-7:
            return Candidate(s, None, None, math.nan, False, "backbone not maximizing before s")
        arcs.append(first)
        start, lam_start = first.end, first.lam[-1]
    else:
        start, lam_start = x_s, lam_s
    ext, stop = follow_extremal(
        pair, start, lam_start, u_new, events, t0=s, max_time=max_time, max_switches=max_switches
    )
    traj = Trajectory(arcs + ext.trajectory.arcs)
    lam_first = traj.arcs[0].lam[0]
    H0 = hamiltonian(pair, lam_first, traj.start, float(traj.arcs[0].u[0]))
    full = Extremal(traj, lambda0=-H0)
    if target is not None and stop != "x1=target":
        return Candidate(s, full, None, math.nan, False, "target not reached")
    cand = Candidate(s, full, traj.arcs[-1].t1, _psi(full) if target is not None else math.nan)
    if prune_q and lemma_axis_prune(pair, full):
        cand.pruned = True
        cand.note = "bang arc crosses the axes twice without switching"
    return cand


def _no_switch_candidate(pair, backbone: Arc, target) -> Optional[Candidate]:
    if backbone.event != "x1=target":
        return None
    end = backbone.end
    v = pair.field(end, float(backbone.u[-1]))
    lam_T = np.array([math.copysign(1.0, v[0]), 0.0])
    path = integrate_covector(pair, backbone, lam_T, "backward")
    lam0 = path.at(backbone.t0)
    arc = integrate_arc(pair, backbone.start, backbone.label, backbone.duration, lam0=lam0)
    if _max_sign_violation(pair, arc) > 1e-7:
        return None
    H0 = hamiltonian(pair, arc.lam[0], arc.start, float(arc.u[0]))
    ext = Extremal(Trajectory([arc]), -H0)
    return Candidate(arc.t1, ext, arc.t1, 0.0, True, "no switch")


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def make_backbone(pair, origin, kind: str, target=None, max_time: float = 20.0, prune_q: bool = True) -> Arc:
    events = [event_target_x1(target)] if target is not None else []
    if kind in ("Y", "X"):
        label = BANG_PLUS if kind == "Y" else BANG_MINUS
        try:
            arc = integrate_arc(pair, origin, label, None, events, max_time=max_time)
        except EventNotFound:
            arc = integrate_arc(pair, origin, label, max_time)
        if prune_q and in_q(origin):
            # beyond the second axis crossing no switch-free extension can be optimal
            da = [delta_a(pair, y) for y in arc.sample(800)[1][:, :2]]
            ts = np.linspace(arc.t0, arc.t1, 800)
            cross = [ts[i + 1] for i in range(len(da) - 1) if np.sign(da[i]) != np.sign(da[i + 1]) and da[i] != 0]
            if len(cross) >= 2:
                arc = integrate_arc(pair, origin, label, float(cross[1]))
        return arc
    if kind == "turnpike":
        try:
            arc = integrate_arc(pair, origin, SINGULAR, None, events, max_time=max_time, on_irregular="stop")
        except EventNotFound:
            arc = integrate_arc(pair, origin, SINGULAR, max_time, on_irregular="stop")
        except LeftTurnpike as exc:
            raise BackboneLeavesDomain(str(exc)) from exc
        if arc.duration <= 0:
            raise BackboneLeavesDomain("turnpike backbone has zero length")
        return arc
    raise ValueError(f"unknown backbone kind {kind!r}")


def build_family(
    pair: AffinePair,
    origin,
    backbone_kind: str = "Y",
    s_grid=200,
    target: Optional[float] = None,
    *,
    max_switches: int = 6,
    max_time: float = 20.0,
    jobs: int = 1,
) -> CandidateFamily:
    """Switch off the backbone at each s of ``s_grid`` (count or explicit array)."""
    origin = np.asarray(origin, float)
    prune_q = _prunes(pair, origin)
    backbone = make_backbone(pair, origin, backbone_kind, target, max_time, prune_q)
    if np.isscalar(s_grid):
        end = backbone.duration * (1 - 1e-9) if backbone_kind == "turnpike" else backbone.duration
        s_vals = np.linspace(0.0, end, int(s_grid))
    else:
        s_vals = np.asarray(s_grid, float)
    if np.any(s_vals < 0) or np.any(s_vals > backbone.duration + 1e-12):
        raise BackboneLeavesDomain("s outside the backbone's domain")
    fam = CandidateFamily(origin, backbone, backbone_kind)
    if backbone_kind == "turnpike":
        fn = lambda s: _turnpike_candidates(pair, backbone, float(s), target, max_time)
        fam.candidates = [c for group in _parallel_map(fn, s_vals, jobs) for c in group]
    else:
        fn = lambda s: _bang_candidate(pair, backbone, float(s), target, max_switches, max_time, prune_q)
        fam.candidates = _parallel_map(fn, s_vals, jobs)
    return fam


def _turnpike_candidates(pair, z_arc: Arc, s: float, target, max_time) -> list:
    """Leave the turnpike at s with Y (pattern Z Y) or with X then Y (pattern Z X Y)."""
    x_s = z_arc.state(s)
    Gx = pair.G(x_s)
    if np.linalg.norm(Gx) <= 1e-14:
        raise NoSwitchSeed("G vanishes on the turnpike")
    lam = _perp_unit(Gx)
    if lam @ pair.F(x_s) < 0:
        lam = -lam
    arcs0 = []
    if s > 0:
        lam0 = integrate_covector(pair, z_arc, lam, "backward", t_start=s).at(z_arc.t0)
        arcs0 = [integrate_arc(pair, z_arc.start, SINGULAR, s, lam0=lam0, on_irregular="stop")]
        if arcs0[0].t1 < s - 1e-9:
            return [Candidate(s, None, None, math.nan, False, "turnpike ends before s")]
        lam = arcs0[0].lam[-1]
        x_s = arcs0[0].end
    events = [event_target_x1(target)]
    out = []
    try:
        y_arc = integrate_arc(pair, x_s, BANG_PLUS, None, events, lam0=lam, t0=s, max_time=max_time)
        traj = Trajectory(arcs0 + [y_arc])
        H0 = hamiltonian(pair, traj.arcs[0].lam[0], traj.start, float(traj.arcs[0].u[0]))
        ext = Extremal(traj, -H0)
        ok = _max_sign_violation(pair, y_arc) <= 1e-6
        out.append(Candidate(s, ext, y_arc.t1, _psi(ext), ok, "ZY" if ok else "ZY not maximizing"))
    except EventNotFound:
        out.append(Candidate(s, None, None, math.nan, False, "ZY misses target"))
    try:
        ext2, stop = follow_extremal(pair, x_s, lam, -1.0, events, t0=s, max_time=max_time, max_switches=1)
        if stop == "x1=target" and ext2.trajectory.pattern == "XY":
            traj = Trajectory(arcs0 + ext2.trajectory.arcs)
            H0 = hamiltonian(pair, traj.arcs[0].lam[0], traj.start, float(traj.arcs[0].u[0]))
            ext = Extremal(traj, -H0)
            out.append(Candidate(s, ext, traj.arcs[-1].t1, _psi(ext), True, "ZXY"))
    except (StepFailure, EventNotFound):
        pass
    return out


def switching_curves(family: CandidateFamily) -> list[SwitchingCurve]:
    """Polylines through the k-th switching points of the family's candidates."""
    by_k: dict[int, list] = {}
    for c in family.candidates:
        for k, p in enumerate(c.switch_points):
            by_k.setdefault(k, []).append(p)
    out = []
    for k in sorted(by_k):
        pts = np.array(by_k[k])
        quad_tags = [f"{'+' if p[0] >= 0 else '-'}{'+' if p[1] >= 0 else '-'}" for p in pts]
        out.append(SwitchingCurve(pts, quad_tags))
    return out


# ------------------------------------------------------------------- Mayer


@dataclass
class BangBangApprox:
    trajectory: Trajectory
    n: int
    deviation: float
    bound: float
    M: float
    time: float
    z_time: float

    @property
    def time_gap(self) -> float:
        return abs(self.time - self.z_time)


@dataclass
class SynthesisResult:
    optimal: Optional[Extremal]
    value: float
    contains_singular: bool
    original_exists: bool
    near_optimal_original: Optional[dict] = None
    roots: list = field(default_factory=list)
    multiple_roots: bool = False
    transversality_residual: float = 0.0
    table: list = field(default_factory=list)  # (family, s, t_s, psi)
    oracle_gap: Optional[float] = None

    def to_json(self) -> dict:
        arcs = []
        if self.optimal is not None:
            arcs = [
                {"label": a.label, "t0": a.t0, "t1": a.t1}
                for a in self.optimal.trajectory.arcs
                if a.duration > 0
            ]
        out = {
            "value": self.value,
            "original_exists": self.original_exists,
            "contains_singular": self.contains_singular,
            "arcs": arcs,
            "transversality_residual": self.transversality_residual,
            "roots": self.roots,
            "multiple_roots": self.multiple_roots,
        }
        if self.oracle_gap is not None:
            out["oracle_gap"] = self.oracle_gap
        if self.near_optimal_original is not None:
            out["near_optimal_original"] = self.near_optimal_original
        return out


def _refine(evalc, lo: Candidate, hi: Candidate):
    """brentq on psi between two valid grid candidates of equal pattern."""
    memo = {}

    def psi(s):
        if s not in memo:
            memo[s] = evalc(s)
        c = memo[s]
        if not c.valid or c.extremal is None:
            raise ValueError("invalid candidate inside bracket")
        return c.psi

    memo[lo.s], memo[hi.s] = lo, hi
    try:
        s = brentq(psi, lo.s, hi.s, xtol=1e-13, rtol=1e-13, maxiter=100)
    except ValueError:
        return None
    c = memo.get(s) or evalc(s)
    if not c.valid or abs(c.psi) > PSI_TOL:
        return None
    return c


def _pattern(c: Candidate) -> str:
    return c.extremal.trajectory.pattern if c.extremal is not None else ""


def _family_roots(family: CandidateFamily, evalc) -> list:
    cands = [c for c in family.candidates if c.valid and not c.pruned and c.extremal is not None]
    roots = [c for c in cands if c.psi == 0.0]
    for a, b in zip(cands, cands[1:]):
        if np.sign(a.psi) * np.sign(b.psi) < 0 and _pattern(a) == _pattern(b):
            r = _refine(evalc, a, b)
            if r is not None and not r.pruned:
                roots.append(r)
    return roots


def solve_mayer(
    pair: AffinePair,
    origin,
    target_x1: float,
    s_grid=200,
    *,
    backbones: Sequence[str] = ("Y", "X"),
    max_switches: int = 6,
    max_time: float = 20.0,
    jobs: int = 1,
    eps: float = 1e-3,
    approximate: bool = True,
) -> SynthesisResult:
    """Minimum-time steering of ``origin`` to the line x1 = target_x1."""
    origin = np.asarray(origin, float)
    if origin[0] == target_x1:
        arc = integrate_arc(pair, origin, BANG_PLUS, 0.0, lam0=np.array([1.0, 0.0]))
        ext = Extremal(Trajectory([arc]), 0.0)
        return SynthesisResult(ext, 0.0, False, True)

    roots, table, reached = [], [], False
    all_cands = []
    for kind in backbones:
        try:
            fam = build_family(pair, origin, kind, s_grid, target_x1, max_switches=max_switches, max_time=max_time, jobs=jobs)
        except (BackboneLeavesDomain, NoSwitchSeed):
            continue
        for c in fam.candidates:
            table.append((kind, c.s, c.hit_time, c.psi, _pattern(c)))
            reached |= c.hit_time is not None
        all_cands.extend(c for c in fam.candidates if c.valid and c.extremal is not None)
        if kind == "turnpike":
            evalc_z = _turnpike_eval(pair, fam.backbone, target_x1, max_time)
            for note in ("ZY", "ZXY"):
                sub = CandidateFamily(fam.origin, fam.backbone, kind, [c for c in fam.candidates if c.note == note])
                roots.extend(_family_roots(sub, lambda s, n=note: evalc_z(s, n)))
        else:
            prune_q = _prunes(pair, origin)
            evalc = lambda s, b=fam.backbone: _bang_candidate(pair, b, s, target_x1, max_switches, max_time, prune_q)
            roots.extend(_family_roots(fam, evalc))
            ns = _no_switch_candidate(pair, fam.backbone, target_x1)
            if ns is not None:
                reached = True
                roots.append(ns)
    if not reached:
        raise TargetUnreachable(f"no candidate reaches x1 = {target_x1}")
    if not roots:
        psis = [c.psi for c in all_cands if np.isfinite(c.psi)]
        best = min(all_cands, key=lambda c: c.hit_time if c.hit_time is not None else math.inf, default=None)
        raise NoTransversalRoot(
            "psi(s) has no admissible root",
            psi_endpoints=(psis[0], psis[-1]) if psis else None,
            best=None if best is None else (best.s, best.hit_time),
        )
    roots.sort(key=lambda c: (c.hit_time, len(_pattern(c))))
    win = roots[0]
    for c in roots[1:]:
        if abs(c.hit_time - win.hit_time) <= TIE_TOL and len(_pattern(c)) < len(_pattern(win)):
            win = c
    distinct = {round(c.hit_time, 7) for c in roots}
    contains_z = "Z" in _pattern(win)
    res = SynthesisResult(
        optimal=win.extremal,
        value=float(win.hit_time),
        contains_singular=contains_z,
        original_exists=not contains_z,
        roots=[{"s": c.s, "time": c.hit_time, "pattern": _pattern(c), "psi": c.psi} for c in roots],
        multiple_roots=len(distinct) > 1,
        transversality_residual=abs(win.psi),
        table=table,
    )
    if contains_z and approximate:
        res.near_optimal_original = epsilon_schedule(pair, win.extremal, eps)
    return res


def _turnpike_eval(pair, z_arc, target, max_time):
    def ev(s, note):
        for c in _turnpike_candidates(pair, z_arc, s, target, max_time):
            if c.note == note:
                return c
        return Candidate(s, None, None, math.nan, False, "missing")

    return ev


# ------------------------------------------------------- bang-bang approx


def _flow(pair, x, u, tau):
    if tau <= 0.0:
        return np.asarray(x, float)
    r = solve_ivp(lambda t, y: pair.field(y, u), (0.0, tau), np.asarray(x, float), method="DOP853", rtol=1e-12, atol=1e-13)
    return r.y[:, -1]


def _polyline(pair, x, u, span, n):
    r = solve_ivp(
        lambda t, y: pair.field(y, u), (0.0, span), np.asarray(x, float), method="DOP853",
        rtol=1e-11, atol=1e-13, t_eval=np.linspace(0.0, span, n),
    )
    return r.t, r.y.T


def _first_crossing(p, q):
    """Index pairs and fractions of the first segment of p (in order) crossing q."""
    a0, a1 = p[:-1], p[1:]
    b0, b1 = q[:-1], q[1:]
    da, db = a1 - a0, b1 - b0
    for i in range(len(a0)):
        w = b0 - a0[i]
        den = da[i, 0] * db[:, 1] - da[i, 1] * db[:, 0]
        ok = np.abs(den) > 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            s_ = (w[:, 0] * db[:, 1] - w[:, 1] * db[:, 0]) / den
            t_ = (w[:, 0] * da[i, 1] - w[:, 1] * da[i, 0]) / den
        hit = ok & (s_ >= 0) & (s_ <= 1) & (t_ >= 0) & (t_ <= 1)
        if np.any(hit):
            j = int(np.flatnonzero(hit)[0])
            return i, float(s_[j]), j, float(t_[j])
    return None


def _join(pair, a, b, dt, samples=400):
    """Times (tau_y, tau_x): the Y-curve from a first meets the X-curve ending at b."""
    # the X-curve through b is followed backwards, i.e. the forward flow of -X
    back = AffinePair(
        PlanarField(lambda x: -pair.F(x), lambda x: -pair.F.jac(x)),
        PlanarField(lambda x: -pair.G(x), lambda x: -pair.G.jac(x)),
    )
    for span in (2 * dt, 8 * dt):
        ty, py = _polyline(pair, a, 1.0, span, samples)
        tx, px = _polyline(back, b, -1.0, span, samples)
        hit = _first_crossing(py, px)
        if hit is None:
            continue
        i, fa, j, fb = hit
        guess = np.array([ty[i] + fa * (ty[i + 1] - ty[i]), tx[j] + fb * (tx[j + 1] - tx[j])])

        def res(tt):
            return _flow(pair, a, 1.0, tt[0]) - _flow(back, b, -1.0, tt[1])

        sol = root(res, guess, method="hybr", tol=1e-14)
        if sol.success and np.all(sol.x >= -1e-12) and np.linalg.norm(res(sol.x)) <= 1e-9:
            return np.maximum(sol.x, 0.0)
        if np.linalg.norm(res(guess)) <= 1e-9:
            return guess
    raise NoIntersection("Y and backward X arcs do not meet; increase n")


def bang_bang_approximation(pair: AffinePair, z_arc: Arc, n: int, margin: float = 0.1) -> BangBangApprox:
    """Replace a singular arc by n Y-then-X pieces through equally spaced points.

    The deviation bound uses M = 2 max(|F| + |G|) over the bounding box of the
    arc enlarged by ``margin``.
    """
    if z_arc.label != SINGULAR:
        raise ValueError("expected a singular arc")
    T = z_arc.duration
    ts = np.linspace(z_arc.t0, z_arc.t1, n + 1)
    knots = [z_arc.state(t) for t in ts]
    sched = []
    for i in range(n):
        t1, t2 = _join(pair, knots[i], knots[i + 1], T / n)
        sched += [(BANG_PLUS, float(t1)), (BANG_MINUS, float(t2))]
    traj = _chain(pair, knots[0], sched, z_arc.t0)
    # sup deviation at common times
    grid = np.linspace(z_arc.t0, z_arc.t0 + max(traj.T, T), 40 * n + 1)
    dev = max(np.linalg.norm(traj.state(min(t, z_arc.t0 + traj.T)) - z_arc.state(min(t, z_arc.t1))) for t in grid)
    xs = z_arc.sample(200)[1][:, :2]
    lo, hi = xs.min(axis=0) - margin, xs.max(axis=0) + margin
    g1, g2 = np.meshgrid(np.linspace(lo[0], hi[0], 41), np.linspace(lo[1], hi[1], 41))
    M = 2 * max(np.linalg.norm(pair.F(p)) + np.linalg.norm(pair.G(p)) for p in zip(g1.ravel(), g2.ravel()))
    return BangBangApprox(traj, n, float(dev), T / n * M, float(M), traj.T, T)


def _chain(pair, x0, sched, t0):
    arcs, x, t = [], np.asarray(x0, float), t0
    for label, dur in sched:
        a = integrate_arc(pair, x, label, dur, t0=t, rtol=1e-11, atol=1e-13)
        arcs.append(a)
        x, t = a.end, a.t1
    return Trajectory(arcs)


def epsilon_schedule(pair: AffinePair, extremal: Extremal, eps: float, n0: int = 4, n_max: int = 1024) -> dict:
    """Original-system bang-bang schedule within ``eps`` of the singular optimum."""
    arcs = extremal.trajectory.arcs
    z = [a for a in arcs if a.label == SINGULAR and a.duration > 0]
    if not z:
        return None
    z_arc = z[0]
    rest = [a for a in arcs if a.t0 >= z_arc.t1 - 1e-15 and a is not z_arc]
    rest_time = sum(a.duration for a in rest)
    n = n0
    while n <= n_max:
        try:
            approx = bang_bang_approximation(pair, z_arc, n)
        except NoIntersection:
            n *= 2
            continue
        total = z_arc.t0 + approx.time + rest_time
        if total <= extremal.T + eps:
            sched = [(a.label, a.duration) for a in approx.trajectory.arcs]
            sched += [(a.label, a.duration) for a in rest if a.duration > 0]
            return {"n": n, "time": total, "eps": eps, "gap": total - extremal.T, "schedule": [[l, d] for l, d in sched]}
        n *= 2
    raise NoIntersection(f"no bang-bang approximation within eps={eps} up to n={n_max}")


# ------------------------------------------------------------- feedback


@dataclass
class FeedbackReport:
    T_gamma: float
    T_eta: float
    gap: float
    T_integrator: float


def _x1_speed(pair: AffinePair, arc: Arc, t: float) -> float:
    return float(pair.field(arc.state(t), arc.u_at(t))[0])


def monotone_pieces(pair: AffinePair, arc: Arc, samples: int = 400) -> list:
    """Split an arc into time intervals on which x1 is strictly monotone."""
    ts = np.linspace(arc.t0, arc.t1, samples)
    sp = np.array([_x1_speed(pair, arc, t) for t in ts])
    cuts = [arc.t0]
    for i in range(samples - 1):
        if sp[i] == 0.0 and 0 < i:
            cuts.append(ts[i])
        elif sp[i] * sp[i + 1] < 0:
            cuts.append(brentq(lambda t: _x1_speed(pair, arc, t), ts[i], ts[i + 1], xtol=1e-15, rtol=1e-15))
    cuts.append(arc.t1)
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def _x1_inverse(arc: Arc, x1: float, ta: float, tb: float) -> float:
    return brentq(lambda t: arc.state(t)[0] - x1, ta, tb, xtol=1e-14, rtol=1e-14)


def compare_feedback(params: SwingParams, pair: AffinePair, gamma) -> FeedbackReport:
    """Times of gamma and of its radius-feedback reparameterization, via x1-integrals.

    Arcs are split where x1 turns around; each monotone piece is integrated
    in x1 with the inverse-speed integrand.
    """
    traj = gamma.trajectory if isinstance(gamma, Extremal) else gamma
    Tg = Te = 0.0
    for arc in traj.arcs:
        if arc.duration <= 0:
            continue
        for ta, tb in monotone_pieces(pair, arc):
            a1, b1 = arc.state(ta)[0], arc.state(tb)[0]
            lo, hi = min(a1, b1), max(a1, b1)
            if hi == lo:
                continue

            def pt(x1, ta=ta, tb=tb, a1=a1, b1=b1):
                if x1 == a1:
                    t = ta
                elif x1 == b1:
                    t = tb
                else:
                    t = _x1_inverse(arc, x1, ta, tb)
                return arc.state(t), arc.u_at(t)

            def ig(x1):
                x, u = pt(x1)
                return 1.0 / abs(pair.F(x)[0] + u * pair.G(x)[0])

            def ie(x1):
                x, u = pt(x1)
                v = feedback_v(params, max(-1.0, min(1.0, u)))
                return v * v / abs(x[1])

            # x1 = lo + (hi - lo)(1 - cos tau)/2 absorbs the 1/sqrt blow-up at turning points
            half = (hi - lo) / 2

            def sub(fn):
                return lambda tau: fn(lo + half * (1 - math.cos(tau))) * half * math.sin(tau)

            Tg += quad(sub(ig), 0.0, math.pi, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
            Te += quad(sub(ie), 0.0, math.pi, epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    return FeedbackReport(Tg, Te, Te - Tg, traj.T)


# ----------------------------------------------------------------- export


def write_result(result: SynthesisResult, json_path, csv_path=None) -> None:
    with open(json_path, "w") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write("family,s,t_s,psi,pattern\n")
            for kind, s, t, psi, pat in result.table:
                ts = "" if t is None else format(t, ".17g")
                fh.write(f"{kind},{format(s, '.17g')},{ts},{format(psi, '.17g')},{pat}\n")
