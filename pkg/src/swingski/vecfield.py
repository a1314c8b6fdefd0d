"""Planar vector-field calculus for control-affine systems x' = F(x) + u G(x).

All determinants use the standard orientation det(e1, e2) = +1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NotOrdinary, SingularDenominator

CLASS_TOL = 1e-8
EXCLUSION_RADIUS = 1e-4

ORDINARY = "Ordinary"
TURNPIKE = "NonOrdinary-Turnpike"
BARRIER = "NonOrdinary-Barrier"
OTHER = "NonOrdinary-Other"
DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class PlanarField:
    """A C^1 vector field on the plane with its analytic Jacobian."""

    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x) -> np.ndarray:
        return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class AffinePair:
    """Drift F and control field G of x' = F + uG with |u| <= 1.

    ``grad_delta_b`` may supply an analytic gradient of delta_b; otherwise it
    is obtained by central differences. ``singular_points`` returns the points
    of a window where X or Y vanish (excluded from locus tracing).
    """

    F: PlanarField
    G: PlanarField
    grad_delta_b: Optional[Callable[[np.ndarray], np.ndarray]] = None
    singular_points: Optional[Callable[[Sequence[float]], list]] = None
    name: str = ""
    bound: float = 1.0

    def X(self, x) -> np.ndarray:
        return self.F(x) - self.G(x)

    def Y(self, x) -> np.ndarray:
        return self.F(x) + self.G(x)

    def field(self, x, u: float) -> np.ndarray:
        return self.F(x) + u * self.G(x)

    def jac(self, x, u: float) -> np.ndarray:
        return self.F.jac(x) + u * self.G.jac(x)


@dataclass
class PointClass:
    tag: str
    delta_a: float
    delta_b: float
    f: Optional[float] = None


@dataclass
class TurnpikeArc:
    """A sub-arc of the locus delta_b = 0, sampled monotonically in x1."""

    points: np.ndarray
    phi: np.ndarray
    regular: bool
    omega_sides: dict = field(default_factory=dict)

    @property
    def x1_range(self) -> tuple[float, float]:
        return float(self.points[0, 0]), float(self.points[-1, 0])

    @property
    def is_turnpike(self) -> bool:
        return bool(self.omega_sides.get("s1", False) and self.omega_sides.get("s3", False))

    def x2_at(self, x1: float) -> float:
        return float(np.interp(x1, self.points[:, 0], self.points[:, 1]))


def det2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _ndet(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return det2(a, b) / (na * nb)


def lie_bracket(pair: AffinePair, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return pair.G.jac(x) @ pair.F(x) - pair.F.jac(x) @ pair.G(x)


def delta_a(pair: AffinePair, x) -> float:
    return det2(pair.F(x), pair.G(x))


def delta_b(pair: AffinePair, x) -> float:
    return det2(pair.G(x), lie_bracket(pair, x))


def normalized_delta_a(pair: AffinePair, x) -> float:
    """Sine of the angle between F and G; scale free."""
    return _ndet(pair.F(x), pair.G(x))


def normalized_delta_b(pair: AffinePair, x) -> float:
    """Sine of the angle between G and [F, G]; scale free."""
    return _ndet(pair.G(x), lie_bracket(pair, x))


def fd_gradient(fun: Callable[[np.ndarray], float], x, h: Optional[float] = None) -> np.ndarray:
    """Five-point-stencil gradient (truncation error O(h^4))."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-4 * (1.0 + np.linalg.norm(x))
    grad = np.empty(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        grad[k] = (-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12.0 * h)
    return grad


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], x, h: Optional[float] = None) -> np.ndarray:
    """Five-point-stencil Jacobian; used as an independent oracle."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-3 * (1.0 + np.linalg.norm(x))
    J = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        J[:, k] = (-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12.0 * h)
    return J


def grad_delta_b(pair: AffinePair, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if pair.grad_delta_b is not None:
        return np.asarray(pair.grad_delta_b(x), dtype=float)
    return fd_gradient(lambda y: delta_b(pair, y), x)


def f_coefficient(pair: AffinePair, x) -> tuple[float, float]:
    """Coefficients (f, g) with [F, G] = f F + g G."""
    Fx, Gx = pair.F(x), pair.G(x)
    if abs(_ndet(Fx, Gx)) <= CLASS_TOL:
        raise NotOrdinary(f"F and G are parallel at {np.asarray(x).tolist()}")
    M = np.column_stack([Fx, Gx])
    f, g = np.linalg.solve(M, lie_bracket(pair, x))
    return float(f), float(g)


def turnpike_control(pair: AffinePair, x) -> float:
    """Feedback u = phi(x) that keeps a trajectory on delta_b = 0."""
    n = grad_delta_b(pair, x)
    Gx = pair.G(x)
    den = float(n @ Gx)
    if abs(den) <= CLASS_TOL * np.linalg.norm(n) * np.linalg.norm(Gx):
        raise SingularDenominator(f"grad(delta_b).G vanishes at {np.asarray(x).tolist()}")
    return -float(n @ pair.F(x)) / den


def _is_degenerate(pair: AffinePair, x) -> bool:
    Fx, Gx = pair.F(x), pair.G(x)
    tol = CLASS_TOL * (1.0 + np.linalg.norm(Fx) + np.linalg.norm(Gx))
    return min(np.linalg.norm(Fx - Gx), np.linalg.norm(Fx + Gx)) <= tol


def _sides(pair: AffinePair, x, normal) -> tuple[float, float]:
    nn = np.linalg.norm(normal)
    X, Y = pair.X(x), pair.Y(x)
    sx = float(normal @ X) / (nn * max(np.linalg.norm(X), 1e-300))
    sy = float(normal @ Y) / (nn * max(np.linalg.norm(Y), 1e-300))
    return sx, sy


def _s3_holds(pair: AffinePair, x, normal, sy: float, clearance: float = np.inf) -> bool:
    nhat = normal / np.linalg.norm(normal)
    delta = min(1e-5 * (1.0 + np.linalg.norm(x)), 0.1 * clearance)
    side_y = np.asarray(x, float) + delta * np.sign(sy) * nhat
    side_x = np.asarray(x, float) - delta * np.sign(sy) * nhat
    try:
        fy, _ = f_coefficient(pair, side_y)
        fx, _ = f_coefficient(pair, side_x)
    except NotOrdinary:
        return False
    return fy > 0.0 and fx < 0.0


def classify_point(pair: AffinePair, x) -> PointClass:
    x = np.asarray(x, dtype=float)
    da, db = delta_a(pair, x), delta_b(pair, x)
    if _is_degenerate(pair, x):
        return PointClass(DEGENERATE, da, db)
    na, nb = normalized_delta_a(pair, x), normalized_delta_b(pair, x)
    a_zero, b_zero = abs(na) <= CLASS_TOL, abs(nb) <= CLASS_TOL
    if not a_zero and not b_zero:
        return PointClass(ORDINARY, da, db, f=-db / da)
    if b_zero and not a_zero:
        normal = grad_delta_b(pair, x)
        if np.linalg.norm(normal) == 0.0:
            return PointClass(OTHER, da, db)
        sx, sy = _sides(pair, x, normal)
        if min(abs(sx), abs(sy)) <= CLASS_TOL:
            return PointClass(OTHER, da, db)
        if sx * sy < 0.0:
            tag = TURNPIKE if _s3_holds(pair, x, normal, sy) else OTHER
            return PointClass(tag, da, db)
        return PointClass(BARRIER, da, db)
    if a_zero and not b_zero:
        normal = fd_gradient(lambda y: delta_a(pair, y), x)
        if np.linalg.norm(normal) == 0.0:
            return PointClass(OTHER, da, db)
        sx, sy = _sides(pair, x, normal)
        if sx * sy > 0.0 and min(abs(sx), abs(sy)) > CLASS_TOL:
            return PointClass(BARRIER, da, db)
        return PointClass(OTHER, da, db)
    return PointClass(OTHER, da, db)


# ---------------------------------------------------------------- locus tracing


def _newton_x2(pair: AffinePair, x1: float, x2: float, maxit: int = 30) -> Optional[float]:
    for _ in range(maxit):
        x = np.array([x1, x2])
        val = delta_b(pair, x)
        d2 = grad_delta_b(pair, x)[1]
        if d2 == 0.0 or not np.isfinite(d2):
            return None
        dx = val / d2
        x2 -= dx
        if abs(dx) <= 1e-14 * (1.0 + abs(x2)):
            break
    else:
        return None
    if abs(normalized_delta_b(pair, np.array([x1, x2]))) > 1e-9:
        return None
    return x2


def _trace(pair, x1, x2, direction, window, step, singular):
    x1min, x1max, x2min, x2max = window
    out = []
    h = step
    for _ in range(int(10 * (x1max - x1min) / step) + 10):
        grad = grad_delta_b(pair, np.array([x1, x2]))
        if grad[1] == 0.0:
            break
        slope = -grad[0] / grad[1]
        if singular:
            dist = min(np.hypot(x1 - p[0], x2 - p[1]) for p in singular)
            h = min(step, 0.5 * dist / np.hypot(1.0, slope))
            if dist <= 2.0 * EXCLUSION_RADIUS:
                break
        nx1 = x1 + direction * h
        if nx1 < x1min or nx1 > x1max:
            break
        nx2 = _newton_x2(pair, nx1, x2 + slope * direction * h)
        if nx2 is None or nx2 < x2min or nx2 > x2max:
            break
        if singular and min(np.hypot(nx1 - p[0], nx2 - p[1]) for p in singular) < EXCLUSION_RADIUS:
            break
        x1, x2 = nx1, nx2
        out.append((x1, x2))
    return out


def _seed_roots(pair, window, n_cols, n_rows):
    x1min, x1max, x2min, x2max = window
    seeds = []
    x2s = np.linspace(x2min, x2max, n_rows)
    for x1 in np.linspace(x1min, x1max, n_cols):
        vals = np.array([delta_b(pair, np.array([x1, v])) for v in x2s])
        for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            r = brentq(lambda v: delta_b(pair, np.array([x1, v])), x2s[k], x2s[k + 1], xtol=1e-14)
            seeds.append((x1, r))
    return seeds


def _orientation(pair, pts, singular=()):
    s1, s3, x_side = True, True, []
    for x in pts:
        clearance = min((np.hypot(x[0] - p[0], x[1] - p[1]) for p in singular), default=np.inf)
        normal = grad_delta_b(pair, x)
        sx, sy = _sides(pair, x, normal)
        x_side.append(int(np.sign(sx)))
        if not (sx * sy < 0.0):
            s1 = False
            s3 = False
            continue
        if not _s3_holds(pair, x, normal, sy, clearance):
            s3 = False
    return {"s1": s1, "s3": s3, "x_side": x_side}


def _split_regular(pair, comp: np.ndarray, max_checks: int, singular=()) -> list[TurnpikeArc]:
    phi = np.empty(len(comp))
    ok = np.empty(len(comp), dtype=bool)
    for i, x in enumerate(comp):
        try:
            phi[i] = turnpike_control(pair, x)
            ok[i] = abs(phi[i]) <= pair.bound
        except SingularDenominator:
            phi[i] = np.nan
            ok[i] = False
    arcs = []
    start = 0
    for i in range(1, len(comp) + 1):
        if i == len(comp) or ok[i] != ok[start]:
            pts = comp[start:i]
            idx = np.unique(np.linspace(0, len(pts) - 1, min(len(pts), max_checks)).astype(int))
            sides = _orientation(pair, pts[idx], singular)
            sides["da_nonzero"] = bool(
                all(abs(normalized_delta_a(pair, p)) > CLASS_TOL for p in pts[idx])
            )
            arcs.append(TurnpikeArc(points=pts.copy(), phi=phi[start:i].copy(), regular=bool(ok[start]), omega_sides=sides))
            start = i
    return arcs


def find_turnpikes(
    pair: AffinePair,
    window: Sequence[float],
    step: float = 1e-3,
    seed_cols: int = 64,
    seed_rows: int = 401,
    max_checks: int = 25,
) -> list[TurnpikeArc]:
    """Trace the components of delta_b^{-1}(0) inside ``window``.

    ``window`` is (x1min, x1max, x2min, x2max). Each connected component is
    followed by predictor-corrector continuation in x1 (Newton in x2) and then
    cut into maximal sub-arcs on which regularity (|phi| <= 1) is constant.
    """
    x1min, x1max, x2min, x2max = map(float, window)
    if not (x1max > x1min and x2max > x2min):
        return []
    win = (x1min, x1max, x2min, x2max)
    singular = pair.singular_points(win) if pair.singular_points else []
    singular = [np.asarray(p, float) for p in singular]
    seeds = _seed_roots(pair, win, seed_cols, seed_rows)
    comps: list[np.ndarray] = []
    for sx1, sx2 in seeds:
        covered = False
        for c in comps:
            if c[0, 0] - 1e-12 <= sx1 <= c[-1, 0] + 1e-12:
                if abs(np.interp(sx1, c[:, 0], c[:, 1]) - sx2) <= 1e-4 * (1.0 + abs(sx2)):
                    covered = True
                    break
        if covered:
            continue
        if singular and min(np.hypot(sx1 - p[0], sx2 - p[1]) for p in singular) < EXCLUSION_RADIUS:
            continue
        back = _trace(pair, sx1, sx2, -1.0, win, step, singular)
        fwd = _trace(pair, sx1, sx2, +1.0, win, step, singular)
        pts = back[::-1] + [(sx1, sx2)] + fwd
        if len(pts) >= 2:
            comps.append(np.array(pts))
    comps.sort(key=lambda c: (c[0, 0], c[0, 1]))
    arcs: list[TurnpikeArc] = []
    for c in comps:
        arcs.extend(_split_regular(pair, c, max_checks, singular))
    return arcs
