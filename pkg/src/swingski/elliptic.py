"""Elliptic-integral times for swing Y-arcs and the turnpike departure slope."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import NotMonotone, SingularIntegrand
from .models import SwingParams, make_swing_pair, swing_locus_x2, swing_phi_closed

QUAD_TOL = 1e-12
QUAD_LIMIT = 400


def _max_sin2(t0: float, t1: float) -> float:
    lo, hi = min(t0, t1), max(t0, t1)
    k = math.ceil((lo - math.pi / 2) / math.pi)
    if math.pi / 2 + k * math.pi <= hi:
        return 1.0
    return max(math.sin(lo) ** 2, math.sin(hi) ** 2)


def elliptic_span(l: float, theta0: float, theta1: float, power: float = 0.5) -> float:
    """Integral of (1 - l^2 sin^2 t)^(-power) from theta0 to theta1."""
    if theta0 == theta1:
        return 0.0
    m = l * l
    if m * _max_sin2(theta0, theta1) >= 1.0 - 1e-14:
        raise SingularIntegrand(f"1 - l^2 sin^2 vanishes on [{theta0}, {theta1}] (l^2={m})")
    val, _ = quad(
        lambda t: (1.0 - m * math.sin(t) ** 2) ** (-power),
        theta0,
        theta1,
        epsabs=QUAD_TOL,
        epsrel=QUAD_TOL,
        limit=QUAD_LIMIT,
    )
    return val


def incomplete_elliptic(l: float, theta: float) -> float:
    """E(l, theta) = int_0^theta dphi / sqrt(1 - l^2 sin^2 phi) (first kind)."""
    return elliptic_span(l, 0.0, theta)


@dataclass(frozen=True)
class SwingYConstants:
    alpha: float
    beta: float
    omega2: float
    k: float
    a0sq: float
    D: float  # alpha^2 x2^2 + 4 omega^2 k^2

    @classmethod
    def at(cls, params: SwingParams, x, u: int = 1) -> "SwingYConstants":
        """Constants of the u = +1 arc (default) or, with u = -1, of the X-arc."""
        alpha = (params.d + u * params.b * params.c) / (2 * params.a)
        beta = params.g * (u * params.c - params.b) / 2
        omega2 = -alpha * beta
        k = math.sin(x[0] / 2)
        D = alpha**2 * x[1] ** 2 + 4 * omega2 * k**2
        return cls(alpha, beta, omega2, k, 4 * omega2 / D, D)

    def speed2(self, x1: float) -> float:
        """x1'^2 along the Y-arc as a function of x1 (first integral)."""
        return self.D - 4 * self.omega2 * math.sin(x1 / 2) ** 2


def y_arc_time(params: SwingParams, start, to_x1: float) -> float:
    """Time for the Y-trajectory from ``start`` to first reach x1 = to_x1."""
    return bang_arc_time(params, start, to_x1, 1)


def bang_arc_time(params: SwingParams, start, to_x1: float, u: int) -> float:
    x1, x2 = float(start[0]), float(start[1])
    if to_x1 == x1:
        return 0.0
    if x2 == 0.0 or (to_x1 - x1) * x2 < 0:
        raise NotMonotone("the arc does not head towards the target")
    C = SwingYConstants.at(params, (x1, x2), u)
    if C.a0sq * _max_sin2(x1 / 2, to_x1 / 2) >= 1.0 - 1e-14:
        raise NotMonotone("x1' vanishes before the target (the arc turns back)")
    span = elliptic_span(math.sqrt(C.a0sq), x1 / 2, to_x1 / 2)
    return 2.0 / math.sqrt(C.D) * abs(span)


def _libration_span(a0sq: float, theta0: float, theta1: float) -> float:
    # sin(phi) = a sin(theta) removes the endpoint singularity at a turning point
    a = math.sqrt(a0sq)
    shift = math.pi * round((theta0 + theta1) / (2 * math.pi))

    def phi(t):
        return math.asin(max(-1.0, min(1.0, a * math.sin(t - shift))))

    return elliptic_span(1.0 / a, phi(theta0), phi(theta1)) / a


def bang_path_time(params: SwingParams, start, u: int, waypoints) -> float:
    """Time along a u-arc from ``start`` through x1 turning points to the last waypoint.

    ``waypoints`` lists x1 values in order: the turning points (where x2 = 0)
    followed by the final x1. Turning values are snapped to the exact
    libration amplitude.
    """
    x1, x2 = float(start[0]), float(start[1])
    C = SwingYConstants.at(params, (x1, x2), u)
    total, prev = 0.0, x1
    pts = [float(w) for w in waypoints]
    for i, w in enumerate(pts):
        if i < len(pts) - 1 and C.a0sq > 1.0:
            centre = 2 * math.pi * round(w / (2 * math.pi))
            amp = 2 * math.asin(1.0 / math.sqrt(C.a0sq))
            w = centre + math.copysign(amp, w - centre)
        if C.a0sq > 1.0:
            span = _libration_span(C.a0sq, prev / 2, w / 2)
        else:
            span = elliptic_span(math.sqrt(C.a0sq), prev / 2, w / 2)
        total += abs(span)
        prev = w
    return 2.0 / math.sqrt(C.D) * total


def turnpike_origin(params: SwingParams, x1: float) -> np.ndarray:
    """Point of the upper locus branch above x1."""
    return np.array([x1, swing_locus_x2(params, x1, +1)])


def t_of_s(params: SwingParams, origin, s: float, target: float = 1.5 * math.pi, z_arc=None) -> float:
    """Time to reach x1 = target: ride the turnpike for s, then a Y-arc."""
    from .integrate import SINGULAR, integrate_arc

    if s == 0.0:
        xs = np.asarray(origin, float)
    elif z_arc is not None and z_arc.t0 <= s <= z_arc.t1:
        xs = z_arc.state(s)
    else:
        pair = make_swing_pair(params).pair
        xs = integrate_arc(pair, origin, SINGULAR, s).end
    return s + y_arc_time(params, xs, target)


@dataclass(frozen=True)
class SlopeTerms:
    total: float
    second: float
    third: float
    A: float
    phi: float
    integral: float


def a_coefficient(params: SwingParams, x) -> float:
    """Defining expression of A."""
    C = SwingYConstants.at(params, x)
    p = params
    ph = swing_phi_closed(p, x[0])
    x1, x2 = x
    return C.alpha**2 * p.g * (ph * p.c - p.b) * x2 * math.sin(x1) + 2 * C.omega2 * x2 * math.sin(x1 / 2) * math.cos(
        x1 / 2
    ) * (p.d + ph * p.b * p.c) / p.a


def a_coefficient_product(params: SwingParams, x) -> float:
    """Factored expression of A."""
    C = SwingYConstants.at(params, x)
    p = params
    ph = swing_phi_closed(p, x[0])
    return C.alpha * p.g * p.c / (2 * p.a) * (p.d + p.b**2) * (ph - 1) * x[1] * math.sin(x[0])


def t_of_s_derivative(params: SwingParams, origin, target: float = 1.5 * math.pi) -> SlopeTerms:
    """d/ds T(s) at s = 0 for an origin on the turnpike.

    The bracketed integrand (1 - a^2 sin^2)^(-1/2) + a^2 sin^2 (1 - a^2 sin^2)^(-3/2)
    equals (1 - a^2 sin^2)^(-3/2), and the minus sign in front applies to it
    as a whole (confirmed against finite differences of ``t_of_s``).
    """
    x1, x2 = float(origin[0]), float(origin[1])
    C = SwingYConstants.at(params, (x1, x2))
    p = params
    ph = swing_phi_closed(p, x1)
    A = a_coefficient_product(p, (x1, x2))
    I = elliptic_span(math.sqrt(C.a0sq), x1 / 2, target / 2, power=1.5)
    second = -(C.D**-1.5) * A * I
    third = -(p.d + ph * p.b * p.c) / (2 * p.a) * x2 / math.sqrt(C.D * (1 - C.a0sq * C.k**2))
    return SlopeTerms(1.0 + second + third, second, third, A, ph, I)


def second_term_limit(x1: float, target: float = 1.5 * math.pi) -> float:
    """Limit of the second slope term as r_minus -> 0 (fixed r_plus)."""
    co = math.cos(x1)
    return -co * (2 * co**2 + 2) / ((3 * co**2 + 1) * math.sin(x1)) * (target - x1) / 2


def second_term_limit_printed(x1: float, target: float = 1.5 * math.pi) -> float:
    """An alternative closed form that the numerical limit does not confirm; kept for comparison."""
    co = math.cos(x1)
    return -co / math.sin(x1) * (3 * co**2 - co + 2) / (3 * co**2 + 1) * (target - x1) / 2
