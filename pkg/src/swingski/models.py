"""Swing and constant-curvature ski models, and their linear-control envelopes.

The swing state is (theta, angular momentum theta' r^2); the ski state is
(arclength s, conjugate momentum p). In both models the auxiliary control
u = +1 corresponds to the smallest original control r_minus and u = -1 to
the largest, r_plus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ControlOutOfRange,
    DegenerateDirection,
    DenominatorZero,
    InvalidParams,
)
from .vecfield import AffinePair, PlanarField, det2

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------- swing


@dataclass(frozen=True)
class SwingParams:
    r_minus: float = 1.0
    r_plus: float = 2.0
    g: float = 9.81

    def __post_init__(self):
        vals = (self.r_minus, self.r_plus, self.g)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidParams("swing parameters must be finite")
        if not 0.0 < self.r_minus < self.r_plus:
            raise InvalidParams(f"need 0 < r_minus < r_plus, got {self.r_minus}, {self.r_plus}")
        if self.g <= 0.0:
            raise InvalidParams("gravity must be positive")

    @property
    def a(self) -> float:
        return (self.r_plus * self.r_minus) ** 2

    @property
    def b(self) -> float:
        return self.r_plus + self.r_minus

    @property
    def c(self) -> float:
        return self.r_plus - self.r_minus

    @property
    def d(self) -> float:
        return self.r_plus**2 + self.r_minus**2

    @classmethod
    def from_dict(cls, data: dict) -> "SwingParams":
        return cls(
            r_minus=float(data.get("r_minus", 1.0)),
            r_plus=float(data.get("r_plus", 2.0)),
            g=float(data.get("g", 9.81)),
        )

    def to_dict(self) -> dict:
        return {"r_minus": self.r_minus, "r_plus": self.r_plus, "g": self.g}


def swing_rhs(params: SwingParams, x, v: float) -> np.ndarray:
    """Original swing dynamics with radius ``v`` in [r_minus, r_plus]."""
    tol = 1e-12 * params.r_plus
    if not (params.r_minus - tol <= v <= params.r_plus + tol):
        raise ControlOutOfRange(f"radius {v} outside [{params.r_minus}, {params.r_plus}]")
    return np.array([x[1] / v**2, -params.g * v * math.sin(x[0])])


@dataclass(frozen=True)
class Envelope:
    """Extremal velocity selections w+ / w- and the affine pair they induce."""

    w_plus: PlanarField
    w_minus: PlanarField
    pair: AffinePair
    h: Callable[[np.ndarray, float], np.ndarray]
    control_plus: float
    control_minus: float
    params: object = None
    extras: dict = field(default_factory=dict)

    def original_control(self, u: float) -> float:
        """Bang dictionary: u = +1 -> control_plus, u = -1 -> control_minus."""
        if u == 1 or u == 1.0:
            return self.control_plus
        if u == -1 or u == -1.0:
            return self.control_minus
        raise ControlOutOfRange(f"bang dictionary only covers u = +-1, got {u}")


def _swing_fields(p: SwingParams):
    a, b, c, d, g = p.a, p.b, p.c, p.d, p.g

    def F(x):
        return np.array([d / (2 * a) * x[1], -0.5 * g * b * math.sin(x[0])])

    def JF(x):
        return np.array([[0.0, d / (2 * a)], [-0.5 * g * b * math.cos(x[0]), 0.0]])

    def G(x):
        return np.array([b * c / (2 * a) * x[1], 0.5 * g * c * math.sin(x[0])])

    def JG(x):
        return np.array([[0.0, b * c / (2 * a)], [0.5 * g * c * math.cos(x[0]), 0.0]])

    return PlanarField(F, JF), PlanarField(G, JG)


def _swing_singular_points(window):
    x1min, x1max, x2min, x2max = window
    if not x2min <= 0.0 <= x2max:
        return []
    k0, k1 = math.ceil(x1min / math.pi - 1e-12), math.floor(x1max / math.pi + 1e-12)
    return [(k * math.pi, 0.0) for k in range(k0, k1 + 1)]


def make_swing_pair(params: SwingParams) -> Envelope:
    if not isinstance(params, SwingParams):
        raise InvalidParams("expected SwingParams")
    F, G = _swing_fields(params)
    K = swing_delta_b_scale(params)
    a, b, g = params.a, params.b, params.g

    def grad_db(x):
        s, co = math.sin(x[0]), math.cos(x[0])
        return K * np.array([-(b / a) * x[1] ** 2 * s + 2 * g * s * co, 2 * (b / a) * x[1] * co])

    pair = AffinePair(F, G, grad_delta_b=grad_db, singular_points=_swing_singular_points, name="swing")
    wp = PlanarField(lambda x: F(x) + G(x), lambda x: F.jac(x) + G.jac(x))
    wm = PlanarField(lambda x: F(x) - G(x), lambda x: F.jac(x) - G.jac(x))
    return Envelope(
        w_plus=wp,
        w_minus=wm,
        pair=pair,
        h=lambda x, v: swing_rhs(params, x, v),
        control_plus=params.r_minus,
        control_minus=params.r_plus,
        params=params,
    )


def feedback_v(params: SwingParams, u: float) -> float:
    """Radius whose velocity is parallel to F + uG (real cube root)."""
    a, b, c, d = params.a, params.b, params.c, params.d
    den = u * b * c + d
    if abs(den) <= 1e-15 * d:
        raise DenominatorZero(f"u*b*c + d vanishes at u={u}")
    return float(np.cbrt(-a * (u * c - b) / den))


def swing_u_of_v(params: SwingParams, v: float) -> float:
    """Inverse of ``feedback_v``."""
    a, b, c, d = params.a, params.b, params.c, params.d
    v3 = v**3
    return (a * b - d * v3) / (c * (a + b * v3))


# closed forms of the swing pair, kept independent of the generic calculus


def swing_bracket_closed(params: SwingParams, x) -> np.ndarray:
    k = params.g * params.c * (params.d + params.b**2) / (4 * params.a)
    return np.array([-k * math.sin(x[0]), k * x[1] * math.cos(x[0])])


def swing_delta_a_closed(params: SwingParams, x) -> float:
    p = params
    return p.g * p.c * (p.d + p.b**2) / (4 * p.a) * x[1] * math.sin(x[0])


def swing_delta_b_scale(params: SwingParams) -> float:
    p = params
    return p.g * p.c**2 * (p.d + p.b**2) / (8 * p.a)


def swing_delta_b_closed(params: SwingParams, x) -> float:
    p = params
    return swing_delta_b_scale(p) * (p.b / p.a * x[1] ** 2 * math.cos(x[0]) + p.g * math.sin(x[0]) ** 2)


def swing_f_closed(params: SwingParams, x) -> float:
    p = params
    num = p.c * (p.b / p.a * x[1] ** 2 * math.cos(x[0]) + p.g * math.sin(x[0]) ** 2)
    return -num / (2 * x[1] * math.sin(x[0]))


def swing_phi_closed(params: SwingParams, x1: float) -> float:
    p = params
    c2 = math.cos(x1) ** 2
    return ((2 * p.b**2 - p.d) * c2 - p.d) / (p.b * p.c * (3 * c2 + 1))


def swing_phi_prime_closed(params: SwingParams, x1: float) -> float:
    p = params
    co, s = math.cos(x1), math.sin(x1)
    return -4 * (p.b**2 + p.d) * s * co / (p.b * p.c * (3 * co**2 + 1) ** 2)


def swing_locus_x2(params: SwingParams, x1: float, branch: int = 1) -> float:
    """Upper (branch=+1) or lower (-1) solution of delta_b = 0 for cos x1 < 0."""
    co = math.cos(x1)
    if co >= 0.0:
        raise ValueError("the locus exists only where cos(x1) < 0")
    p = params
    return branch * math.sqrt(-p.g * p.a / p.b * math.sin(x1) ** 2 / co)


def swing_phi_limit_pi(params: SwingParams) -> float:
    return params.r_plus * params.r_minus / (params.r_plus**2 - params.r_minus**2)


def swing_phi_limit_half_pi(params: SwingParams) -> float:
    return -(params.r_plus**2 + params.r_minus**2) / (params.r_plus**2 - params.r_minus**2)


def regular_reaches_pi(params: SwingParams) -> bool:
    """Closed-form test: the regular turnpike extends up to x1 = pi."""
    return swing_phi_limit_pi(params) <= 1.0


def swing_regular_interval(params: SwingParams) -> tuple[float, float]:
    """Interval (pi/2 + eps1, pi - eps2) of the upper-left branch where |phi| <= 1."""
    from scipy.optimize import brentq

    lo = brentq(lambda t: swing_phi_closed(params, t) + 1.0, math.pi / 2 + 1e-12, math.pi, xtol=1e-15)
    if regular_reaches_pi(params):
        return lo, math.pi
    hi = brentq(lambda t: swing_phi_closed(params, t) - 1.0, lo, math.pi, xtol=1e-15)
    return lo, hi


def in_region_q(x) -> bool:
    return abs(x[0]) <= math.pi / 2


# ---------------------------------------------------------------- convexification


@dataclass
class P1Report:
    passed: bool
    worst_margin: float
    worst_point: Optional[tuple] = None
    violations: list = field(default_factory=list)
    samples: int = 0


def _cone_margin(h, wp, wm) -> float:
    """Margin of h inside the triangle C(wp, wm) with lam + mu < 1 strictly."""
    sp, sm = np.linalg.norm(wp), np.linalg.norm(wm)
    if sp == 0.0 and sm == 0.0:
        return math.inf
    if abs(det2(wp, wm)) > 1e-12 * sp * sm:
        lam, mu = np.linalg.solve(np.column_stack([wp, wm]), h)
        return float(min(lam, mu, 1.0 - lam - mu))
    big = wp if sp >= sm else wm
    nb = np.linalg.norm(big)
    if abs(det2(big, h)) > 1e-10 * nb * max(np.linalg.norm(h), 1e-300):
        return -math.inf
    t = float(h @ big) / nb**2
    return min(t, 1.0 - t)


def verify_p1(
    envelope: Envelope,
    region: Sequence[float],
    samples: int = 200,
    n_controls: int = 17,
    seed: int = 0,
) -> P1Report:
    """Check that interior original velocities lie strictly inside C(w+, w-)."""
    x1min, x1max, x2min, x2max = map(float, region)
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(x1min, x1max, samples), rng.uniform(x2min, x2max, samples)])
    lo, hi = sorted((envelope.control_plus, envelope.control_minus))
    controls = np.linspace(lo, hi, n_controls + 2)[1:-1]
    worst, worst_pt, bad = math.inf, None, []
    for x in pts:
        wp, wm = envelope.w_plus(x), envelope.w_minus(x)
        for v in controls:
            margin = _cone_margin(envelope.h(x, v), wp, wm)
            if margin < worst:
                worst, worst_pt = margin, (float(x[0]), float(x[1]), float(v))
            if not margin > 0.0:
                bad.append((float(x[0]), float(x[1]), float(v), float(margin)))
    return P1Report(passed=not bad, worst_margin=float(worst), worst_point=worst_pt, violations=bad, samples=len(pts))


def project_control(envelope: Envelope, x, v: float) -> float:
    """The map P(x, v): the u in [-1, 1] with h(x, v) parallel to F + uG."""
    x = np.asarray(x, dtype=float)
    hv = envelope.h(x, v)
    Fx, Gx = envelope.pair.F(x), envelope.pair.G(x)
    wp, wm = Fx + Gx, Fx - Gx
    nh = np.linalg.norm(hv)
    if nh == 0.0:
        raise DegenerateDirection(f"original velocity vanishes at {x.tolist()}")
    dg = det2(hv, Gx)
    if abs(det2(wp, wm)) > 1e-12 * np.linalg.norm(wp) * np.linalg.norm(wm) and abs(dg) > 1e-14 * nh * np.linalg.norm(Gx):
        u = -det2(hv, Fx) / dg
        if abs(u) > 1.0 + 1e-9:
            raise DegenerateDirection(f"velocity outside the envelope cone at {x.tolist()} (u={u})")
        return float(min(1.0, max(-1.0, u)))
    if np.linalg.norm(Fx + Gx) == 0.0 and np.linalg.norm(Fx - Gx) == 0.0:
        raise DegenerateDirection(f"F + uG vanishes for every u at {x.tolist()}")
    return 1.0 if np.linalg.norm(wp) > np.linalg.norm(wm) else -1.0


# ------------------------------------------------------------------------ ski


@dataclass(frozen=True)
class CircleTrail:
    """Circular trail (cos(|c|s), sin(|c|s)) / |c| with curvature c."""

    c: float

    def __post_init__(self):
        if self.c == 0.0 or not np.isfinite(self.c):
            raise InvalidParams("circle trail needs nonzero finite curvature")

    @property
    def k(self) -> float:
        return abs(self.c)

    def y(self, s: float) -> float:
        return math.sin(self.k * s) / self.k

    def yp(self, s: float) -> float:
        return math.cos(self.k * s)

    def ypp(self, s: float) -> float:
        return -self.k * math.sin(self.k * s)

    @property
    def domain(self) -> tuple[float, float]:
        if self.c < 0:
            return 0.0, math.pi / self.k
        return math.pi / self.k, 2 * math.pi / self.k

    def to_dict(self) -> dict:
        return {"kind": "circle", "c": self.c}


@dataclass(frozen=True)
class SkiParams:
    c: float = -0.05
    m: float = 70.0
    m_s: float = 3.0
    alpha: float = 0.8
    n: int = 10
    r_minus: float = 0.5
    r_plus: float = 1.0
    g: float = 9.81

    def __post_init__(self):
        if not 0.0 < self.r_minus < self.r_plus:
            raise InvalidParams("need 0 < r_minus < r_plus")
        if self.m <= 0 or self.m_s < 0 or self.alpha < 0 or self.n < 1 or self.g <= 0:
            raise InvalidParams("masses, inertia, n and g must be positive")

    @property
    def M(self) -> float:
        return self.m + self.m_s

    @property
    def b(self) -> float:
        return 2.0 * (self.m + self.m_s) / self.m * self.n / (self.n + 1)

    def inertia(self, u: float) -> float:
        """Sum form of the inertia at height u."""
        c, b, n = self.c, self.b, self.n
        i = np.arange(1, n + 1)
        return float(self.alpha * c**2 + self.m_s + self.m / n * np.sum((1.0 - c * b * u * i / n) ** 2))

    def inertia_expanded(self, u: float) -> float:
        c, b, n, m = self.c, self.b, self.n, self.m
        return (
            self.alpha * c**2
            + self.m_s
            + m
            + m * c**2 * b**2 * u**2 * (2 * n + 1) * (n + 1) / (6 * n**2)
            - m * c * b * u * (n + 1) / n
        )

    def inertia_du(self, u: float) -> float:
        c, b, n, m = self.c, self.b, self.n, self.m
        return 2 * m * c**2 * b**2 * u * (2 * n + 1) * (n + 1) / (6 * n**2) - m * c * b * (n + 1) / n

    @property
    def I_plus(self) -> float:
        return self.inertia(self.r_plus)

    @property
    def I_minus(self) -> float:
        return self.inertia(self.r_minus)

    @property
    def H(self) -> float:
        return (self.I_plus + self.I_minus) / (2 * self.I_plus * self.I_minus)

    @property
    def J(self) -> float:
        return (self.I_plus - self.I_minus) / (2 * self.I_plus * self.I_minus)

    @property
    def L(self) -> float:
        c = self.c
        return c * self.H * (self.r_plus - self.r_minus) - self.J * (2 - c * (self.r_plus + self.r_minus))

    # polynomial P(pdot) with sdot = p / P(pdot)
    def p_coefficients(self, yp: float) -> tuple[float, float, float]:
        m, b, n, M, g, c = self.m, self.b, self.n, self.M, self.g, self.c
        A = m * b**2 * (2 * n + 1) * (n + 1) / (M**2 * g**2 * yp**2 * 6 * n**2)
        B = m * b * (b * (2 * n + 1) - 3 * n) * (n + 1) / (M * g * yp * 3 * n**2)
        C = (
            6 * self.alpha * c**2 * n**2
            + m * b**2 * (2 * n**2 + 3 * n + 1)
            - 6 * m * b * n * (n + 1)
            + 6 * (m + self.m_s) * n**2
        ) / (6 * n**2)
        return A, B, C

    def disc_p(self, yp: float) -> float:
        A, B, C = self.p_coefficients(yp)
        return B * B - 4 * A * C

    def disc_p_closed(self, yp: float) -> float:
        m, b, n, M, g, c, al, ms = self.m, self.b, self.n, self.M, self.g, self.c, self.alpha, self.m_s
        q = 2 * al * c**2 * (2 * n + 1) + m * (n - 1) + 2 * ms * (2 * n + 1)
        return -m * b**2 * (n + 1) * q / (3 * M**2 * g**2 * yp**2 * n**2)

    def pdot_of_u(self, u: float, yp: float) -> float:
        return -self.M * self.g * (1 - self.c * u) * yp

    def _root_term(self) -> float:
        n = self.n
        return math.sqrt(2 * (self.alpha * self.c**2 + self.m_s) * (2 * n**2 + 3 * n + 1) + self.m * (n**2 - 1))

    def pdot_pm(self, yp: float) -> tuple[float, float]:
        """Zeros of d^2 sdot / d pdot^2 (closed form)."""
        n, b, M, g = self.n, self.b, self.M, self.g
        base = g * M * yp * (3 * n - b * (2 * n + 1)) / (b * (2 * n + 1))
        dev = g * M * yp * n / (math.sqrt(self.m) * b * (2 * n + 1) * (n + 1)) * self._root_term()
        return base + dev, base - dev

    def u_pm(self) -> tuple[float, float]:
        n, b, c, m = self.n, self.b, self.c, self.m
        den = b * c * math.sqrt(m) * (2 * n + 1) * (n + 1)
        base = 3 * math.sqrt(m) * (n + 1)
        return n * (base + self._root_term()) / den, n * (base - self._root_term()) / den

    def validity(self) -> dict:
        """Regime conditions; only 'uc<=1' is structural."""
        n, b, c, m, ms, al, rp, rm = self.n, self.b, self.c, self.m, self.m_s, self.alpha, self.r_plus, self.r_minus
        us = np.linspace(rm, rp, 41)
        out = {"uc<=1": bool(np.all(us * c <= 1.0))}
        out["sgn_dI_du"] = bool(all(np.sign(self.inertia_du(u)) == -np.sign(c) for u in us))
        if c < 0:
            out["c2_bound"] = c**2 < m * (4 * n + 5) / (al * (2 * n + 1)) - ms / al
        elif c > 0:
            out["vertex_beyond_r_plus"] = 3 * n / (b * c * (2 * n + 1)) - rp > 0
            a2, a1, a0 = self.quadratic_coefficients()
            out["u_minus_beyond_r_plus"] = a2 * c**2 + a1 * c + a0 > 0
        return out

    def quadratic_coefficients(self) -> tuple[float, float, float]:
        """Coefficients of the c>0 condition u_minus > r_plus (times (n+1))."""
        n, b, m, ms, al, rp = self.n, self.b, self.m, self.m_s, self.alpha, self.r_plus
        a2 = (2 * n + 1) * (n + 1) * (m * b**2 * rp**2 * (2 * n + 1) * (n + 1) - 2 * al * n**2)
        a1 = -6 * m * b * rp * n * (2 * n + 1) * (n + 1) ** 2
        a0 = 2 * n**2 * (n + 1) * (m * (4 * n + 5) - ms * (2 * n + 1))
        return a2, a1, a0

    @classmethod
    def from_dict(cls, data: dict) -> "SkiParams":
        keys = {"c": float, "m": float, "m_s": float, "alpha": float, "n": int, "r_minus": float, "r_plus": float, "g": float}
        return cls(**{k: t(data[k]) for k, t in keys.items() if k in data})

    def to_dict(self) -> dict:
        return {
            "c": self.c, "m": self.m, "m_s": self.m_s, "alpha": self.alpha,
            "n": self.n, "r_minus": self.r_minus, "r_plus": self.r_plus, "g": self.g,
        }


def ski_rhs(params: SkiParams, x, u: float, trail: CircleTrail) -> np.ndarray:
    tol = 1e-12 * params.r_plus
    if not (params.r_minus - tol <= u <= params.r_plus + tol):
        raise ControlOutOfRange(f"height {u} outside [{params.r_minus}, {params.r_plus}]")
    s, p = x
    return np.array([p / params.inertia(u), -params.M * params.g * (1 - params.c * u) * trail.yp(s)])


def make_ski_pair(params: SkiParams, trail: Optional[CircleTrail] = None) -> Envelope:
    if params.c == 0.0:
        raise InvalidParams("the control disappears for zero curvature")
    trail = trail or CircleTrail(params.c)
    val = params.validity()
    if not val["uc<=1"]:
        raise InvalidParams("u*c <= 1 fails on [r_minus, r_plus]")
    H, J = params.H, params.J
    Mg = params.M * params.g
    AF = 0.5 * Mg * (2 - params.c * (params.r_plus + params.r_minus))
    AG = 0.5 * Mg * params.c * (params.r_plus - params.r_minus)

    F = PlanarField(
        lambda x: np.array([x[1] * H, -AF * trail.yp(x[0])]),
        lambda x: np.array([[0.0, H], [-AF * trail.ypp(x[0]), 0.0]]),
    )
    G = PlanarField(
        lambda x: np.array([x[1] * J, -AG * trail.yp(x[0])]),
        lambda x: np.array([[0.0, J], [-AG * trail.ypp(x[0]), 0.0]]),
    )

    def singular(window):
        s0, s1, p0, p1 = window
        if not p0 <= 0.0 <= p1:
            return []
        k = trail.k
        j0, j1 = math.ceil((s0 * k - math.pi / 2) / math.pi), math.floor((s1 * k - math.pi / 2) / math.pi)
        return [((math.pi / 2 + j * math.pi) / k, 0.0) for j in range(j0, j1 + 1)]

    pair = AffinePair(F, G, singular_points=singular, name="ski")
    wp = PlanarField(lambda x: F(x) + G(x), lambda x: F.jac(x) + G.jac(x))
    wm = PlanarField(lambda x: F(x) - G(x), lambda x: F.jac(x) - G.jac(x))
    return Envelope(
        w_plus=wp,
        w_minus=wm,
        pair=pair,
        h=lambda x, u: ski_rhs(params, x, u, trail),
        control_plus=params.r_minus,
        control_minus=params.r_plus,
        params=params,
        extras={"trail": trail, "validity": val},
    )


def ski_bracket_closed(params: SkiParams, trail: CircleTrail, x) -> np.ndarray:
    s, p = x
    k = 0.5 * params.M * params.g * params.L
    return k * np.array([trail.yp(s), -p * trail.ypp(s)])


def ski_delta_b_closed(params: SkiParams, trail: CircleTrail, x) -> float:
    s, p = x
    Mg = params.M * params.g
    cc = params.c * (params.r_plus - params.r_minus)
    return Mg / 4 * params.L * (-2 * params.J * p**2 * trail.ypp(s) + Mg * cc * trail.yp(s) ** 2)


def ski_turnpike_p2(params: SkiParams, trail: CircleTrail, s: float) -> float:
    """Right side of p^2 = M g c (r+ - r-) y'^2 / (2 J y'')."""
    Mg = params.M * params.g
    return Mg * params.c * (params.r_plus - params.r_minus) / (2 * params.J) * trail.yp(s) ** 2 / trail.ypp(s)


def ski_turnpike_p2_circle(params: SkiParams, trail: CircleTrail, s: float) -> float:
    k = trail.k
    Mg = params.M * params.g
    return Mg * (params.r_plus - params.r_minus) / (2 * abs(params.J)) * math.cos(k * s) ** 2 / math.sin(k * s)


def load_model(config: dict):
    """Build (params, envelope) from a parsed configuration document."""
    model = config.get("model", "swing")
    if model == "swing":
        params = SwingParams.from_dict(config.get("swing", {}))
        return params, make_swing_pair(params)
    if model == "ski":
        block = dict(config.get("ski", {}))
        params = SkiParams.from_dict(block)
        trail_cfg = block.get("trail", {"kind": "circle"})
        if trail_cfg.get("kind", "circle") != "circle":
            raise InvalidParams("only the circle trail is built in")
        trail = CircleTrail(float(trail_cfg.get("c", params.c)))
        if trail.c != params.c:
            raise InvalidParams("trail curvature must equal the ski curvature")
        return params, make_ski_pair(params, trail)
    raise InvalidParams(f"unknown model {model!r}")
