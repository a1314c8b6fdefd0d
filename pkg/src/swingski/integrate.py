"""Arc, covector and variational integration for x' = F + uG."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import EventNotFound, GVanishes, LeftTurnpike, StepFailure
from .vecfield import (
    AffinePair,
    grad_delta_b,
    delta_a,
    delta_b,
    lie_bracket,
    normalized_delta_b,
    turnpike_control,
)

RTOL = 1e-11
ATOL = 1e-13
LOCUS_TOL = 1e-8
SINGULAR_GAIN = 10.0

BANG_PLUS = "BangPlus"
BANG_MINUS = "BangMinus"
SINGULAR = "Singular"
FEEDBACK = "Feedback"
SHORT = {BANG_PLUS: "Y", BANG_MINUS: "X", SINGULAR: "Z", FEEDBACK: "W"}


# ------------------------------------------------------------------ events


@dataclass(frozen=True)
class Event:
    """Scalar event g(t, y); ``y`` may carry a covector in y[2:4]."""

    name: str
    fun: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: float = 0.0

    def as_solver_event(self):
        def ev(t, y):
            return self.fun(t, y)

        ev.terminal = self.terminal
        ev.direction = self.direction
        return ev


def event_x2_zero(direction: float = 0.0) -> Event:
    return Event("x2=0", lambda t, y: y[1], True, direction)


def event_sin_x1_zero(direction: float = 0.0) -> Event:
    return Event("sin(x1)=0", lambda t, y: math.sin(y[0]), True, direction)


def event_target_x1(value: float, direction: float = 0.0) -> Event:
    return Event("x1=target", lambda t, y: y[0] - value, True, direction)


def event_delta_b(pair: AffinePair, direction: float = 0.0) -> Event:
    return Event("delta_b=0", lambda t, y: normalized_delta_b(pair, y[:2]), True, direction)


def event_delta_a(pair: AffinePair, direction: float = 0.0) -> Event:
    return Event("delta_a=0", lambda t, y: delta_a(pair, y[:2]), True, direction)


def event_switching(pair: AffinePair, direction: float = 0.0) -> Event:
    """Zero of lambda . G; needs a co-integrated covector."""
    return Event("switch", lambda t, y: float(y[2:4] @ pair.G(y[:2])), True, direction)


# -------------------------------------------------------------------- arcs


def bang_label(u: float) -> str:
    return BANG_PLUS if u > 0 else BANG_MINUS


@dataclass
class Arc:
    label: str
    t0: float
    t1: float
    t: np.ndarray
    y: np.ndarray  # (n, 2) or (n, 4) with the covector appended
    u: np.ndarray
    sol: Optional[Callable[[float], np.ndarray]] = None
    event: Optional[str] = None
    control: Optional[Callable[[float, np.ndarray], float]] = None
    event_times: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.y[:, :2]

    @property
    def lam(self) -> Optional[np.ndarray]:
        return self.y[:, 2:4] if self.y.shape[1] >= 4 else None

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def start(self) -> np.ndarray:
        return self.y[0, :2].copy()

    @property
    def end(self) -> np.ndarray:
        return self.y[-1, :2].copy()

    def at(self, t: float) -> np.ndarray:
        """Full (state[, covector]) at time t by dense interpolation."""
        if self.sol is None or self.t1 == self.t0:
            return self.y[0].copy()
        return np.asarray(self.sol(min(max(t, self.t0), self.t1)), dtype=float)

    def state(self, t: float) -> np.ndarray:
        return self.at(t)[:2]

    def u_at(self, t: float) -> float:
        if self.control is None:
            return float(self.u[0])
        return float(self.control(t, self.state(t)))

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.linspace(self.t0, self.t1, n)
        return ts, np.array([self.at(s) for s in ts])


def _singular_control(pair: AffinePair, gain: float):
    def u_of(t, x):
        n = grad_delta_b(pair, x)
        den = float(n @ pair.G(x))
        return -(float(n @ pair.F(x)) + gain * delta_b(pair, x)) / den

    return u_of


def _control_for(pair, label, control, gain):
    if label == BANG_PLUS:
        return lambda t, x: 1.0
    if label == BANG_MINUS:
        return lambda t, x: -1.0
    if label == SINGULAR:
        return _singular_control(pair, gain)
    if label == FEEDBACK:
        if control is None:
            raise ValueError("feedback arcs need a control function")
        return control
    raise ValueError(f"unknown arc label {label!r}")


def integrate_arc(
    pair: AffinePair,
    x0,
    label: str,
    duration: Optional[float] = None,
    events: Sequence[Event] = (),
    *,
    control: Optional[Callable[[float, np.ndarray], float]] = None,
    lam0=None,
    t0: float = 0.0,
    max_time: float = 50.0,
    rtol: float = RTOL,
    atol: float = ATOL,
    singular_gain: float = SINGULAR_GAIN,
    locus_tol: float = LOCUS_TOL,
    on_irregular: str = "raise",
) -> Arc:
    """Integrate one arc with a fixed control law.

    Stops after ``duration`` or at the first terminal event; with no duration
    and no event firing before ``max_time`` an EventNotFound is raised.
    Singular arcs use phi(x) with a restoring term that pulls delta_b back
    to zero; reaching |u| = 1 or drifting off the locus raises LeftTurnpike
    (or ends the arc when ``on_irregular='stop'``).
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = x0 if lam0 is None else np.concatenate([x0, np.asarray(lam0, float)])
    if not np.all(np.isfinite(y0)):
        raise StepFailure("non-finite initial condition")
    u_of = _control_for(pair, label, control, singular_gain)
    with_lam = lam0 is not None

    if label == SINGULAR:
        ndb = abs(normalized_delta_b(pair, x0))
        if ndb > 10 * locus_tol:
            raise LeftTurnpike(f"start point is off the locus (|delta_b| normalized = {ndb:.3g})")

    def rhs(t, y):
        x = y[:2]
        u = u_of(t, x)
        dx = pair.F(x) + u * pair.G(x)
        if not with_lam:
            return dx
        J = pair.F.jac(x) + u * pair.G.jac(x)
        return np.concatenate([dx, -(y[2:4] @ J)])

    if duration is not None and duration == 0.0:
        u = np.array([u_of(t0, x0)])
        return Arc(label, t0, t0, np.array([t0]), y0[None, :].copy(), u, None, None, u_of)
    if duration is not None and duration < 0:
        raise ValueError("duration must be nonnegative")

    solver_events = [e.as_solver_event() for e in events]
    names = [e.name for e in events]
    if label == SINGULAR:
        solver_events.append(Event("saturation", lambda t, y: 1.0 - abs(u_of(t, y[:2])), True, -1).as_solver_event())
        solver_events.append(
            Event("off_locus", lambda t, y: 10 * locus_tol - abs(normalized_delta_b(pair, y[:2])), True, -1).as_solver_event()
        )
        names += ["saturation", "off_locus"]

    t_end = t0 + (duration if duration is not None else max_time)
    try:
        res = solve_ivp(rhs, (t0, t_end), y0, method="DOP853", rtol=rtol, atol=atol, events=solver_events or None, dense_output=True)
    except (ZeroDivisionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise StepFailure(str(exc)) from exc
    if res.status == -1 or not np.all(np.isfinite(res.y)):
        raise StepFailure(res.message)

    fired = None
    terminal = [e.terminal for e in events] + [True] * (len(names) - len(events))
    if res.status == 1:
        hit = [(res.t_events[k][-1], k) for k in range(len(names)) if terminal[k] and len(res.t_events[k])]
        fired = names[max(hit)[1]]
    if fired in ("saturation", "off_locus"):
        if on_irregular != "stop":
            raise LeftTurnpike(f"singular arc {fired.replace('_', ' ')} at t={res.t[-1]:.6g}")
    if duration is None and fired is None:
        raise EventNotFound(f"no terminal event before t={t_end}")

    ts, ys = res.t, res.y.T
    us = np.array([u_of(s, y[:2]) for s, y in zip(ts, ys)])
    times = {n: np.asarray(res.t_events[k]) for k, n in enumerate(names)} if names else {}
    return Arc(label, float(ts[0]), float(ts[-1]), ts, ys, us, res.sol, fired, u_of, times)


# ------------------------------------------------------------- trajectories


@dataclass
class Trajectory:
    arcs: list[Arc] = field(default_factory=list)

    @property
    def T(self) -> float:
        return float(sum(a.duration for a in self.arcs))

    @property
    def start(self) -> np.ndarray:
        return self.arcs[0].start

    @property
    def end(self) -> np.ndarray:
        return self.arcs[-1].end

    @property
    def pattern(self) -> str:
        """Arc letters in time order, e.g. 'YXY'; zero-length arcs dropped."""
        return "".join(SHORT[a.label] for a in self.arcs if a.duration > 0)

    @property
    def switch_times(self) -> list[float]:
        return [a.t0 for a in self.arcs[1:] if a.duration > 0]

    def arc_at(self, t: float) -> Arc:
        for a in self.arcs:
            if t <= a.t1:
                return a
        return self.arcs[-1]

    def state(self, t: float) -> np.ndarray:
        return self.arc_at(t).state(t)

    def samples(self):
        """Concatenated (t, y, u) over all arcs, junction samples kept once per arc."""
        t = np.concatenate([a.t for a in self.arcs])
        y = np.concatenate([a.y for a in self.arcs])
        u = np.concatenate([a.u for a in self.arcs])
        return t, y, u

    def validate(self, tol: float = 1e-7) -> None:
        for a in self.arcs:
            if a.t.size > 1 and not np.all(np.diff(a.t) > 0):
                raise ValueError(f"arc {a.label} samples not increasing")
            if abs(a.t[0] - a.t0) > 1e-12 or abs(a.t[-1] - a.t1) > 1e-12:
                raise ValueError("arc endpoints do not match t0, t1")
        for a, b in zip(self.arcs, self.arcs[1:]):
            gap = np.linalg.norm(a.end - b.start)
            if gap > tol * (1.0 + np.linalg.norm(a.end)):
                raise ValueError(f"junction mismatch {gap:.3g}")
            if abs(a.t1 - b.t0) > 1e-12:
                raise ValueError("junction times differ")


@dataclass
class Extremal:
    trajectory: Trajectory
    lambda0: float

    @property
    def lam(self) -> np.ndarray:
        return np.concatenate([a.lam for a in self.trajectory.arcs])

    @property
    def T(self) -> float:
        return self.trajectory.T

    def covector(self, t: float) -> np.ndarray:
        return self.trajectory.arc_at(t).at(t)[2:4]


def integrate_schedule(
    pair: AffinePair,
    x0,
    schedule: Iterable[tuple[str, float]],
    lam0=None,
    **kw,
) -> Trajectory:
    """Chain arcs from (label, duration) pairs."""
    arcs, y, t = [], np.asarray(x0, float), 0.0
    lam = lam0
    for label, dur in schedule:
        arc = integrate_arc(pair, y, label, dur, t0=t, lam0=lam, **kw)
        arcs.append(arc)
        y, t = arc.end, arc.t1
        lam = None if arc.lam is None else arc.lam[-1]
    return Trajectory(arcs)


def follow_extremal(
    pair: AffinePair,
    x0,
    lam0,
    u0: float,
    events: Sequence[Event] = (),
    *,
    t0: float = 0.0,
    max_time: float = 50.0,
    max_switches: int = 8,
    **kw,
) -> tuple[Extremal, Optional[str]]:
    """Bang-bang PMP extremal: flip u at each zero of lambda . G.

    Returns the extremal and the name of the user event that ended it (None
    when ``max_time`` or ``max_switches`` ran out).
    """
    x, lam, u, t = np.asarray(x0, float), np.asarray(lam0, float), float(u0), t0
    arcs: list[Arc] = []
    stop = None
    for _ in range(max_switches + 1):
        sw = event_switching(pair, direction=-u)
        remaining = t0 + max_time - t
        if remaining <= 0:
            break
        try:
            arc = integrate_arc(pair, x, bang_label(u), None, list(events) + [sw], lam0=lam, t0=t, max_time=remaining, **kw)
        except EventNotFound:
            arc = integrate_arc(pair, x, bang_label(u), remaining, list(events), lam0=lam, t0=t, **kw)
            arcs.append(arc)
            break
        arcs.append(arc)
        x, lam, t = arc.end, arc.lam[-1], arc.t1
        if arc.event != "switch":
            stop = arc.event
            break
        u = -u
    H0 = hamiltonian(pair, arcs[0].lam[0], arcs[0].start, float(arcs[0].u[0]))
    return Extremal(Trajectory(arcs), lambda0=-H0), stop


# ------------------------------------------------------ covector / variational


@dataclass
class Path:
    t: np.ndarray
    v: np.ndarray
    sol: Callable[[float], np.ndarray]

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.sol(t), dtype=float)


def _linear_flow(pair, arc, v_init, t_from, t_to, sign, rtol, atol, dim=2):
    if arc.sol is None or t_from == t_to:
        v = np.asarray(v_init, float)
        return Path(np.array([t_from]), v[None, :], lambda t: v)
    lo, hi = min(t_from, t_to), max(t_from, t_to)
    if lo < arc.t0 - 1e-12 or hi > arc.t1 + 1e-12:
        raise ValueError("requested interval outside the arc")

    def rhs(t, v):
        x = arc.state(t)
        J = pair.jac(x, arc.u_at(t))
        if sign > 0:
            return (J @ v.reshape(2, -1)).ravel()
        return -(v @ J)

    res = solve_ivp(rhs, (t_from, t_to), np.asarray(v_init, float), method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if res.status != 0:
        raise StepFailure(res.message)
    return Path(res.t, res.y.T, res.sol)


def integrate_covector(
    pair, arc: Arc, lambda_init, direction: str = "forward", t_start: Optional[float] = None, rtol=1e-11, atol=1e-13
) -> Path:
    """lambda' = -lambda (DF + u DG).

    Forward runs from ``t_start`` (default arc.t0) to arc.t1, backward from
    ``t_start`` (default arc.t1) to arc.t0.
    """
    if not np.any(np.asarray(lambda_init) != 0):
        raise ValueError("covector must be nonzero")
    if direction == "forward":
        t_from = arc.t0 if t_start is None else t_start
        return _linear_flow(pair, arc, lambda_init, t_from, arc.t1, -1, rtol, atol)
    if direction == "backward":
        t_from = arc.t1 if t_start is None else t_start
        return _linear_flow(pair, arc, lambda_init, t_from, arc.t0, -1, rtol, atol)
    raise ValueError("direction must be 'forward' or 'backward'")


def integrate_variational(pair, arc: Arc, v_init, t_from: float, t_to: float, rtol=1e-11, atol=1e-13) -> Path:
    """v' = (DF + u DG) v between any two times of the arc."""
    return _linear_flow(pair, arc, v_init, t_from, t_to, +1, rtol, atol)


def fundamental_matrix(pair, arc: Arc, t_from: Optional[float] = None, rtol=1e-11, atol=1e-13) -> Path:
    """Columns evolve by the variational equation; identity at t_from."""
    t_from = arc.t0 if t_from is None else t_from
    p = _linear_flow(pair, arc, np.eye(2).ravel(), t_from, arc.t1, +1, rtol, atol)
    return p


# ------------------------------------------------------------- PMP scalars


def hamiltonian(pair: AffinePair, lam, x, u: float) -> float:
    return float(np.asarray(lam, float) @ pair.field(x, u))


def max_hamiltonian(pair: AffinePair, lam, x) -> float:
    lam = np.asarray(lam, float)
    return float(lam @ pair.F(x) + abs(lam @ pair.G(x)))


def maximizing_control(pair: AffinePair, lam, x) -> Optional[float]:
    s = float(np.asarray(lam, float) @ pair.G(x))
    if s == 0.0:
        return None
    return 1.0 if s > 0 else -1.0


def switching_function(extremal: Extremal, pair: AffinePair) -> tuple[np.ndarray, np.ndarray]:
    t, y, _ = extremal.trajectory.samples()
    return t, np.array([row[2:4] @ pair.G(row[:2]) for row in y])


def pmp_residual(extremal: Extremal, pair: AffinePair) -> float:
    """max |H + lambda0| over the samples."""
    t, y, u = extremal.trajectory.samples()
    return float(max(abs(hamiltonian(pair, r[2:4], r[:2], uu) + extremal.lambda0) for r, uu in zip(y, u)))


# ---------------------------------------------------------- rotation angle


@dataclass
class Rotation:
    t: np.ndarray
    alpha: np.ndarray
    rate: np.ndarray


def rotation_angle(pair: AffinePair, arc: Arc, t0: Optional[float] = None, n: int = 200) -> Rotation:
    """Angle of v(G(gamma(t)), t; t0) relative to G(gamma(t0)).

    The transported vector is w(t) = Phi(t)^{-1} G(gamma(t)) with Phi the
    fundamental matrix from t0; its derivative is Phi^{-1} [F, G], so the
    returned ``rate`` has the sign of delta_b.
    """
    t0 = arc.t0 if t0 is None else t0
    phi = fundamental_matrix(pair, arc, t0)
    ts = np.linspace(t0, arc.t1, n)
    ws, rates = [], []
    for s in ts:
        P = phi.at(s).reshape(2, 2)
        x = arc.state(s)
        Gx = pair.G(x)
        if np.linalg.norm(Gx) == 0.0:
            raise GVanishes(f"G vanishes at t={s}")
        w = np.linalg.solve(P, Gx)
        wd = np.linalg.solve(P, lie_bracket(pair, x))
        ws.append(w)
        rates.append((w[0] * wd[1] - w[1] * wd[0]) / (w @ w))
    ws = np.array(ws)
    ang = np.unwrap(np.arctan2(ws[:, 1], ws[:, 0]))
    return Rotation(ts, ang - ang[0], np.array(rates))


# ------------------------------------------------------------------ export

CSV_COLUMNS = ("t", "x1", "x2", "u", "lambda1", "lambda2", "phi_lambda", "H")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_rows(pair: AffinePair, trajectory: Trajectory):
    for arc in trajectory.arcs:
        for s, y, u in zip(arc.t, arc.y, arc.u):
            if y.shape[0] >= 4:
                lam = y[2:4]
                phl = float(lam @ pair.G(y[:2]))
                H = hamiltonian(pair, lam, y[:2], u)
                yield (s, y[0], y[1], u, lam[0], lam[1], phl, H)
            else:
                yield (s, y[0], y[1], u, math.nan, math.nan, math.nan, math.nan)


def export_csv(pair: AffinePair, trajectory: Optional[Trajectory], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        if trajectory is None:
            return
        for row in trajectory_rows(pair, trajectory):
            w.writerow([_fmt(v) for v in row])


def load_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        rows = [[float(v) for v in row] for row in r]
    return np.array(rows).reshape(-1, len(CSV_COLUMNS))
