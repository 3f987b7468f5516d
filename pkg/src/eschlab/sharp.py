"""Sharp-interface companion models.

Two reductions of the Mullins-Sekerka type limit problem with prescribed
domain motion are covered: a single point interface on a moving interval,
and two latitude interfaces on the unit sphere under the tangential flow
``vbar sin(theta) x_theta``. Both are integrated with classical RK4 and stop
at the first singular event (a phase region vanishing).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from eschlab.errors import DegenerateGeometryError, DomainError, RegionError
from eschlab.geometry import MovingInterval

EVENT_GAP = 1e-3
EVENT_TIME_TOL = 1e-6


@dataclass(frozen=True)
class SphereModelParams:
    vbar: float = 0.0
    mbar: float = 1.0
    s_const: float = math.sqrt(2.0) / 3.0
    u_a: float = -1.0
    u_b: float = 1.0

    def __post_init__(self):
        if not self.u_a < self.u_b:
            raise ValueError("u_a must be smaller than u_b")
        if not self.mbar > 0 or not self.s_const > 0 or self.vbar < 0:
            raise ValueError("need mbar > 0, s_const > 0 and vbar >= 0")


@dataclass(frozen=True)
class SharpCapState:
    """Polar angles of the interfaces bounding the north (1) and south (2) caps."""

    theta1: float
    theta2: float
    t: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta1 < self.theta2 < math.pi:
            raise DomainError(f"need 0 < theta1 < theta2 < pi, got ({self.theta1}, {self.theta2})")


def _log_tan_half(theta):
    return np.log(np.tan(0.5 * np.asarray(theta, dtype=float)))


def cap_coefficients(state: SharpCapState, p: SphereModelParams) -> tuple[float, float, float]:
    """``(c1a, c2b1, c2b2)`` for the band and the two caps."""
    th1, th2 = state.theta1, state.theta2
    denom = float(_log_tan_half(th1) - _log_tan_half(th2))
    if abs(denom) < 1e-12:
        raise DegenerateGeometryError("interfaces coincide; band coefficient undefined")
    ratio = p.vbar / p.mbar
    cot1, cot2 = 1 / math.tan(th1), 1 / math.tan(th2)
    c1a = (p.s_const * (cot1 + cot2) + ratio * p.u_a * (math.cos(th1) - math.cos(th2))) / denom
    c2b1 = p.s_const * cot1 + ratio * p.u_b * math.cos(th1)
    c2b2 = -p.s_const * cot2 + ratio * p.u_b * math.cos(th2)
    return c1a, c2b1, c2b2


def band_coefficients(state: SharpCapState, p: SphereModelParams) -> tuple[float, float]:
    """``(c1a, c2a)`` from the two Gibbs-Thomson values on the band edges (2x2 solve)."""
    th = np.array([state.theta1, state.theta2])
    kappa = np.array([1 / math.tan(th[0]), -1 / math.tan(th[1])])
    a = np.column_stack([_log_tan_half(th), np.ones(2)])
    b = p.s_const * kappa + p.u_a * p.vbar / p.mbar * np.cos(th)
    if abs(np.linalg.det(a)) < 1e-12:
        raise DegenerateGeometryError("interfaces coincide; band coefficient undefined")
    c1, c2 = np.linalg.solve(a, b)
    return float(c1), float(c2)


def cap_potential(theta: float, region: str, state: SharpCapState, p: SphereModelParams) -> float:
    """Chemical potential ``W(theta)`` in region ``b1`` (north cap), ``a`` (band) or ``b2`` (south cap)."""
    th1, th2 = state.theta1, state.theta2
    bounds = {"b1": (0.0, th1), "a": (th1, th2), "b2": (th2, math.pi)}
    if region not in bounds:
        raise RegionError(f"unknown region {region!r}")
    lo, hi = bounds[region]
    if not lo <= theta <= hi or theta in (0.0, math.pi):
        raise RegionError(f"theta={theta} lies outside region {region!r} = [{lo}, {hi}]")
    ratio = p.vbar / p.mbar
    if region == "a":
        c1, c2 = band_coefficients(state, p)
        return float(c1 * _log_tan_half(theta) - p.u_a * ratio * math.cos(theta) + c2)
    _, c2b1, c2b2 = cap_coefficients(state, p)
    c2 = c2b1 if region == "b1" else c2b2
    return -p.u_b * ratio * math.cos(theta) + c2


def cap_rhs(state: SharpCapState, p: SphereModelParams) -> tuple[float, float]:
    """``(theta1', theta2')`` from the flux balance across each interface."""
    c1a, _, _ = cap_coefficients(state, p)
    rate = p.mbar * c1a / (p.u_b - p.u_a)
    return rate / math.sin(state.theta1), rate / math.sin(state.theta2)


def sharp_energy(state: SharpCapState, p: SphereModelParams | None = None) -> float:
    """Interfacial energy ``S (u_b - u_a)`` times the total interface length.

    With the default parameters this is ``(4 sqrt(2) pi / 3)(sin theta1 + sin theta2)``.
    Accepts any angle pair, including coincident interfaces.
    """
    p = SphereModelParams() if p is None else p
    th1 = state.theta1 if isinstance(state, SharpCapState) else state[0]
    th2 = state.theta2 if isinstance(state, SharpCapState) else state[1]
    return p.s_const * (p.u_b - p.u_a) * 2 * math.pi * (math.sin(th1) + math.sin(th2))


@dataclass(frozen=True)
class Event:
    time: float
    kind: str


@dataclass
class CapTrajectory:
    times: list[float] = field(default_factory=list)
    theta1: list[float] = field(default_factory=list)
    theta2: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    event: Event | None = None

    def append(self, t, th1, th2, p):
        self.times.append(t)
        self.theta1.append(th1)
        self.theta2.append(th2)
        self.energy.append(sharp_energy((th1, th2), p))

    def at(self, t: float) -> tuple[float, float]:
        """Angles at time ``t`` by linear interpolation of the stored steps."""
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside the integrated range")
        return float(np.interp(t, self.times, self.theta1)), float(np.interp(t, self.times, self.theta2))


def _rk4(f, y, t, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, y0, t0, t_end, dt, valid, breakpoints=()):
    """Fixed-step RK4 landing on ``breakpoints`` and ``t_end``.

    Yields ``(t, y)`` after every accepted step. When a full step would
    leave the valid set, the admissible step length is located by bisection
    to ``EVENT_TIME_TOL`` and the generator returns the event time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    stops = sorted({b for b in breakpoints if t0 < b < t_end} | {t_end})
    t, y = t0, np.asarray(y0, dtype=float)
    f_outer = f
    for stop in stops:
        # stage times just after a breakpoint see the law that follows it
        start = t if t == t0 else float(np.nextafter(t, math.inf))

        def f(s, y, start=start):
            return f_outer(max(s, start), y)

        n = max(1, math.ceil((stop - t) / dt - 1e-9))
        h = (stop - t) / n
        for i in range(n):
            y_new = _try_step(f, y, t, h, valid)
            if y_new is None:
                lo, hi = 0.0, h
                while hi - lo > EVENT_TIME_TOL:
                    mid = 0.5 * (lo + hi)
                    if _try_step(f, y, t, mid, valid) is None:
                        hi = mid
                    else:
                        lo = mid
                if lo > 0:
                    y = _try_step(f, y, t, lo, valid)
                    yield t + lo, y
                return t + hi
            t = stop if i == n - 1 else t + h
            y = y_new
            yield t, y
    return None


def _try_step(f, y, t, h, valid):
    try:
        y_new = _rk4(f, y, t, h)
    except (DomainError, DegenerateGeometryError, ZeroDivisionError, ValueError):
        return None
    if not np.all(np.isfinite(y_new)) or not valid(t + h, y_new):
        return None
    return y_new


def _cap_event_kind(th1, th2):
    gaps = {"north-cap-vanishes": th1, "south-cap-vanishes": math.pi - th2, "band-vanishes": th2 - th1}
    return min(gaps, key=gaps.get)


def integrate_caps(initial: SharpCapState, p: SphereModelParams, t_end: float, dt: float = 1e-4) -> CapTrajectory:
    """RK4 trajectory of the cap angles, stopping at the first singular event.

    The event fires once ``min(theta1, pi - theta2, theta2 - theta1)`` would
    drop below ``EVENT_GAP``; its time is located to ``EVENT_TIME_TOL``.
    """

    def f(t, y):
        return np.array(cap_rhs(SharpCapState(y[0], y[1], t), p))

    def valid(t, y):
        return min(y[0], math.pi - y[1], y[1] - y[0]) >= EVENT_GAP

    traj = CapTrajectory()
    traj.append(initial.t, initial.theta1, initial.theta2, p)
    gen = _integrate(f, [initial.theta1, initial.theta2], initial.t, t_end, dt, valid)
    while True:
        try:
            t, y = next(gen)
        except StopIteration as stop:
            if stop.value is not None:
                th1, th2 = traj.theta1[-1], traj.theta2[-1]
                d1, d2 = cap_rhs(SharpCapState(th1, th2), p)
                # the gap closing fastest identifies the event
                h = 1e-9
                kind = _cap_event_kind(th1 + h * d1, th2 + h * d2)
                traj.event = Event(time=stop.value, kind=kind)
            return traj
        traj.append(t, float(y[0]), float(y[1]), p)


class Orientation(str, enum.Enum):
    MINUS_PLUS = "minus_plus"  # u_a on the left of the interface
    PLUS_MINUS = "plus_minus"


@dataclass(frozen=True)
class SharpIntervalState:
    lam: float
    t: float = 0.0
    orientation: Orientation = Orientation.MINUS_PLUS

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))


def _sides(orientation: Orientation, u_a: float, u_b: float):
    return (u_a, u_b) if orientation is Orientation.MINUS_PLUS else (u_b, u_a)


def interval_rhs(state: SharpIntervalState, domain: MovingInterval, u_a: float = -1.0, u_b: float = 1.0,
                 mbar: float = 1.0) -> float:
    """Interface velocity on a moving interval.

    In each phase ``M w'' = u_i v'`` with ``w' = 0`` at the outer ends, so
    ``M w'`` at the interface is ``u_L (v(lam) - v(0))`` from the left and
    ``u_R (v(lam) - v(L))`` from the right. The flux jump balances the
    relative interface motion. The mobility cancels, and the result is the
    mass balance ``(u_L - u_R) lam' + u_R L' = 0``.
    """
    length = domain.length(state.t)
    if not 0.0 < state.lam < length:
        raise DomainError(f"interface {state.lam} outside (0, {length})")
    u_left, u_right = _sides(state.orientation, u_a, u_b)
    v_lam = domain.velocity(state.lam, state.t)
    v_left = domain.velocity(0.0, state.t)
    v_right = domain.velocity(length, state.t)
    flux_left = u_left * (v_lam - v_left)
    flux_right = u_right * (v_lam - v_right)
    return float(v_lam - (flux_right - flux_left) / (u_right - u_left))


@dataclass
class IntervalTrajectory:
    times: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    event: Event | None = None

    def at(self, t: float) -> float:
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside the integrated range")
        return float(np.interp(t, self.times, self.lam))


def integrate_interval(initial: SharpIntervalState, domain: MovingInterval, t_end: float, dt: float = 1e-4,
                       u_a: float = -1.0, u_b: float = 1.0, mbar: float = 1.0) -> IntervalTrajectory:
    """RK4 trajectory of the interface, stopping if it reaches either end."""

    def f(t, y):
        return np.array([interval_rhs(SharpIntervalState(y[0], t, initial.orientation), domain, u_a, u_b, mbar)])

    def valid(t, y):
        return EVENT_GAP <= y[0] <= domain.length(t) - EVENT_GAP

    traj = IntervalTrajectory(times=[initial.t], lam=[initial.lam])
    gen = _integrate(f, [initial.lam], initial.t, t_end, dt, valid, domain.time_breakpoints)
    while True:
        try:
            t, y = next(gen)
        except StopIteration as stop:
            if stop.value is not None:
                near_left = traj.lam[-1] < 0.5 * domain.length(traj.times[-1])
                traj.event = Event(time=stop.value, kind="left-end" if near_left else "right-end")
            return traj
        traj.times.append(t)
        traj.lam.append(float(y[0]))
