"""Prescribed moving domains: intervals and axisymmetric surfaces of revolution.

Every domain carries a closed-form material (Lagrangian) flow map, so mesh
nodes can be placed exactly at any time. Surfaces of revolution are described
in the meridian plane by an axial and a radial coordinate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from eschlab.errors import DomainError

_STOP_TIME = 2.0


def _acot(s):
    """Inverse cotangent with range (0, pi)."""
    return np.pi / 2 - np.arctan(s)


class IntervalKind(str, enum.Enum):
    STRETCH_THEN_STOP = "stretch_then_stop"
    COMPRESS_THEN_STOP = "compress_then_stop"
    FIXED_UNIT = "fixed_unit"
    COTANGENT_GROWTH = "cotangent_growth"
    STATIC = "static"


@dataclass(frozen=True)
class MovingInterval:
    """Interval ``[0, length(t)]`` with a prescribed velocity law.

    ``STATIC`` is a non-moving interval of length ``static_length`` (used for
    gradient-flow checks); the other kinds follow the stretching, compressing,
    sine-flow and cotangent-growth laws of the 1D experiments.
    """

    kind: IntervalKind
    static_length: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", IntervalKind(self.kind))

    is_surface = False

    @property
    def time_breakpoints(self) -> tuple[float, ...]:
        """Times where the velocity law switches (integrators step onto these exactly)."""
        if self.kind in (IntervalKind.STRETCH_THEN_STOP, IntervalKind.COMPRESS_THEN_STOP):
            return (_STOP_TIME,)
        return ()

    def length_rate(self, t: float) -> float:
        """``d length / dt``, equal to the velocity at the right endpoint."""
        k = self.kind
        if k is IntervalKind.STRETCH_THEN_STOP:
            return 1.0 if t <= _STOP_TIME else 0.0
        if k is IntervalKind.COMPRESS_THEN_STOP:
            return -1.0 if t <= _STOP_TIME else 0.0
        if k is IntervalKind.COTANGENT_GROWTH:
            return 1.0 / (1.0 + (1.83 - t) ** 2)
        return 0.0

    def length(self, t: float) -> float:
        k = self.kind
        if k is IntervalKind.STRETCH_THEN_STOP:
            return 1.0 + min(t, _STOP_TIME)
        if k is IntervalKind.COMPRESS_THEN_STOP:
            return 3.0 - min(t, _STOP_TIME)
        if k is IntervalKind.FIXED_UNIT:
            return 1.0
        if k is IntervalKind.COTANGENT_GROWTH:
            return float(_acot(1.83 - t) + 0.5)
        return self.static_length

    def _check(self, x, t):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(1.0, self.length(t))
        if np.any(x < -tol) or np.any(x > self.length(t) + tol):
            raise DomainError(f"point outside [0, {self.length(t)}] at t={t}")
        return x

    def velocity(self, x, t):
        x = self._check(x, t)
        k = self.kind
        if k is IntervalKind.STRETCH_THEN_STOP:
            v = x / (1.0 + t) if t <= _STOP_TIME else 0.0 * x
        elif k is IntervalKind.COMPRESS_THEN_STOP:
            v = -x / (3.0 - t) if t <= _STOP_TIME else 0.0 * x
        elif k is IntervalKind.FIXED_UNIT:
            v = np.sin(np.pi * x)
        elif k is IntervalKind.COTANGENT_GROWTH:
            v = np.where(x >= 0.5, np.sin(x - 0.5) ** 2, 0.0)
        else:
            v = 0.0 * x
        return v if np.ndim(v) else float(v)

    def divergence(self, x, t):
        x = self._check(x, t)
        k = self.kind
        if k is IntervalKind.STRETCH_THEN_STOP:
            d = np.full_like(x, 1.0 / (1.0 + t) if t <= _STOP_TIME else 0.0)
        elif k is IntervalKind.COMPRESS_THEN_STOP:
            d = np.full_like(x, -1.0 / (3.0 - t) if t <= _STOP_TIME else 0.0)
        elif k is IntervalKind.FIXED_UNIT:
            d = np.pi * np.cos(np.pi * x)
        elif k is IntervalKind.COTANGENT_GROWTH:
            d = np.where(x >= 0.5, np.sin(2 * (x - 0.5)), 0.0)
        else:
            d = np.zeros_like(x)
        return d if np.ndim(d) else float(d)

    def reference_nodes(self, n_cells: int) -> np.ndarray:
        return np.linspace(0.0, self.length(0.0), n_cells + 1)

    def flow(self, labels, t):
        """Current position at time ``t`` of the material points starting at ``labels``."""
        X = np.asarray(labels, dtype=float)
        k = self.kind
        if k in (IntervalKind.STRETCH_THEN_STOP, IntervalKind.COMPRESS_THEN_STOP):
            return X * (self.length(t) / self.length(0.0))
        if k is IntervalKind.FIXED_UNIT:
            # tan(pi x / 2) grows like exp(pi t)
            x = 2 / np.pi * np.arctan(np.tan(np.pi * X / 2) * np.exp(np.pi * t))
            return np.where(X >= 1.0, 1.0, x)
        if k is IntervalKind.COTANGENT_GROWTH:
            y0 = np.maximum(X - 0.5, 0.0)
            with np.errstate(divide="ignore"):
                moved = 0.5 + _acot(1 / np.tan(y0) - t)
            return np.where(X > 0.5, moved, X)
        return X.copy()

    def meridian(self, labels, t):
        x = self.flow(labels, t)
        return x, x, None


@dataclass(frozen=True)
class UnitSphereTangential:
    """Unit sphere with the tangential field ``vbar sin(theta) x_theta`` pushing mass south."""

    vbar: float = 0.0

    is_surface = True

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0) or np.any(theta >= np.pi):
            raise DomainError("polar angle must lie strictly inside (0, pi)")
        return theta

    def metric_factors(self, theta, t=0.0):
        theta = self._check(theta)
        return _out(np.ones_like(theta)), _out(np.sin(theta))

    def velocity(self, theta, t=0.0):
        theta = self._check(theta)
        return _out(self.vbar * np.sin(theta))

    def divergence(self, theta, t=0.0):
        theta = self._check(theta)
        return _out(2 * self.vbar * np.cos(theta))

    def reference_nodes(self, n_cells: int) -> np.ndarray:
        # cell-centred: no node sits on a pole
        return (np.arange(n_cells) + 0.5) * np.pi / n_cells

    def flow(self, labels, t):
        theta0 = np.asarray(labels, dtype=float)
        return 2 * np.arctan(np.tan(theta0 / 2) * np.exp(self.vbar * t))

    def meridian(self, labels, t):
        theta = self.flow(labels, t)
        return theta, np.cos(theta), np.sin(theta)

    def position(self, theta, phi, t=0.0):
        """Point of the unit sphere at polar angle ``theta`` and azimuth ``phi``."""
        return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def _rho(x):
    return 1.0 - 0.5 * np.cos(2 * np.pi * x) ** 2


def _drho(x):
    return np.pi * np.sin(4 * np.pi * x)


@dataclass(frozen=True)
class DeformingSphere:
    """Unit sphere pinched along the x-axis by ``rho(x) = 1 - cos(2 pi x)^2 / 2``.

    The reference coordinate is the polar angle about the x-axis. The blend
    factor between the sphere and the pinched shape ramps linearly from 0 at
    ``t = 0`` to ``full_amplitude`` at ``t = ramp_time`` and is frozen
    afterwards, so the surface is static (zero velocity) for
    ``t > ramp_time``. The defaults give the blend ``min(t, 0.05)``;
    ``full_amplitude=1`` reaches the fully pinched shape.
    """

    ramp_time: float = 0.05
    full_amplitude: float = 0.05

    is_surface = True

    def amplitude(self, t):
        return self.full_amplitude * min(max(t, 0.0), self.ramp_time) / self.ramp_time

    def amplitude_rate(self, t):
        return self.full_amplitude / self.ramp_time if 0.0 <= t < self.ramp_time else 0.0

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0) or np.any(theta >= np.pi):
            raise DomainError("polar angle must lie strictly inside (0, pi)")
        return theta

    def _radius_and_slope(self, theta, s):
        c, sn = np.cos(theta), np.sin(theta)
        scale = 1 - s + s * _rho(c)
        r = sn * scale
        dr = c * scale - s * sn**2 * _drho(c)
        return r, dr

    def map(self, theta, phi, t):
        """3D position ``Q`` of the reference point with polar angle ``theta`` about the x-axis."""
        s = self.amplitude(t)
        x = np.cos(theta)
        y, z = np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi)
        return np.array([x, (1 - s + s * _rho(x)) * y, (1 - s + s * _rho(x)) * z])

    def metric_factors(self, theta, t):
        theta = self._check(theta)
        r, dr = self._radius_and_slope(theta, self.amplitude(t))
        g = np.sqrt(np.sin(theta) ** 2 + dr**2)
        return _out(g), _out(r)

    def _normal_velocity_parts(self, theta, t):
        # meridian-plane velocity is purely radial: d/dt of the radius at fixed label
        sdot = self.amplitude_rate(t)
        c, sn = np.cos(theta), np.sin(theta)
        vr = sdot * sn * (_rho(c) - 1)
        return sdot, vr

    def velocity(self, theta, t):
        """Tangential (meridional) component of the material velocity."""
        theta = self._check(theta)
        _, vr = self._normal_velocity_parts(theta, t)
        r, dr = self._radius_and_slope(theta, self.amplitude(t))
        g = np.sqrt(np.sin(theta) ** 2 + dr**2)
        return _out(vr * dr / g)

    def divergence(self, theta, t):
        """Surface divergence, the rate of change of ``log(r g)`` at a fixed material label."""
        theta = self._check(theta)
        s = self.amplitude(t)
        sdot, _ = self._normal_velocity_parts(theta, t)
        c, sn = np.cos(theta), np.sin(theta)
        r, dr = self._radius_and_slope(theta, s)
        g2 = sn**2 + dr**2
        dr_ds = sn * (_rho(c) - 1)
        ddr_ds = c * (_rho(c) - 1) - sn**2 * _drho(c)
        return _out(sdot * (dr_ds / r + dr * ddr_ds / g2))

    def reference_nodes(self, n_cells: int) -> np.ndarray:
        return (np.arange(n_cells) + 0.5) * np.pi / n_cells

    def flow(self, labels, t):
        return np.asarray(labels, dtype=float).copy()

    def meridian(self, labels, t):
        theta = np.asarray(labels, dtype=float)
        r, _ = self._radius_and_slope(theta, self.amplitude(t))
        return theta.copy(), np.cos(theta), r


def _out(a):
    return a if np.ndim(a) else float(a)


def velocity(domain, point, t):
    """Material velocity: scalar for intervals, meridional component for surfaces."""
    return domain.velocity(point, t)


def surface_divergence(domain, point, t):
    return domain.divergence(point, t)


def domain_length(domain: MovingInterval, t: float) -> float:
    return domain.length(t)


def metric_factors(domain, theta, t=0.0):
    """``(g, rho_circ)``: arclength stretch and distance to the symmetry axis."""
    return domain.metric_factors(theta, t)


def geodesic_curvature_latitude(theta, cap_index: int):
    """Signed geodesic curvature ``(-1)^(k+1) cot(theta)`` of a latitude circle on the unit sphere.

    The sign is taken with respect to the co-normal pointing into cap ``k``
    (cap 1 around the north pole, cap 2 around the south pole).
    """
    if cap_index not in (1, 2):
        raise ValueError("cap_index must be 1 or 2")
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr <= 0) or np.any(theta_arr >= np.pi):
        raise DomainError("geodesic curvature is undefined at the poles")
    sign = 1.0 if cap_index == 1 else -1.0
    return _out(sign / np.tan(theta_arr))


def surface_area(domain, t: float, n_cells: int = 2000) -> float:
    """Area of the surface of revolution by exact frustum quadrature of the meridian polyline."""
    labels = np.linspace(0.0, np.pi, n_cells + 1)
    _, axial, radial = domain.meridian(labels, t)
    seg = np.hypot(np.diff(axial), np.diff(radial))
    return float(math.pi * np.sum(seg * (radial[1:] + radial[:-1])))
