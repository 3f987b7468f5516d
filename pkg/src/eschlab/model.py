"""Double-well potentials, mobilities, equilibrium profiles and calibration constants.

All functions accept scalars or numpy arrays and return the same shape.
The logarithmic potential raises :class:`DomainError` outside ``(alpha, beta)``;
clamping is left to the time stepper.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from eschlab.errors import ConvergenceError, DomainError, SingularSystemError, UnsupportedPotentialError


class PotentialKind(str, enum.Enum):
    QUARTIC = "quartic"
    LOGARITHMIC = "log"


class MobilityKind(str, enum.Enum):
    CONSTANT = "constant"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the phase-field model.

    ``theta``, ``theta_c``, ``k1``, ``k2``, ``alpha`` and ``beta`` only enter the
    logarithmic potential. ``alpha`` and ``beta`` also bound the degenerate mobility.
    """

    potential_kind: PotentialKind = PotentialKind.QUARTIC
    mobility_kind: MobilityKind = MobilityKind.CONSTANT
    u_a: float = -1.0
    u_b: float = 1.0
    epsilon: float = 0.1
    mbar: float = 1.0
    theta: float = 0.5
    theta_c: float = 1.0
    k1: float = 1.0
    k2: float = 1.0
    alpha: float = -1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "potential_kind", PotentialKind(self.potential_kind))
        object.__setattr__(self, "mobility_kind", MobilityKind(self.mobility_kind))
        if not self.u_a < self.u_b:
            raise ValueError(f"wells must satisfy u_a < u_b, got {self.u_a}, {self.u_b}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.mbar > 0:
            raise ValueError(f"mbar must be positive, got {self.mbar}")
        if self.potential_kind is PotentialKind.LOGARITHMIC:
            if not self.alpha < self.u_a < self.u_b < self.beta:
                raise ValueError("logarithmic potential needs alpha < u_a < u_b < beta")
            if min(self.theta, self.theta_c, self.k1, self.k2) <= 0:
                raise ValueError("theta, theta_c, k1 and k2 must be positive")

    @classmethod
    def logarithmic(cls, theta=0.5, theta_c=1.0, k1=1.0, k2=1.0, alpha=-1.0, beta=1.0, **kwargs):
        """Logarithmic model with wells placed at the roots of ``f``."""
        mid = 0.5 * (alpha + beta)
        half = 0.5 * (beta - alpha)
        # f'(mid) < 0 is the double-well condition
        if theta / (k1 * half) >= theta_c / k2:
            raise ValueError("theta is above the critical value; the potential has a single well")

        def f(u):
            return theta / (2 * k1) * math.log((u - alpha) / (beta - u)) + theta_c / (2 * k2) * (alpha + beta - 2 * u)

        tiny = 1e-15 * (beta - alpha)
        lo = mid + 1e-9 * half
        hi = beta - tiny
        while f(hi) <= 0:
            tiny *= 10
            hi = beta - tiny
        u_b = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        u_a = 2 * mid - u_b
        kwargs.setdefault("mobility_kind", MobilityKind.DEGENERATE)
        return cls(
            potential_kind=PotentialKind.LOGARITHMIC, u_a=u_a, u_b=u_b, theta=theta, theta_c=theta_c,
            k1=k1, k2=k2, alpha=alpha, beta=beta, **kwargs,
        )

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)


def _as_output(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def _check_log_domain(params: ModelParams, u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= params.alpha) or np.any(u >= params.beta):
        raise DomainError(f"logarithmic potential is undefined outside ({params.alpha}, {params.beta})")
    return u


def potential_value(params: ModelParams, u):
    """Double-well energy density ``F(u)``."""
    if params.potential_kind is PotentialKind.QUARTIC:
        x = np.asarray(u, dtype=float)
        val = 0.25 * (params.u_b - x) ** 2 * (x - params.u_a) ** 2
        return _as_output(val, u)
    x = _check_log_domain(params, u)
    a, b = params.alpha, params.beta
    val = params.theta / (2 * params.k1) * ((b - x) * np.log(b - x) + (x - a) * np.log(x - a))
    val = val + params.theta_c / (2 * params.k2) * (b - x) * (x - a)
    return _as_output(val, u)


def potential_derivative(params: ModelParams, u):
    """``f(u) = F'(u)``."""
    if params.potential_kind is PotentialKind.QUARTIC:
        x = np.asarray(u, dtype=float)
        val = (x - params.u_a) * (x - params.u_b) * (x - 0.5 * (params.u_a + params.u_b))
        return _as_output(val, u)
    x = _check_log_domain(params, u)
    a, b = params.alpha, params.beta
    val = params.theta / (2 * params.k1) * np.log((x - a) / (b - x))
    val = val + params.theta_c / (2 * params.k2) * (a + b - 2 * x)
    return _as_output(val, u)


def potential_second_derivative(params: ModelParams, u):
    """``f'(u) = F''(u)``."""
    if params.potential_kind is PotentialKind.QUARTIC:
        c1, c2 = to_dimensionless(params)
        s = np.asarray(u, dtype=float) - c1
        return _as_output(3 * s**2 - c2**2, u)
    x = _check_log_domain(params, u)
    a, b = params.alpha, params.beta
    val = params.theta / (2 * params.k1) * (1 / (x - a) + 1 / (b - x)) - params.theta_c / params.k2
    return _as_output(val, u)


def potential_third_derivative(params: ModelParams, u):
    """``f''(u)``."""
    if params.potential_kind is PotentialKind.QUARTIC:
        c1, _ = to_dimensionless(params)
        return _as_output(6 * (np.asarray(u, dtype=float) - c1), u)
    x = _check_log_domain(params, u)
    a, b = params.alpha, params.beta
    val = params.theta / (2 * params.k1) * (1 / (b - x) ** 2 - 1 / (x - a) ** 2)
    return _as_output(val, u)


def split_derivative(params: ModelParams, u_new, u_old):
    """Convex-implicit / concave-explicit splitting of ``f``.

    Returns ``(value, d value / d u_new)``. For both potentials the concave
    part is linear in ``u``, so ``value`` reduces to ``f(u)`` when
    ``u_new == u_old``.
    """
    u_new = np.asarray(u_new, dtype=float)
    u_old = np.asarray(u_old, dtype=float)
    if params.potential_kind is PotentialKind.QUARTIC:
        c1, c2 = to_dimensionless(params)
        s = u_new - c1
        s2 = s * s
        return s2 * s - c2 * c2 * (u_old - c1), 3 * s2
    a, b = params.alpha, params.beta
    coef = params.theta / (2 * params.k1)
    convex = coef * np.log((u_new - a) / (b - u_new))
    concave = params.theta_c / (2 * params.k2) * (a + b - 2 * u_old)
    return convex + concave, coef * (1 / (u_new - a) + 1 / (b - u_new))


def mobility(params: ModelParams, u):
    """``M(u)``: constant ``mbar`` or ``|mbar (u - alpha)(beta - u)|``."""
    x = np.asarray(u, dtype=float)
    if params.mobility_kind is MobilityKind.CONSTANT:
        return _as_output(np.full_like(x, params.mbar), u)
    val = np.abs(params.mbar * (x - params.alpha) * (params.beta - x))
    return _as_output(val, u)


def to_dimensionless(params: ModelParams) -> tuple[float, float]:
    """Affine constants ``(c1, c2)`` with ``u = c1 + c2 * u_tilde`` mapping the wells to -1, 1."""
    return 0.5 * (params.u_b + params.u_a), 0.5 * (params.u_b - params.u_a)


def equilibrium_profile(params: ModelParams, y):
    """Closed-form planar equilibrium for the quartic potential at distance ``y``."""
    if params.potential_kind is not PotentialKind.QUARTIC:
        raise UnsupportedPotentialError("closed-form profile exists only for the quartic potential; use solve_profile")
    c1, c2 = to_dimensionless(params)
    y_arr = np.asarray(y, dtype=float)
    val = c1 + c2 * np.tanh(c2 * y_arr / (math.sqrt(2.0) * params.epsilon))
    return _as_output(val, y)


@dataclass(frozen=True)
class ProfileSolution:
    """Stretched-coordinate transition profile ``U0(z)`` and its constants."""

    z_nodes: np.ndarray = field(repr=False)
    u_values: np.ndarray = field(repr=False)
    s_constant: float
    t_constant: float | None = None

    @property
    def spacing(self) -> float:
        return float(self.z_nodes[1] - self.z_nodes[0])


def _gradient4(y, h):
    """Fourth-order central differences, second order at the two outer nodes."""
    y = np.asarray(y, dtype=float)
    d = np.gradient(y, h, edge_order=2)
    if y.size >= 5:
        d[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)
    return d


def profile_gradient(profile: ProfileSolution) -> np.ndarray:
    """``dU0/dz`` on the profile grid."""
    return _gradient4(profile.u_values, profile.spacing)


def _numerov_rows(h, fp):
    """Tridiagonal Numerov coefficients for ``y'' = q(z) y`` with ``q = fp``."""
    c = h * h / 12.0
    return 1 - c * fp, -2 - 10 * c * fp


def _half_profile(params: ModelParams, truncation: float, m: int, tol: float, max_iter: int):
    """Newton solve of ``U'' = f(U)`` on ``[0, truncation]`` with ``U(0)`` at the midpoint."""
    c1, c2 = to_dimensionless(params)
    z = np.linspace(0.0, truncation, m)
    h = z[1] - z[0]
    decay = math.sqrt(potential_second_derivative(params, params.u_b)) / 2
    u = c1 + c2 * np.tanh(decay * z)
    u[0], u[-1] = c1, params.u_b
    c = h * h / 12.0

    def residual(v):
        fv = potential_derivative(params, v)
        return (v[2:] - 2 * v[1:-1] + v[:-2]) - c * (fv[2:] + 10 * fv[1:-1] + fv[:-2])

    res = residual(u)
    norm = np.max(np.abs(res))
    for it in range(max_iter):
        if norm < tol:
            return z, u
        fp = potential_second_derivative(params, u)
        off, diag = _numerov_rows(h, fp)
        ab = np.zeros((3, m - 2))
        ab[0, 1:] = off[2:-1]
        ab[1] = diag[1:-1]
        ab[2, :-1] = off[1:-2]
        delta = solve_banded((1, 1), ab, -res)
        step = 1.0
        while True:
            trial = u.copy()
            trial[1:-1] += step * delta
            inside = params.potential_kind is PotentialKind.QUARTIC or (
                np.all(trial > params.alpha) and np.all(trial < params.beta)
            )
            if inside:
                new_res = residual(trial)
                new_norm = np.max(np.abs(new_res))
                if new_norm < norm or step < 1e-4:
                    break
            step *= 0.5
            if step < 1e-10:
                raise ConvergenceError("profile line search stalled", iterations=it, residual=norm)
        u, res, norm = trial, new_res, new_norm
        # update below roundoff: the residual cannot drop further
        if step * np.max(np.abs(delta)) < 1e-14 * (1 + np.max(np.abs(u))):
            return z, u
    if norm < tol:
        return z, u
    raise ConvergenceError(
        f"profile Newton did not converge in {max_iter} iterations (residual {norm:.3e})",
        iterations=max_iter, residual=norm,
    )


def solve_profile(params: ModelParams, truncation: float = 20.0, n: int = 4001,
                  tol: float = 1e-12, max_iter: int = 50) -> ProfileSolution:
    """Solve ``0 = -U'' + f(U)`` on ``[-truncation, truncation]`` with well values at the ends.

    Uses a fourth-order Numerov discretisation. The potentials here are
    symmetric about the midpoint of the wells, so the half problem on
    ``[0, truncation]`` with ``U(0) = (u_a + u_b)/2`` is solved and reflected;
    this also pins the translation mode of the full-line problem.
    ``n`` counts the nodes of the full grid and must be odd.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"n must be an odd count >= 3, got {n}")
    if truncation <= 0:
        raise ValueError("truncation must be positive")
    c1, _ = to_dimensionless(params)
    # residual is scaled by h^2; keep the stopping test relative to O(1) equations
    h = 2 * truncation / (n - 1)
    z_half, u_half = _half_profile(params, truncation, (n + 1) // 2, tol * h * h, max_iter)
    z = np.concatenate([-z_half[:0:-1], z_half])
    u = np.concatenate([2 * c1 - u_half[:0:-1], u_half])
    profile = ProfileSolution(z_nodes=z, u_values=u, s_constant=float("nan"))
    return replace(profile, s_constant=surface_tension_constant(profile, params))


def surface_tension_constant(profile: ProfileSolution, params: ModelParams) -> float:
    """``S(U0) = (int (dU0/dz)^2 dz) / (u_b - u_a)`` by the trapezoid rule."""
    du = profile_gradient(profile)
    return float(np.trapezoid(du**2, profile.z_nodes) / (params.u_b - params.u_a))


def solve_correction(profile: ProfileSolution, params: ModelParams, rhs=None):
    """First-order inner correction ``u~`` with zero slope at the truncation ends.

    Solves ``-u~'' + f'(U0) u~ = S - dU0/dz`` (or the supplied ``rhs``).
    ``dU0/dz`` spans the kernel of the operator, so the solution is fixed by
    orthogonality to it through a bordered system.
    """
    z = profile.z_nodes
    h = profile.spacing
    m = z.size
    du = profile_gradient(profile)
    if rhs is None:
        rhs = profile.s_constant - du
    g = np.broadcast_to(np.asarray(rhs, dtype=float), z.shape)
    q = potential_second_derivative(params, profile.u_values)
    c = h * h / 12.0
    # Numerov for u'' = q u - g, rows scaled by -1 so the operator is -d2 + q
    lower = -(1 - c * q[:-1])
    diag = -(-2 - 10 * c * q)
    upper = -(1 - c * q[1:])
    b = -c * (g[2:] + 10 * g[1:-1] + g[:-2])
    rhs_vec = np.empty(m)
    rhs_vec[1:-1] = -b
    # mirror ghost nodes give zero slope at both ends
    rhs_vec[0] = c * (10 * g[0] + 2 * g[1])
    rhs_vec[-1] = c * (10 * g[-1] + 2 * g[-2])
    up = upper.copy()
    lo = lower.copy()
    up[0] *= 2
    lo[-1] *= 2
    jac = sparse.diags([lo, diag, up], [-1, 0, 1], shape=(m, m), format="csc")
    border = du * h
    big = sparse.bmat([[jac, border[:, None]], [border[None, :], None]], format="csc")
    rhs_full = np.append(rhs_vec, 0.0)
    try:
        lu = splu(big)
    except RuntimeError as exc:
        raise SingularSystemError("correction system is singular", condition=math.inf) from exc
    piv = np.abs(lu.U.diagonal())
    cond = piv.max() / piv.min() if piv.min() > 0 else math.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(f"correction system is numerically singular (pivot ratio {cond:.2e})", condition=cond)
    sol = lu.solve(rhs_full)
    return sol[:-1]


def correction_constant(profile: ProfileSolution, params: ModelParams, rhs=None) -> float:
    """``T(U0)`` such that the next-order chemical potential is ``T kappa^2``."""
    z = profile.z_nodes
    h = profile.spacing
    ut = solve_correction(profile, params, rhs=rhs)
    du = profile_gradient(profile)
    dut = _gradient4(ut, h)
    dfp = potential_third_derivative(params, profile.u_values) * du
    integrand = dut * du - 0.5 * ut**2 * dfp
    return float(np.trapezoid(integrand, z) / (params.u_b - params.u_a))
