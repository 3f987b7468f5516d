import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eschlab import (
    MobilityKind,
    ModelParams,
    PotentialKind,
    correction_constant,
    equilibrium_profile,
    mobility,
    potential_derivative,
    potential_value,
    solve_profile,
    surface_tension_constant,
    to_dimensionless,
)
from eschlab.errors import DomainError, SingularSystemError, UnsupportedPotentialError
from eschlab.model import profile_gradient, solve_correction, split_derivative

PM1 = ModelParams()
POS = ModelParams(u_a=0.2, u_b=0.8)


@pytest.fixture(scope="module")
def profile_pm1():
    return solve_profile(PM1)


@pytest.fixture(scope="module")
def profile_pos():
    # the layer is 1/c2 wider for these wells, so the domain is doubled
    return solve_profile(POS, truncation=40.0, n=8001)


class TestParams:
    def test_rejects_unordered_wells(self):
        with pytest.raises(ValueError):
            ModelParams(u_a=1.0, u_b=-1.0)

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            ModelParams(epsilon=0.0)

    def test_logarithmic_wells_are_roots(self):
        p = ModelParams.logarithmic()
        assert p.alpha < p.u_a < p.u_b < p.beta
        assert p.u_a == pytest.approx(-p.u_b, abs=1e-15)
        assert potential_derivative(p, p.u_b) == pytest.approx(0.0, abs=1e-12)
        # u_b solves 0.25 log((1+u)/(1-u)) = u for theta=0.5, theta_c=1
        assert 0.25 * math.log((1 + p.u_b) / (1 - p.u_b)) == pytest.approx(p.u_b, abs=1e-12)

    def test_logarithmic_above_critical_theta(self):
        with pytest.raises(ValueError):
            ModelParams.logarithmic(theta=2.0)


class TestPotential:
    @pytest.mark.parametrize("u, expected", [(-1.0, 0.0), (0.0, 0.25), (1.0, 0.0)])
    def test_quartic_values(self, u, expected):
        assert potential_value(PM1, u) == pytest.approx(expected, abs=1e-15)

    def test_quartic_shifted_wells(self):
        # 1/4 (0.5-0.2)^2 (0.5-0.8)^2
        assert potential_value(POS, 0.5) == pytest.approx(0.25 * 0.09 * 0.09, rel=1e-12)

    @pytest.mark.parametrize("u, expected", [(1.0, 0.0), (0.0, 0.0), (0.5, 0.125 - 0.5)])
    def test_quartic_derivative(self, u, expected):
        assert potential_derivative(PM1, u) == pytest.approx(expected, abs=1e-15)

    def test_array_in_array_out(self):
        u = np.linspace(-1, 1, 5)
        assert potential_value(PM1, u).shape == (5,)
        assert isinstance(potential_value(PM1, 0.3), float)

    def test_log_domain_error(self):
        p = ModelParams.logarithmic()
        with pytest.raises(DomainError):
            potential_value(p, 1.0)
        with pytest.raises(DomainError):
            potential_derivative(p, -1.5)

    @given(u=st.floats(-0.95, 0.95), shift=st.floats(-2, 2), width=st.floats(0.1, 3))
    def test_derivative_matches_difference_quotient(self, u, shift, width):
        p = ModelParams(u_a=shift - width, u_b=shift + width)
        x = shift + u * width
        h = 1e-6 * width
        fd = (potential_value(p, x + h) - potential_value(p, x - h)) / (2 * h)
        assert potential_derivative(p, x) == pytest.approx(fd, rel=1e-5, abs=1e-9 * width**3)

    @given(u=st.floats(-0.99, 0.99))
    def test_log_derivative_matches_difference_quotient(self, u):
        p = ModelParams.logarithmic()
        h = 1e-7
        fd = (potential_value(p, u + h) - potential_value(p, u - h)) / (2 * h)
        assert potential_derivative(p, u) == pytest.approx(fd, rel=1e-5, abs=1e-7)

    @given(u=st.floats(-0.99, 0.99))
    def test_log_potential_symmetric_and_minimal_at_wells(self, u):
        p = ModelParams.logarithmic()
        assert potential_value(p, u) == pytest.approx(potential_value(p, -u), abs=1e-12)
        assert potential_value(p, u) >= potential_value(p, p.u_b) - 1e-14

    @given(new=st.floats(-2, 2), old=st.floats(-2, 2))
    def test_split_is_consistent(self, new, old):
        val, _ = split_derivative(PM1, new, new)
        assert val == pytest.approx(potential_derivative(PM1, new), abs=1e-12)

    @given(new=st.floats(-0.99, 0.99), old=st.floats(-0.99, 0.99))
    def test_log_split_is_consistent(self, new, old):
        p = ModelParams.logarithmic()
        val, _ = split_derivative(p, new, new)
        assert val == pytest.approx(potential_derivative(p, new), abs=1e-12)


class TestMobility:
    def test_constant(self):
        assert mobility(PM1.with_(mbar=5.0), 0.3) == 5.0

    @pytest.mark.parametrize("u, expected", [(-1.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    def test_degenerate(self, u, expected):
        p = PM1.with_(mobility_kind=MobilityKind.DEGENERATE)
        assert mobility(p, u) == pytest.approx(expected, abs=1e-15)

    @given(u=st.floats(-5, 5))
    def test_nonnegative(self, u):
        assert mobility(PM1.with_(mobility_kind=MobilityKind.DEGENERATE), u) >= 0


class TestDimensionless:
    @pytest.mark.parametrize("ua, ub, c1, c2", [(-1, 1, 0, 1), (0.2, 0.8, 0.5, 0.3), (0, 2, 1, 1)])
    def test_values(self, ua, ub, c1, c2):
        got = to_dimensionless(ModelParams(u_a=ua, u_b=ub))
        assert got == pytest.approx((c1, c2), abs=1e-15)


class TestEquilibriumProfile:
    def test_midpoint(self):
        assert equilibrium_profile(POS, 0.0) == pytest.approx(0.5)

    def test_saturation(self):
        assert equilibrium_profile(PM1, 1e3) == pytest.approx(1.0)

    def test_value(self):
        assert equilibrium_profile(PM1.with_(epsilon=1.0), math.sqrt(2)) == pytest.approx(math.tanh(1.0), abs=1e-12)

    def test_log_unsupported(self):
        with pytest.raises(UnsupportedPotentialError):
            equilibrium_profile(ModelParams.logarithmic(), 0.0)


class TestProfile:
    def test_matches_tanh(self, profile_pm1):
        err = np.max(np.abs(profile_pm1.u_values - np.tanh(profile_pm1.z_nodes / math.sqrt(2))))
        assert err < 1e-8

    def test_first_integral(self, profile_pm1):
        du = profile_gradient(profile_pm1)
        assert np.max(np.abs(0.5 * du**2 - potential_value(PM1, profile_pm1.u_values))) < 1e-6

    def test_midpoint_value(self, profile_pos):
        mid = profile_pos.z_nodes.size // 2
        assert profile_pos.z_nodes[mid] == 0.0
        assert profile_pos.u_values[mid] == pytest.approx(0.5, abs=1e-15)

    def test_slope_at_origin_shifted_wells(self, profile_pos):
        mid = profile_pos.z_nodes.size // 2
        # derivative of 0.5 + 0.3 tanh(0.3 z / sqrt 2) at z = 0
        assert profile_gradient(profile_pos)[mid] == pytest.approx(0.09 / math.sqrt(2), rel=1e-9)

    def test_log_profile_symmetric(self):
        p = ModelParams.logarithmic()
        prof = solve_profile(p)
        assert np.allclose(prof.u_values + prof.u_values[::-1], 0.0, atol=1e-14)
        assert np.all(np.diff(prof.u_values) >= 0)

    def test_even_node_count_rejected(self):
        with pytest.raises(ValueError):
            solve_profile(PM1, n=4000)


class TestSurfaceTension:
    def test_unit_wells(self, profile_pm1):
        assert surface_tension_constant(profile_pm1, PM1) == pytest.approx(math.sqrt(2) / 3, abs=1e-6)

    def test_shifted_wells(self, profile_pos):
        assert surface_tension_constant(profile_pos, POS) == pytest.approx(math.sqrt(2) / 3 * 0.09, rel=1e-9)

    def test_shifted_wells_default_grid(self):
        assert surface_tension_constant(solve_profile(POS), POS) == pytest.approx(math.sqrt(2) / 3 * 0.09, abs=1e-6)

    def test_flat_profile_gives_zero(self, profile_pm1):
        from dataclasses import replace

        flat = replace(profile_pm1, u_values=np.zeros_like(profile_pm1.u_values))
        assert surface_tension_constant(flat, PM1) == 0.0

    def test_log_constant_by_first_integral(self):
        # S (u_b - u_a) = int sqrt(2 (F(u) - F(u_b))) du over the wells
        from scipy.integrate import quad

        p = ModelParams.logarithmic()
        prof = solve_profile(p)
        floor = potential_value(p, p.u_b)
        ref, _ = quad(lambda u: math.sqrt(2 * max(potential_value(p, u) - floor, 0.0)), p.u_a, p.u_b, epsabs=1e-13)
        assert surface_tension_constant(prof, p) * (p.u_b - p.u_a) == pytest.approx(ref, rel=1e-6)


class TestCorrection:
    def test_zero_rhs(self, profile_pm1):
        ut = solve_correction(profile_pm1, PM1, rhs=0.0)
        assert np.max(np.abs(ut)) < 1e-12
        assert correction_constant(profile_pm1, PM1, rhs=0.0) == 0.0

    def test_grid_consistent(self, profile_pm1):
        t_fine = correction_constant(profile_pm1, PM1)
        t_coarse = correction_constant(solve_profile(PM1, n=2001), PM1)
        assert abs(t_fine - t_coarse) < 1e-6

    def test_truncation_insensitive(self, profile_pm1):
        t20 = correction_constant(profile_pm1, PM1)
        t40 = correction_constant(solve_profile(PM1, truncation=40.0, n=8001), PM1)
        assert abs(t20 - t40) < 1e-8

    def test_vanishes_by_parity(self, profile_pm1):
        assert abs(correction_constant(profile_pm1, PM1)) < 1e-10

    def test_correction_solves_equation(self, profile_pm1):
        # -u'' + f'(U0) u = S - U0' in the interior, by second differences
        z, h = profile_pm1.z_nodes, profile_pm1.spacing
        ut = solve_correction(profile_pm1, PM1)
        lap = (ut[2:] - 2 * ut[1:-1] + ut[:-2]) / h**2
        fpp = 3 * profile_pm1.u_values**2 - 1
        rhs = profile_pm1.s_constant - profile_gradient(profile_pm1)
        res = -lap + fpp[1:-1] * ut[1:-1] - rhs[1:-1]
        assert np.max(np.abs(res)) < 1e-3
        assert abs(np.trapezoid(ut * profile_gradient(profile_pm1), z)) < 1e-10

    def test_singular_operator_detected(self, profile_pm1):
        from dataclasses import replace

        # constant profile makes f'(U0) = -1: the bordered system is singular
        bad = replace(profile_pm1, u_values=np.zeros_like(profile_pm1.u_values))
        with pytest.raises(SingularSystemError):
            solve_correction(bad, PM1)


@settings(max_examples=10, deadline=None)
@given(half=st.floats(0.2, 2.0))
def test_surface_tension_scales_with_well_gap(half):
    p = ModelParams(u_a=-half, u_b=half)
    s = surface_tension_constant(solve_profile(p, truncation=20.0 / half, n=4001), p)
    assert s == pytest.approx(math.sqrt(2) / 3 * half**2, rel=1e-5)


def test_potential_kind_strings():
    assert PotentialKind("log") is PotentialKind.LOGARITHMIC
