import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eschlab import esfem
from eschlab.errors import ConvergenceError, MeshTanglingError
from eschlab.geometry import DeformingSphere, IntervalKind, MovingInterval, UnitSphereTangential
from eschlab.model import MobilityKind, ModelParams
from eschlab.presets import initial_profile
from eschlab.sharp import sharp_energy

PM1 = ModelParams()
STATIC = MovingInterval(IntervalKind.STATIC)
STRETCH = MovingInterval(IntervalKind.STRETCH_THEN_STOP)


def tanh_profile(center, eps):
    return lambda x, p: np.tanh((x - center) / (eps * math.sqrt(2)))


class TestConfig:
    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            esfem.SolverConfig(dt=0.0)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            esfem.SolverConfig(newton_tol=-1.0)

    def test_end_time_from_outputs(self):
        assert esfem.SolverConfig(output_times=(0.5, 0.2)).end_time == 0.5

    def test_default_resolution(self):
        assert esfem.default_n_cells(1.0, 0.4) == 64
        assert esfem.default_n_cells(1.0, 0.025) == 640
        assert esfem.default_dt(0.4) == 1e-3
        assert esfem.default_dt(0.025) == pytest.approx(0.025**2 / 4)
        assert esfem.default_dt(0.1, 50.0) == pytest.approx(0.01 / 200)


class TestInitialize:
    def test_constant_profile(self):
        st_ = esfem.initialize(MovingInterval(IntervalKind.FIXED_UNIT), ModelParams(u_a=0.2, u_b=0.8), 0.5, 64)
        assert np.all(st_.u == 0.5)

    def test_table_profile(self):
        st_ = esfem.initialize(STRETCH, PM1.with_(epsilon=0.4), initial_profile("stretch"), 64)
        assert esfem.sample(st_, 0.5) == pytest.approx(0.0, abs=1e-15)
        mid = np.argmin(np.abs(st_.mesh.coords - 0.45))
        assert st_.u[mid] == pytest.approx(0.9 * math.tanh(10 * st_.mesh.coords[mid] - 5))

    def test_sphere_caps_near_pole(self):
        p = PM1.with_(epsilon=0.1)
        st_ = esfem.initialize(UnitSphereTangential(10.0), p, initial_profile("caps"), 200)
        assert st_.u[0] == pytest.approx(math.tanh((0.8 - st_.mesh.coords[0]) / (0.1 * math.sqrt(2))))
        assert st_.u[0] > 0.99

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            esfem.initialize(STATIC, PM1, "tanh", 64)

    def test_log_profile_outside_domain(self):
        with pytest.raises(ValueError):
            esfem.initialize(STATIC, ModelParams.logarithmic(), 1.0, 64)

    def test_initial_w_is_chemical_potential(self):
        st_ = esfem.initialize(STATIC, PM1, -1.0, 64)
        assert np.allclose(st_.w, 0.0)

    def test_mesh_weights_on_sphere(self):
        st_ = esfem.initialize(UnitSphereTangential(), PM1, 0.0, 64)
        assert np.all(st_.mesh.weights > 0)
        assert st_.mesh.coords[0] > 0 and st_.mesh.coords[-1] < math.pi


class TestStep:
    def test_stationary_well(self):
        st0 = esfem.initialize(STATIC, PM1, -1.0, 64)
        st1 = esfem.step(st0, STATIC, PM1, esfem.SolverConfig(dt=1e-2))
        assert np.array_equal(st1.u, st0.u)
        assert st1.t == pytest.approx(1e-2)

    def test_consistency_in_dt(self):
        # dt far below the stiffest relaxation time eps (2/h)^4 ~ 4e5
        p = PM1.with_(epsilon=0.4)
        st0 = esfem.initialize(STATIC, p, initial_profile("stretch"), 16)
        diffs = []
        for dt in (1e-8, 1e-9):
            st1 = esfem.step(st0, STATIC, p, esfem.SolverConfig(dt=dt, newton_tol=1e-15))
            diffs.append(np.max(np.abs(st1.u - st0.u)))
        assert diffs[0] / diffs[1] == pytest.approx(10.0, rel=0.05)

    def test_mesh_follows_flow(self):
        st0 = esfem.initialize(STRETCH, PM1, 0.5, 32)
        st1 = esfem.step(st0, STRETCH, PM1, esfem.SolverConfig(dt=0.1))
        assert st1.mesh.coords[-1] == pytest.approx(1.1)

    def test_newton_failure_reported(self):
        p = PM1.with_(epsilon=0.01)
        st0 = esfem.initialize(STATIC, p, initial_profile("stretch"), 64)
        with pytest.raises(ConvergenceError) as info:
            esfem.step(st0, STATIC, p, esfem.SolverConfig(dt=10.0, newton_max_iters=1, newton_tol=1e-14))
        assert info.value.iterations >= 1

    def test_tangling_detected(self):
        mesh = esfem.Mesh1D(labels=np.arange(3.0), coords=np.array([0.0, 2.0, 1.0]), axial=np.array([0.0, 2.0, 1.0]))
        with pytest.raises(MeshTanglingError):
            mesh.check()


def _run(domain, p, profile, n, t_end, dt=1e-3, **kw):
    st0 = esfem.initialize(domain, p, profile, n, mass_lumping=kw.get("mass_lumping", True))
    return esfem.run(domain, p, esfem.SolverConfig(dt=dt, t_end=t_end, **kw), st0)


class TestInvariants:
    @pytest.mark.parametrize("lumped", [True, False])
    def test_mass_conserved_on_moving_domain(self, lumped):
        res = _run(STRETCH, PM1.with_(epsilon=0.1), initial_profile("stretch"), 80, 2.5, mass_lumping=lumped)
        assert res.trace.mass_drift() < 1e-10

    def test_mass_conserved_log_degenerate(self):
        p = ModelParams.logarithmic(epsilon=0.1)
        res = _run(MovingInterval(IntervalKind.FIXED_UNIT), p, 0.1, 64, 0.3)
        assert res.trace.mass_drift() < 1e-10
        assert np.all(res.final.u > p.alpha) and np.all(res.final.u < p.beta)

    def test_mass_conserved_on_sphere(self):
        res = _run(UnitSphereTangential(10.0), PM1.with_(epsilon=0.1, mbar=5.0), initial_profile("caps"), 128,
                   0.05, dt=5e-4)
        assert res.trace.mass_drift() < 1e-10

    def test_mass_conserved_on_deforming_sphere(self):
        p = PM1.with_(epsilon=0.1, mbar=5.0)
        res = _run(DeformingSphere(full_amplitude=1.0), p, initial_profile("pinched-caps"), 128, 0.08, dt=5e-4)
        assert res.trace.mass_drift() < 1e-10

    @pytest.mark.parametrize("params", [
        PM1.with_(epsilon=0.05),
        PM1.with_(epsilon=0.05, mobility_kind=MobilityKind.DEGENERATE),
        ModelParams.logarithmic(epsilon=0.05),
    ], ids=["quartic", "quartic-degenerate", "log"])
    def test_energy_non_increasing_static(self, params):
        rng = np.random.default_rng(3)
        noise = 0.05 * rng.standard_normal(129)
        c1 = 0.5 * (params.u_a + params.u_b)
        res = _run(STATIC, params, lambda x, p: c1 + noise, 128, 0.2)
        assert np.max(np.diff(res.trace.energy)) <= 1e-10

    def test_energy_non_increasing_consistent_mass(self):
        rng = np.random.default_rng(4)
        noise = 0.05 * rng.standard_normal(129)
        res = _run(STATIC, PM1.with_(epsilon=0.05), lambda x, p: noise, 128, 0.2, mass_lumping=False)
        assert np.max(np.diff(res.trace.energy)) <= 1e-10

    def test_uniform_state_tracks_dilution(self):
        res = _run(STRETCH, PM1.with_(epsilon=0.1), 0.9, 64, 1.0)
        assert np.max(np.abs(res.final.u / 0.45 - 1)) < 1e-4

    def test_sphere_symmetry_preserved(self):
        dom = UnitSphereTangential(0.0)
        p = PM1.with_(epsilon=0.1)

        def sym(x, pp):
            return np.where(x < math.pi / 2, np.tanh((0.9 - x) / 0.14), np.tanh((x - (math.pi - 0.9)) / 0.14))

        res = _run(dom, p, sym, 128, 0.1)
        assert np.max(np.abs(res.final.u - res.final.u[::-1])) < 1e-8

    def test_spatial_convergence(self):
        eps = 0.025
        p = PM1.with_(epsilon=eps)
        exact = tanh_profile(0.5, eps)
        errs = []
        for n in (80, 160, 320):
            res = _run(STATIC, p, exact, n, 0.5)
            x = np.linspace(0.0, 1.0, 20001)
            e = np.interp(x, res.final.mesh.coords, res.final.u) - exact(x, p)
            errs.append(math.sqrt(np.trapezoid(e**2, x)))
        assert errs[0] / errs[1] >= 3.5
        assert errs[1] / errs[2] >= 3.5


class TestDiagnostics:
    def test_energy_of_well(self):
        st_ = esfem.initialize(STATIC, PM1, -1.0, 64)
        assert esfem.energy(st_, PM1) == 0.0

    def test_energy_of_planar_interface(self):
        eps = 0.025
        p = PM1.with_(epsilon=eps)
        st_ = esfem.initialize(STATIC, p, tanh_profile(0.5, eps), 640)
        assert esfem.energy(st_, p) == pytest.approx(2 * math.sqrt(2) / 3, rel=0.02)

    def test_energy_quadratures_agree(self):
        eps = 0.025
        p = PM1.with_(epsilon=eps)
        st_ = esfem.initialize(STATIC, p, tanh_profile(0.5, eps), 640)
        assert esfem.energy(st_, p, lumped=False) == pytest.approx(esfem.energy(st_, p), rel=0.01)

    def test_sphere_energy_approaches_sharp(self):
        eps = 0.02
        p = PM1.with_(epsilon=eps)
        st_ = esfem.initialize(UnitSphereTangential(), p, initial_profile("caps"), 2000)
        assert esfem.energy(st_, p) == pytest.approx(sharp_energy((0.8, 2.1)), rel=0.03)

    def test_mass_of_constant(self):
        st_ = esfem.initialize(STRETCH, PM1, 0.3, 64)
        assert esfem.total_mass(st_) == pytest.approx(0.3, rel=1e-14)

    def test_mass_on_sphere(self):
        st_ = esfem.initialize(UnitSphereTangential(), PM1, 0.3, 2000)
        assert esfem.total_mass(st_) == pytest.approx(4 * math.pi * 0.3, rel=1e-6)

    def test_stretch_positive_initial_mass(self):
        p = ModelParams(u_a=0.2, u_b=0.8, epsilon=0.025)
        st_ = esfem.initialize(STRETCH, p, initial_profile("stretch-positive"), 640)
        assert esfem.total_mass(st_) == pytest.approx(0.5, abs=1e-3)

    def test_interface_of_tanh(self):
        st_ = esfem.initialize(STATIC, PM1, tanh_profile(0.5, 0.05), 101)
        assert esfem.locate_interfaces(st_, PM1) == pytest.approx([0.5], abs=1e-12)

    def test_no_interface_for_uniform(self):
        st_ = esfem.initialize(STATIC, PM1, 0.4, 64)
        assert esfem.locate_interfaces(st_, PM1) == []

    def test_sphere_initial_interfaces(self):
        p = PM1.with_(epsilon=0.1)
        st_ = esfem.initialize(UnitSphereTangential(), p, initial_profile("caps"), 400)
        assert esfem.locate_interfaces(st_, p) == pytest.approx([0.8, 2.1], abs=1e-4)

    @settings(max_examples=25, deadline=None)
    @given(center=st.floats(0.1, 0.9), n=st.integers(16, 300))
    def test_interface_of_linear_profile_is_exact(self, center, n):
        st_ = esfem.initialize(STATIC, PM1, lambda x, p: x - center, n)
        assert esfem.locate_interfaces(st_, PM1) == pytest.approx([center], abs=1e-12)


class TestRun:
    def test_snapshots_at_output_times(self):
        st0 = esfem.initialize(STATIC, PM1.with_(epsilon=0.1), initial_profile("stretch"), 32)
        cfg = esfem.SolverConfig(dt=3e-3, output_times=(0.0, 0.01, 0.025))
        res = esfem.run(STATIC, PM1.with_(epsilon=0.1), cfg, st0)
        assert sorted(res.snapshots) == [0.0, 0.01, 0.025]
        assert res.snapshots[0.025].t == 0.025
        assert res.final.t == 0.025

    def test_deterministic(self):
        a = _run(STRETCH, PM1.with_(epsilon=0.1), initial_profile("stretch"), 64, 0.3)
        b = _run(STRETCH, PM1.with_(epsilon=0.1), initial_profile("stretch"), 64, 0.3)
        assert np.array_equal(a.final.u, b.final.u)
        assert a.trace.energy == b.trace.energy

    def test_progress_callback(self):
        seen = []
        st0 = esfem.initialize(STATIC, PM1, 0.0, 16)
        esfem.run(STATIC, PM1, esfem.SolverConfig(dt=0.01, t_end=0.05), st0, progress=lambda s: seen.append(s.t))
        assert len(seen) == 5
