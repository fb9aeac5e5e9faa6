import json
import math

import numpy as np
import pytest

from conftest import smooth_field
from kdvlab.errors import ConfigError, PreconditionError
from kdvlab.normal_form import KDV_COUPLING
from kdvlab.solver import (SolverConfig, Trajectory, _Stepper, airy_propagate,
                           conserved_quantities, convergence_study, evolve, evolve_backward,
                           evolve_final)
from kdvlab.spectral import FourierField, random_rough_field, sobolev_norm


def unit_pair(n=4):
    return FourierField.from_modes(n, {1: 1.0, -1: 1.0})


class TestAiry:
    def test_full_turn(self):
        f = FourierField.from_modes(2, {1: 1.0})
        assert airy_propagate(f, 2 * math.pi)[1] == pytest.approx(1, abs=1e-14)

    def test_half_turn(self):
        f = FourierField.from_modes(3, {2: 1.0})
        assert airy_propagate(f, math.pi / 8)[2] == pytest.approx(-1, abs=1e-14)

    @pytest.mark.parametrize("sigma", [-0.5, 0, 1.3])
    def test_norm_preserved(self, params, sigma):
        f = random_rough_field(32, params, 1)
        g = airy_propagate(f, 0.37)
        assert sobolev_norm(g, sigma) == pytest.approx(sobolev_norm(f, sigma), rel=1e-14)


class TestConfig:
    def test_non_integer_steps(self):
        with pytest.raises(ConfigError):
            SolverConfig(8, 0.3, 1.0)

    def test_stride_must_divide(self):
        with pytest.raises(ConfigError):
            SolverConfig(8, 0.1, 1.0, sample_stride=3)

    def test_unknown_integrator(self):
        with pytest.raises(ConfigError):
            SolverConfig(8, 0.1, 1.0, integrator="euler")

    def test_cfl_violation_reported(self):
        with pytest.raises(ConfigError, match="c_cfl"):
            evolve(unit_pair(), SolverConfig(4, 0.5, 1.0))

    def test_requires_real_mean_zero(self):
        f = FourierField.from_modes(4, {0: 1.0, 1: 1.0, -1: 1.0})
        with pytest.raises(PreconditionError):
            evolve(f, SolverConfig(4, 0.01, 0.1))


class TestEvolve:
    def test_zero(self):
        tr = evolve(FourierField.zeros(8), SolverConfig(8, 0.01, 0.1))
        assert all(np.all(f.coeffs == 0) for f in tr.fields)

    def test_sampling(self):
        tr = evolve(smooth_field(8), SolverConfig(8, 0.01, 0.2, sample_stride=5))
        assert np.allclose(tr.times, 0.05 * np.arange(5))
        assert all(f.is_real and f.is_mean_zero for f in tr.fields)

    def test_quadratic_linearization(self):
        base = smooth_field(16, amp=1.0)
        cfg = SolverConfig(16, 1e-3, 1.0, sample_stride=1000)
        gaps = []
        for lam in (1e-3, 2e-3):
            u0 = base * lam
            gaps.append(sobolev_norm(evolve_final(u0, cfg) - airy_propagate(u0, 1.0), 0))
        assert gaps[1] / gaps[0] == pytest.approx(4.0, rel=0.01)

    def test_one_step_taylor(self):
        # u(dt) = u0 + dt * F(u0) + O(dt^2): the defect shrinks 4x when dt halves
        u0 = smooth_field(8, amp=0.5)
        st = _Stepper(8, 1.0)
        a0 = np.array(u0.half)
        xi = np.arange(9)
        f0 = 1j * xi ** 3 * a0 + st.rhs(a0)
        errs = []
        for dt in (1e-3, 5e-4):
            a1 = _Stepper(8, dt).step(a0)
            errs.append(np.max(np.abs(a1 - a0 - dt * f0)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_mean_drift_zero_and_l2(self):
        u0 = smooth_field(16, amp=0.5)
        tr = evolve(u0, SolverConfig(16, 1e-3, 1.0, sample_stride=100))
        q = [conserved_quantities(f) for f in tr.fields]
        assert all(c["mean"] == 0.0 for c in q)
        l2 = np.array([c["l2"] for c in q])
        h = np.array([c["hamiltonian"] for c in q])
        assert np.max(np.abs(l2 - l2[0])) / l2[0] <= 1e-8
        assert np.max(np.abs(h - h[0])) / (1 + abs(h[0])) <= 1e-6

    @pytest.mark.parametrize("integrator", ["if_rk4", "strang_rk4"])
    def test_time_reversal(self, integrator):
        u0 = smooth_field(16, amp=0.5)
        cfg = SolverConfig(16, 1e-3, 1.0, integrator=integrator)
        back = evolve_backward(evolve_final(u0, cfg), cfg)
        assert sobolev_norm(back - u0, 0) * math.sqrt(2 * math.pi) <= 1e-7

    def test_resonant_phase_coupling(self):
        eps, t = 0.02, 20.0
        u0 = FourierField.from_modes(16, {1: eps, -1: eps})
        f = evolve_final(u0, SolverConfig(16, 0.01, t))
        phase = np.angle(f[1] * np.exp(-1j * t) / eps)
        assert phase / (eps ** 2 * t) == pytest.approx(KDV_COUPLING, rel=0.01)


class TestConserved:
    def test_cosine(self):
        q = conserved_quantities(unit_pair())
        assert q["mean"] == 0
        assert q["l2"] == pytest.approx(4 * math.pi)
        assert q["hamiltonian"] == pytest.approx(2 * math.pi)

    def test_zero(self):
        q = conserved_quantities(FourierField.zeros(4))
        assert q == {"mean": 0.0, "l2": 0.0, "hamiltonian": 0.0}

    def test_cubic_term_quadrature(self):
        # compare int u^3 against a fine physical-grid quadrature
        u = smooth_field(6, amp=2.0)
        m = 64
        vals = u.to_physical(m)
        ux = FourierField(6, 1j * u.freqs * u.coeffs, True, True).to_physical(m)
        ref = 2 * math.pi / m * np.sum(0.5 * ux ** 2 + vals ** 3 / 3)
        assert conserved_quantities(u)["hamiltonian"] == pytest.approx(ref, rel=1e-12)


class TestConvergence:
    def test_fourth_order(self):
        u0 = smooth_field(16, amp=0.5)
        # the asymptotic regime starts once the interaction phases are resolved
        cfgs = [SolverConfig(16, 0.0025 / 2 ** k, 0.4) for k in range(4)]
        rep = convergence_study(u0, cfgs)
        assert rep["kind"] == "temporal"
        for r in rep["ratios"]:
            assert r == pytest.approx(16, rel=0.15)

    def test_second_order_split(self):
        u0 = smooth_field(16, amp=0.5)
        cfgs = [SolverConfig(16, 0.02 / 2 ** k, 0.4, integrator="strang_rk4") for k in range(4)]
        assert convergence_study(u0, cfgs)["order"] == pytest.approx(2, abs=0.2)

    def test_identical(self):
        u0 = smooth_field(8)
        rep = convergence_study(u0, [SolverConfig(8, 0.01, 0.1)] * 3)
        assert rep["errors"] == [0.0, 0.0]

    def test_spectral_in_space(self):
        half = np.zeros(9, dtype=complex)
        half[1:] = 0.3 * np.exp(-1.5 * np.arange(1, 9))
        u0 = FourierField.from_half(half, is_mean_zero=True)
        cfgs = [SolverConfig(n, 5e-4, 0.1) for n in (8, 16, 32)]
        rep = convergence_study(u0, cfgs)
        assert rep["kind"] == "spatial"
        # algebraic decay would give bounded ratios; analytic data give huge ones
        assert rep["ratios"][0] > 1e3

    def test_mixed_rejected(self):
        u0 = smooth_field(8)
        with pytest.raises(ConfigError):
            convergence_study(u0, [SolverConfig(8, 0.01, 0.1), SolverConfig(16, 0.005, 0.1)])


class TestTrajectoryIO:
    def test_roundtrip(self):
        tr = evolve(smooth_field(8), SolverConfig(8, 0.01, 0.05))
        back = Trajectory.from_dict(json.loads(tr.to_json()))
        assert np.array_equal(back.times, tr.times)
        assert np.array_equal(back.coeff_matrix(), tr.coeff_matrix())
        assert back.config == tr.config

    def test_csv(self):
        tr = evolve(FourierField.zeros(4), SolverConfig(4, 0.1, 0.2))
        lines = tr.conserved_csv().splitlines()
        assert lines[0] == "t,mean,l2,hamiltonian"
        assert lines[1:] == ["0.0,0.0,0.0,0.0", "0.1,0.0,0.0,0.0", "0.2,0.0,0.0,0.0"]


class TestLowReg:
    def test_first_order(self):
        u0 = smooth_field(16, amp=0.5)
        cfgs = [SolverConfig(16, 0.01 / 2 ** k, 0.4, integrator="lowreg") for k in range(4)]
        assert convergence_study(u0, cfgs)["order"] == pytest.approx(1, abs=0.1)

    def test_matches_resolved_reference_on_rough_data(self, params):
        u0 = random_rough_field(32, params, 0, amplitude=0.3)
        ref = evolve_final(u0, SolverConfig(32, 2e-5, 0.1))
        errs = [sobolev_norm(evolve_final(u0, SolverConfig(32, h, 0.1, integrator="lowreg")) - ref, 0)
                for h in (1e-4, 1e-5)]
        assert errs[1] < errs[0] / 5
        assert errs[1] <= 1e-3 * sobolev_norm(u0, 0)

    def test_mean_stays_zero(self, params):
        u0 = random_rough_field(32, params, 1, amplitude=0.3)
        tr = evolve(u0, SolverConfig(32, 1e-3, 0.1, sample_stride=10, integrator="lowreg"))
        assert all(conserved_quantities(f)["mean"] == 0.0 for f in tr.fields)

    def test_linear_mode_exact(self, params):
        u0 = random_rough_field(32, params, 1)
        tr = evolve(u0, SolverConfig(32, 0.01, 0.3, sample_stride=10, nonlinear=False))
        for t, f in zip(tr.times, tr.fields):
            assert np.array_equal(f.coeffs, airy_propagate(u0, float(t)).coeffs)
