import math

import numpy as np
import pytest

from kdvlab.errors import ConfigError, NumericFailure, PreconditionError
from kdvlab.normal_form import KDV_COUPLING, Scale, phase_shift, r_evolve, r_star
from kdvlab.smoothing import (XsbConfig, flow_trajectory, lipschitz_probe, nonuniform_closed_form,
                              nonuniform_demo, operator_regularity, phase_gain_probe,
                              phase_gap_norm, refinement_study, residual_report, tail_slope,
                              unit_rough_f, windowed_l2, xsb_norm)
from kdvlab.solver import SolverConfig, Trajectory, airy_propagate
from kdvlab.spectral import (FourierField, RegularityParams, bracket, normalized,
                             random_rough_field, sobolev_norm)


def power_field(n, p, phases=None):
    xi = np.arange(1, n + 1)
    half = np.concatenate([[0], bracket(xi) ** p * (1 if phases is None else phases)])
    return FourierField.from_half(half, is_mean_zero=True)


def lowreg_cfg(u0, n, t_end, fraction=1.0):
    lim = SolverConfig(n, t_end, t_end).cfl_limit(u0)
    dt = t_end / math.ceil(t_end / (fraction * lim))
    return SolverConfig(n, dt, t_end, integrator="lowreg")


class TestTailSlope:
    def test_power_law(self):
        assert tail_slope(power_field(512, -2.0)) == pytest.approx(-2.0, abs=0.01)

    def test_random_phases(self):
        ph = np.exp(1j * np.random.default_rng(0).uniform(0, 2 * np.pi, 512))
        assert tail_slope(power_field(512, -2.0, ph)) == pytest.approx(-2.0, abs=0.05)

    def test_white(self):
        assert tail_slope(power_field(256, 0.0)) == pytest.approx(0.0, abs=0.05)

    def test_rough_data(self, params):
        f = random_rough_field(1024, params, 0)
        assert tail_slope(f) == pytest.approx(params.s - 0.5 - params.eps_tail, abs=0.01)

    @pytest.mark.parametrize("band", [(10, 15), (0, 20), (20, 200), (40, 90)])
    def test_bad_band(self, band):
        with pytest.raises(ConfigError):
            tail_slope(power_field(128, -1.0), band)

    def test_zero_band(self):
        with pytest.raises(NumericFailure):
            tail_slope(FourierField.zeros(64))


class TestResidualReport:
    def test_initial_row_zero(self, params):
        u0 = random_rough_field(32, params, 1, amplitude=0.3)
        rep = residual_report(u0, params, lowreg_cfg(u0, 32, 0.05), [-0.25, 0.0, 0.5])
        assert np.all(rep.unshifted[0] == 0) and np.all(rep.shifted[0] == 0)
        assert rep.times[0] == 0

    def test_linear_mode_closed_form(self, params):
        u0 = random_rough_field(32, params, 2)
        cfg = SolverConfig(32, 0.01, 0.5, sample_stride=10, nonlinear=False)
        sig = [-0.25, 0.3]
        rep = residual_report(u0, params, cfg, sig)
        assert np.max(np.abs(rep.unshifted)) <= 1e-14
        for i, t in enumerate(rep.times):
            for j, sg in enumerate(sig):
                assert rep.shifted[i, j] == pytest.approx(phase_gap_norm(u0, t, sg), rel=1e-12,
                                                          abs=1e-15)
        assert rep.linear

    def test_rows_long_format(self, params):
        u0 = random_rough_field(16, params, 2, amplitude=0.2)
        rep = residual_report(u0, params, lowreg_cfg(u0, 16, 0.02), [0.0])
        rows = rep.rows()
        assert len(rows) == 2 * len(rep.times)
        assert {r[0] for r in rows} == {"residual:unshifted", "residual:shifted"}
        assert all(r[3] == 16 for r in rows)

    def test_per_mode_identities(self, params):
        u0 = random_rough_field(32, params, 3, amplitude=0.3)
        rep = residual_report(u0, params, lowreg_cfg(u0, 32, 0.05), [0.0])
        u, t = None, 0.05
        from kdvlab.solver import evolve_final
        u = evolve_final(u0, lowreg_cfg(u0, 32, 0.05))
        su = phase_shift(u, u0, t, KDV_COUPLING)
        assert np.allclose(np.abs(su.coeffs), np.abs(u.coeffs), rtol=1e-14, atol=0)
        a = np.abs((u - r_star(u0, params.s, t, KDV_COUPLING)).coeffs)
        b = np.abs((su - airy_propagate(u0, t)).coeffs)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
        assert rep.shifted[-1, 0] == pytest.approx(sobolev_norm(su - airy_propagate(u0, t), 0),
                                                   rel=1e-12)


class TestRefinement:
    def cfg(self, params, amp, nmax, t_end=0.1):
        big = random_rough_field(nmax, params, 0, amp)
        return lowreg_cfg(big, nmax, t_end)

    def test_below_thresholds_both_stable(self, params):
        ns = [32, 64, 128]
        rep = refinement_study(params, 0, ns, self.cfg(params, 0.3, 128), sigma=0.05,
                               amplitude=0.3)
        assert rep["shifted_variation"] <= 0.1
        un = np.array(rep["unshifted"])
        assert (un.max() - un.min()) / un.min() <= 0.1

    def test_s_zero_alike(self):
        p0 = RegularityParams(0.0, 0.02)
        rep = refinement_study(p0, 0, [32, 64, 128], self.cfg(p0, 0.3, 128), sigma=0.5,
                               amplitude=0.3)
        sh, un = np.array(rep["shifted"]), np.array(rep["unshifted"])
        assert np.allclose(sh / un, 1.0, rtol=0.02)

    def test_needs_dyadic(self, params):
        with pytest.raises(ConfigError):
            refinement_study(params, 0, [32, 48], self.cfg(params, 0.3, 48), 0.0)

    def test_needs_nested(self, params):
        data = lambda n: random_rough_field(n, params, n)
        with pytest.raises(PreconditionError):
            refinement_study(params, 0, [16, 32], self.cfg(params, 0.3, 32), 0.0, data=data)


class TestNonuniform:
    def test_initial(self):
        res = nonuniform_demo(1, 0.1, 0.25, [0.0])
        assert res["rows"][0][1] == pytest.approx(0.1, rel=1e-14)
        assert res["rows"][0][2] == pytest.approx(0.1, rel=1e-15)

    def test_quarter_phase(self):
        # phase argument (c/2) <1>^2 delta (2 - delta) t = pi/2 with c = 2, s = 1
        t = (math.pi / 2) / (4 * 0.1 * 1.9)
        res = nonuniform_demo(1, 0.1, 1.0, [t])
        assert res["rows"][0][1] == pytest.approx(1.9, abs=1e-12)

    def test_grid(self):
        res = nonuniform_demo(3, 0.2, 0.25, np.linspace(0, 5, 100))
        assert res["max_discrepancy"] <= 1e-10

    def test_negative_frequency(self):
        res = nonuniform_demo(-2, 0.3, 0.1, np.linspace(0, 3, 20))
        assert res["max_discrepancy"] <= 1e-10

    def test_invalid(self):
        with pytest.raises(ConfigError):
            nonuniform_demo(0, 0.1, 0.0, [1.0])
        with pytest.raises(ConfigError):
            nonuniform_demo(1, 1.5, 0.0, [1.0])


class TestLipschitz:
    def test_equal_inputs(self, params):
        f = random_rough_field(8, params, 0)
        res = lipschitz_probe(f, f, 0.5, [0.0, 1.0, 2.0])
        assert res["identical"] and res["max_numerator"] == 0

    def test_single_mode_pair(self):
        f = FourierField.from_modes(4, {1: 1.0}, is_real=False, is_mean_zero=True)
        g = f * 0.9
        grid = np.linspace(0, 3, 31)
        res = lipschitz_probe(f, g, 0.7, grid)
        expect = max(nonuniform_closed_form(1, 0.1, 0.0, t) for t in grid) / 0.1
        assert res["max_ratio"] == pytest.approx(expect, rel=1e-12)

    def test_random_pairs_finite(self, params):
        rng = np.random.default_rng(0)
        worst = 0.0
        for k in range(100):
            f = normalized(random_rough_field(16, params, 2 * k), 0.0, rng.uniform(0.1, 1.0))
            g = normalized(random_rough_field(16, params, 2 * k + 1), 0.0, rng.uniform(0.1, 1.0))
            worst = max(worst, lipschitz_probe(f, g, params.gamma, np.linspace(0, 1, 11),
                                               params.s)["max_ratio"])
        assert math.isfinite(worst)


class TestPhaseGain:
    def test_t_zero(self, params):
        u0 = random_rough_field(16, params, 0)
        assert phase_gain_probe(u0, u0, params, 0.0, 0.1)["lhs"] == 0

    def test_single_mode(self, params):
        u0 = random_rough_field(16, params, 0)
        k, t, alpha = 5, 0.7, 0.2
        v = FourierField.from_modes(16, {k: 0.3 - 0.1j, -k: 0.3 + 0.1j})
        lhs = phase_gain_probe(u0, v, params, t, alpha)["lhs"]
        rate = 2 * abs(u0[k]) ** 2 / k
        ref = math.sqrt(2) * (1 + k) ** (alpha + 1 - 2 * params.s) \
            * abs(np.exp(-1j * rate * t) - 1) * abs(v[k])
        assert lhs == pytest.approx(ref, rel=1e-13)

    def test_random_instances(self, params):
        rng = np.random.default_rng(1)
        for k in range(50):
            u0 = random_rough_field(32, params, k, amplitude=rng.uniform(0.1, 3))
            v = random_rough_field(32, params, 1000 + k)
            res = phase_gain_probe(u0, v, params, rng.uniform(-1, 1), rng.uniform(-0.5, 0.5))
            assert res["holds"]


class TestOperatorRegularity:
    def test_unit_normalisation(self, params):
        norms = [sobolev_norm(unit_rough_f(n, params, 0), 0) for n in (64, 512, 4096)]
        assert norms == sorted(norms) and norms[-1] < 1.0

    def test_rows(self, params):
        rep = operator_regularity(params, 0, [16, 32])
        assert [r["n"] for r in rep["rows"]] == [16, 32]
        assert rep["T_spread"] >= 0 and rep["J_spread"] >= 0


class TestXsb:
    times = np.linspace(0, 1, 256)
    cfg = XsbConfig()

    def test_b_zero_is_quadrature(self, params):
        f = unit_rough_f(32, params, 0)
        tr = flow_trajectory(f, self.times, "resonant", params.s)
        c0 = XsbConfig(b=0.0)
        for sg in (0.0, -0.25):
            assert xsb_norm(tr, c0, sg) == pytest.approx(windowed_l2(tr, c0, sg), rel=1e-12)

    def test_airy_constant_n_independent(self, params):
        vals = []
        for n in (64, 256):
            f = unit_rough_f(n, params, 0)
            vals.append(xsb_norm(flow_trajectory(f, self.times, "airy"), self.cfg)
                        / sobolev_norm(f, 0))
        assert vals[1] == pytest.approx(vals[0], rel=0.1)

    def test_resonant_within_bound(self, params):
        f = unit_rough_f(64, params, 0)
        airy = xsb_norm(flow_trajectory(f, self.times, "airy"), self.cfg)
        res = xsb_norm(flow_trajectory(f, self.times, "resonant", params.s), self.cfg)
        nf = sobolev_norm(f, 0)
        assert math.isfinite(res)
        assert res <= (1 + nf ** 2) ** self.cfg.b * airy * 1.5

    def test_window_too_wide(self, params):
        f = unit_rough_f(8, params, 0)
        with pytest.raises(ConfigError):
            xsb_norm(flow_trajectory(f, self.times, "airy"), XsbConfig(window_span=2.0))

    def test_too_few_samples(self, params):
        f = unit_rough_f(8, params, 0)
        with pytest.raises(ConfigError):
            xsb_norm(flow_trajectory(f, self.times[:100], "airy"), self.cfg)

    def test_nonuniform_times(self, params):
        f = unit_rough_f(8, params, 0)
        t = np.sort(np.random.default_rng(0).uniform(0, 1, 300))
        with pytest.raises(PreconditionError):
            xsb_norm(flow_trajectory(f, t, "airy"), self.cfg)

    def test_config_validation(self):
        for kw in (dict(b=-1), dict(window="hann"), dict(window_width=2), dict(time_samples=8)):
            with pytest.raises(ConfigError):
                XsbConfig(**kw)
