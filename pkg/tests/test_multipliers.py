import math

import numba
import pytest

from kdvlab.errors import ConfigError
from kdvlab.multipliers import (Kind, MultiplierSpec, Rejection, all_specs, doubling_growth,
                                evaluate, growth_trend, naive_scan, scan)

VALID = dict(s=0.25, delta=0.02)


class TestEvaluate:
    def test_mbound_value(self):
        # s = delta = 0: <1>^0 <1>^0 / (<1>^1 <3>^0 |2*2*2|^(1/2))
        v = evaluate(MultiplierSpec(Kind.M_MBOUND, 0.0, 0.0), (1, 1, 1))
        assert v == pytest.approx(1 / (2 * math.sqrt(8)), rel=1e-15)

    def test_mbound_generic(self):
        s, d = 0.25, 0.02
        x1, x2, x3 = 3, -1, 5
        ref = (4 ** (s + d) * 2 ** (s + d)) / (6 ** (1 - s - d) * 8 ** s * (2 * 4 * 8) ** ((1 - 2 * d) / 2))
        assert evaluate(MultiplierSpec(Kind.M_MBOUND, s, d), (x1, x2, x3)) == pytest.approx(ref, rel=1e-14)

    def test_meps_value(self):
        v = evaluate(MultiplierSpec(Kind.M_EPS, 0.0, eps=0.1), (1, 1))
        assert v == pytest.approx(3.0, rel=1e-15)

    @pytest.mark.parametrize("kind", list(Kind))
    def test_rejects_cancelling_pair(self, kind):
        spec = MultiplierSpec(kind, **VALID)
        tup = (3, -3) if spec.arity == 2 else (3, -3, 1)
        r = evaluate(spec, tup)
        assert isinstance(r, Rejection) and not r

    @pytest.mark.parametrize("kind", [k for k in Kind if k is not Kind.M_EPS])
    def test_rejects_zero_frequency(self, kind):
        assert isinstance(evaluate(MultiplierSpec(kind, **VALID), (0, 2, 1)), Rejection)

    def test_gamma_default(self):
        assert MultiplierSpec(Kind.M1, 0.25, 0.02).gamma == pytest.approx(0.8)


class TestScan:
    def test_meps_example(self):
        r = scan(MultiplierSpec(Kind.M_EPS, 0.0, eps=0.1), 64)
        assert r.sup_value == pytest.approx(3.0, rel=1e-15)
        assert r.argmax == (1, 1)

    @pytest.mark.parametrize("spec", all_specs(**VALID), ids=lambda s: s.name)
    def test_matches_naive(self, spec):
        for n in (5, 8):
            a, b = scan(spec, n), naive_scan(spec, n)
            assert a.sup_value == pytest.approx(b.sup_value, rel=1e-12)
            assert a.argmax == b.argmax

    @pytest.mark.parametrize("kind", [Kind.M1, Kind.M3_STAR, Kind.LB1])
    def test_matches_naive_16(self, kind):
        spec = MultiplierSpec(kind, **VALID)
        a, b = scan(spec, 16), naive_scan(spec, 16)
        assert a.sup_value == pytest.approx(b.sup_value, rel=1e-12)
        assert a.argmax == b.argmax

    @pytest.mark.parametrize("spec", all_specs(**VALID), ids=lambda s: s.name)
    def test_monotone_and_attained(self, spec):
        res = [scan(spec, n) for n in (8, 16, 32)]
        for a, b in zip(res[:-1], res[1:]):
            assert a.sup_value <= b.sup_value + 1e-12
        for r in res:
            assert evaluate(spec, r.argmax) == pytest.approx(r.sup_value, rel=1e-12)
            assert r.argmax[0] > 0

    def test_thread_count_invariance(self):
        spec = MultiplierSpec(Kind.M2, **VALID)
        before = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            a = scan(spec, 48)
            numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
            b = scan(spec, 48)
        finally:
            numba.set_num_threads(before)
        assert (a.sup_value, a.argmax, a.evaluations) == (b.sup_value, b.argmax, b.evaluations)

    def test_small_box_rejected(self):
        with pytest.raises(ConfigError):
            scan(MultiplierSpec(Kind.M1, **VALID), 2)

    def test_csv_row(self):
        r = scan(MultiplierSpec(Kind.M_EPS, 0.0, eps=0.1), 8)
        row = r.csv_row()
        assert row[0] == "M_eps" and row[1] == 8 and row[3:6] == [1, 1, ""]


class TestGrowth:
    def test_plateau_valid_gamma(self):
        spec = MultiplierSpec(Kind.M1, 0.25, 0.02)
        res = [scan(spec, n) for n in (64, 128, 256)]
        vals = [r.sup_value for r in res]
        assert max(vals) <= 1.1 * min(vals)
        assert growth_trend(spec, [64, 128, 256], res) == pytest.approx(0.0, abs=0.1)

    def test_invalid_gamma_exponent(self):
        spec = MultiplierSpec(Kind.M1, 0.2, 0.05, gamma=1.0)
        slope = growth_trend(spec, [64, 128, 256, 512])
        assert slope == pytest.approx(1.0 + 7 * 0.05 - 1.0, abs=0.1)

    def test_constant_gives_zero(self):
        spec = MultiplierSpec(Kind.M_EPS, 0.0, eps=0.1)
        assert growth_trend(spec, [8, 16, 32]) == 0.0

    def test_needs_three_sizes(self):
        with pytest.raises(ConfigError):
            growth_trend(MultiplierSpec(Kind.M1, **VALID), [8, 16])

    def test_doubling(self):
        spec = MultiplierSpec(Kind.M_EPS, 0.0, eps=0.1)
        assert doubling_growth([scan(spec, 8), scan(spec, 16)]) == [0.0]
