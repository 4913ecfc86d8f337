import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apvar.specfun import EULER_GAMMA, SmoothWeight, smooth_weight_eval
from apvar.voronoi import (VoronoiReport, default_n_cut, log_weight_integral,
                           mod_inverse, twisted_sum, voronoi_check_cusp,
                           voronoi_check_divisor)

W = SmoothWeight(H=500.0, X=2000.0)


class TestModInverse:
    @given(q=st.integers(1, 500), h=st.integers(-500, 500))
    @settings(max_examples=200, deadline=None)
    def test_inverse_property(self, q, h):
        if math.gcd(h, q) != 1:
            with pytest.raises(ValueError):
                mod_inverse(h, q)
        else:
            hbar = mod_inverse(h, q)
            assert 0 <= hbar < max(q, 1)
            assert (h * hbar) % q == 1 % q

    def test_rejects_bad_modulus(self):
        with pytest.raises(ValueError):
            mod_inverse(1, 0)


class TestTwistedSum:
    def test_naive_oracle(self, tables_small):
        q, h = 7, 3
        naive = sum(
            int(tables_small.tau[n])
            * cmath.exp(2j * math.pi * h * n / q)
            * smooth_weight_eval(float(n), W)
            for n in range(1, 2000))
        got = twisted_sum(tables_small.tau, h, q, W)
        assert abs(got - naive) <= 1e-9 * abs(naive)

    def test_orthogonality_over_h(self, tables_small):
        # sum_{h mod q} e(hn/q) = q [n = 0 (q)]: summing the twisted sums
        # over all residues h recovers q times the 0-class weighted sum.
        q = 5
        total = sum(twisted_sum(tables_small.tau, h, q, W)
                    for h in range(q))
        direct = q * sum(
            int(tables_small.tau[n]) * smooth_weight_eval(float(n), W)
            for n in range(q, 2000, q))
        assert abs(total - direct) <= 1e-9 * abs(direct)


class TestLogWeightIntegral:
    def test_against_quadrature(self):
        import mpmath
        const = 0.7
        ref = mpmath.quad(
            lambda x: smooth_weight_eval(float(x), W)
            * (mpmath.log(x) + const),
            [W.H, 2 * W.H, W.X - W.H, W.X])
        assert log_weight_integral(W, const) == pytest.approx(
            float(ref), rel=1e-10)


class TestVoronoiCusp:
    def test_identity_q5(self, hecke_small):
        rep = voronoi_check_cusp(5, 2, hecke_small, W)
        assert isinstance(rep, VoronoiReport)
        assert rep.rel_diff <= 1e-5

    def test_identity_q1(self, hecke_small):
        rep = voronoi_check_cusp(1, 1, hecke_small, W)
        assert rep.rel_diff <= 1e-5

    def test_rejects_short_table(self, hecke_small):
        with pytest.raises(ValueError):
            voronoi_check_cusp(5, 2, hecke_small,
                               SmoothWeight(H=2000.0, X=7000.0))

    def test_rejects_noncoprime_h(self, hecke_small):
        with pytest.raises(ValueError):
            voronoi_check_cusp(6, 3, hecke_small, W)


class TestVoronoiDivisor:
    def test_identity_q4(self, tables_small):
        rep = voronoi_check_divisor(4, 1, tables_small, W)
        assert rep.rel_diff <= 1e-5

    def test_identity_q1(self, tables_small):
        rep = voronoi_check_divisor(1, 1, tables_small, W)
        assert rep.rel_diff <= 1e-5

    def test_conjugate_character(self, tables_small):
        # Replacing h by -h conjugates the left side; the reports must agree
        # in modulus.
        a = voronoi_check_divisor(5, 2, tables_small, W)
        b = voronoi_check_divisor(5, -2, tables_small, W)
        assert abs(a.lhs - b.lhs.conjugate()) <= 1e-9 * abs(a.lhs)
        assert a.rel_diff <= 1e-5 and b.rel_diff <= 1e-5


class TestDefaultNCut:
    def test_covers_ramp_decay(self):
        # The cutoff must not fall below the ramp-decay scale (q alpha)^2.
        n = default_n_cut(5, W)
        alpha_cut = math.log(1e9) ** 2 / (4.0 * math.sqrt(W.H))
        assert n >= (5 * alpha_cut) ** 2 - 1

    def test_monotone_in_q(self):
        assert default_n_cut(10, W) > default_n_cut(2, W)
