import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apvar.specfun import EULER_GAMMA, SmoothWeight, as_kind, omega_direct
from apvar.shifted import (DEFAULT_K, LambdaSeries, _fmt_alpha_cut,
                           dfi_main_term, dual_terms, fake_main_term,
                           lambda_h, lambda_series_check, offdiag_exact,
                           ramanujan_block, shifted_sum_exact,
                           smooth_variance_decomposition, tau_of)
from apvar.variance import default_weight
from oracles import mobius_direct, ramanujan_direct

W = SmoothWeight(H=500.0, X=2000.0)


class TestRamanujanBlock:
    def test_matches_exponential_sums(self):
        for h in (1, 2, 12, 17, 289):
            c = ramanujan_block(h, 60)
            for k in range(1, 61):
                assert c[k] == pytest.approx(
                    ramanujan_direct(k, h).real, abs=1e-9)


class TestLambdaH:
    def test_k1_single_term(self):
        x, y = 7.0, 11.0
        val, _ = lambda_h(x, y, 5, K=1)
        lx = math.log(x) - 2.0 * EULER_GAMMA
        ly = math.log(y) - 2.0 * EULER_GAMMA
        assert val == pytest.approx(lx * ly, rel=1e-14)

    def test_symmetry_and_sign_of_h(self):
        a, _ = lambda_h(3.0, 19.0, 7, K=5000)
        b, _ = lambda_h(19.0, 3.0, 7, K=5000)
        c, _ = lambda_h(3.0, 19.0, -7, K=5000)
        assert a == pytest.approx(b, rel=1e-14)
        assert a == pytest.approx(c, rel=1e-14)

    def test_direct_summation_oracle(self):
        # At x = y = e^{2 gamma} the k=1 term vanishes and the series is
        # sum_{k >= 2} 4 mu(k) log(k)^2 / k^2 for h = 1.
        x = math.exp(2.0 * EULER_GAMMA)
        K = 200_000
        val, _ = lambda_h(x, x, 1, K=K)
        direct = sum(4.0 * mobius_direct(k) * math.log(k) ** 2 / k ** 2
                     for k in range(2, K + 1))
        assert val == pytest.approx(direct, abs=1e-8)

    def test_rejects_h_zero_and_bad_args(self):
        with pytest.raises(ValueError):
            lambda_h(1.0, 1.0, 0)
        with pytest.raises(ValueError):
            lambda_h(-1.0, 1.0, 1)
        with pytest.raises(ValueError):
            lambda_h(1.0, 1.0, 1, K=0)

    def test_tail_bound_monotone_in_k(self):
        bounds = [LambdaSeries(h=6, K=k).tail_bound(50.0, 60.0)
                  for k in (10, 100, 1000, 10000)]
        assert all(a > b for a, b in zip(bounds, bounds[1:]))

    def test_doubling_within_tail(self):
        for h, x, y in ((1, 10.0, 20.0), (12, 300.0, 500.0),
                        (-7, 2.0, 9.0)):
            v1, tail = lambda_h(x, y, h, K=20_000)
            v2, _ = lambda_h(x, y, h, K=40_000)
            assert abs(v2 - v1) < tail

    @given(h=st.integers(-50, 50).filter(bool),
           x=st.floats(1.5, 5000.0), y=st.floats(1.5, 5000.0))
    @settings(max_examples=40, deadline=None)
    def test_explicit_envelope_bound(self, h, x, y):
        # |Lambda_h| <= 2 (log max(x,y,K))^2 sum_k gcd(k,|h|)/k^2, with the
        # k-sum evaluated explicitly (it converges; tail below 1/K).
        K = 2000
        val, _ = lambda_h(x, y, h, K=K)
        env = sum(math.gcd(k, abs(h)) / k ** 2 for k in range(1, K + 1))
        env += tau_of(h) * 2.0 / K
        log_cap = max(abs(math.log(t) - 2.0 * EULER_GAMMA) for t in (x, y))
        log_cap = max(log_cap, math.log(K))
        assert abs(val) <= 2.0 * (log_cap + math.log(K)) ** 2 * env


class TestLambdaSeriesCheck:
    def test_h1(self):
        lhs, rhs, diff = lambda_series_check(1, K=1_000_000)
        assert rhs == pytest.approx(6.0 / math.pi ** 2, rel=1e-12)
        assert diff <= 1e-5

    def test_h2(self):
        lhs, rhs, diff = lambda_series_check(2, K=1_000_000)
        assert rhs == pytest.approx(9.0 / math.pi ** 2, rel=1e-12)
        assert diff <= 1e-5

    def test_sign_invariance(self):
        assert lambda_series_check(5, K=10_000) == \
            lambda_series_check(-5, K=10_000)


class TestShiftedSumExact:
    @staticmethod
    def _g(ms, ns):
        return np.sin(ms / 37.0) * np.cos(ns / 53.0)

    def test_zero_weight(self, tables_small):
        assert shifted_sum_exact("divisor", 1, lambda m, n: np.zeros_like(m),
                                 100, 100, tables_small) == 0.0

    def test_divisor_naive_oracle(self, tables_small):
        h, M, N = 1, 100, 100
        naive = 0.0
        for m in range(M, 2 * M + 1):
            n = m + h
            if N <= n <= 2 * N:
                naive += (int(tables_small.tau[n]) * int(tables_small.tau[m])
                          * float(self._g(np.array([m], float),
                                          np.array([n], float))[0]))
        got = shifted_sum_exact("divisor", h, self._g, M, N, tables_small)
        assert got == pytest.approx(naive, rel=1e-12)

    def test_anti_variant_naive(self, tables_small):
        h, M, N = 700, 200, 150
        naive = 0.0
        for m in range(M, 2 * M + 1):
            n = h - m
            if max(N, 1) <= n <= 2 * N:
                naive += (int(tables_small.tau[n]) * int(tables_small.tau[m])
                          * float(self._g(np.array([m], float),
                                          np.array([n], float))[0]))
        got = shifted_sum_exact("divisor", h, self._g, M, N, tables_small,
                                anti=True)
        assert got == pytest.approx(naive, rel=1e-12)

    def test_cusp_sequence(self, hecke_small):
        got = shifted_sum_exact("cusp", 2, self._g, 50, 50, hecke_small)
        naive = sum(
            float(hecke_small.a_norm[m]) * float(hecke_small.a_norm[m + 2])
            * float(self._g(np.array([m], float), np.array([m + 2], float))[0])
            for m in range(50, 101) if 50 <= m + 2 <= 100)
        assert got == pytest.approx(naive, rel=1e-12)

    def test_range_check(self, tables_small):
        with pytest.raises(ValueError):
            shifted_sum_exact("divisor", 1, self._g, 9000, 9000,
                              tables_small)


class TestDfiMainTerm:
    def test_cusp_vanishes(self):
        assert dfi_main_term("cusp", 5, lambda x, y: x, (1.0, 10.0)) == 0.0

    def test_zero_weight(self):
        assert dfi_main_term("divisor", 5,
                             lambda x, y: np.zeros_like(x),
                             (1.0, 10.0)) == 0.0

    def test_within_half_of_exact_sum(self, tables_mid):
        # Desk-scale main-term dominance: the Lambda integral should land
        # within 50% of the exact shifted sum over a smooth bump on
        # [M, 2M] x [N, 2N] at M = N = 1e4.
        M = N = 10_000
        h = 12

        def g(xs, ys):
            xs, ys = np.asarray(xs, float), np.asarray(ys, float)
            inside = ((xs > M) & (xs < 2 * M) & (ys > N) & (ys < 2 * N))
            out = np.zeros_like(xs)
            out[inside] = (np.sin(math.pi * (xs[inside] - M) / M) ** 2
                           * np.sin(math.pi * (ys[inside] - N) / N) ** 2)
            return out

        exact = shifted_sum_exact("divisor", h, g, M, N, tables_mid)
        main = dfi_main_term("divisor", h, g, (float(M), 2.0 * float(N)))
        assert abs(main - exact) <= 0.5 * abs(exact)


class TestDualTerms:
    def test_truncation_quality(self, tables_small):
        # The adaptive stop triggers at max(tol_rel * peak, quadrature noise
        # ~ 5e-15 * weight mass); the trailing entries must sit at that level.
        t = dual_terms("Y", np.asarray(tables_small.tau, float), 1, W)
        peak = float(np.max(np.abs(t)))
        floor = max(1e-10 * peak, 5e-15 * (W.X - W.H))
        assert float(np.max(np.abs(t[-3:]))) <= 100.0 * floor
        assert float(np.max(np.abs(t[-3:]))) <= 1e-4 * peak

    def test_k_kind_short(self, tables_small):
        t = dual_terms("K", np.asarray(tables_small.tau, float), 1, W)
        # K dies at alpha ~ 60/(4 pi sqrt(H)), i.e. within a handful of n.
        assert len(t) <= 16

    def test_table_exhaustion_raises(self):
        with pytest.raises(ValueError):
            dual_terms("Y", np.ones(6), 1, W)


class TestOffdiagExact:
    def test_q1_naive_oracle(self, tables_small):
        got = offdiag_exact(2000.0, 1, "div-YY", W, tables_small)
        ts = []
        n = 1
        while True:
            om = complex(omega_direct("Y", math.sqrt(n), W)).real
            ts.append(int(tables_small.tau[n]) * om)
            if n > 25 and abs(om) < 1e-13:
                break
            n += 1
        t = np.array(ts)
        naive = float(np.sum(t) ** 2 - np.sum(t ** 2))
        assert got == pytest.approx(naive, rel=1e-6)

    def test_yk_parity_naive_oracle(self, tables_small):
        got = offdiag_exact(2000.0, 2, "div-YK", W, tables_small)

        def naive_terms(tag, dr, count):
            return np.array([
                int(tables_small.tau[n])
                * complex(omega_direct(tag, math.sqrt(n) / dr, W)).real
                for n in range(1, count + 1)])

        total = 0.0
        # (d, r) pairs for q = 2: (1,1), (2,1), (1,2); mu(2) = -1.
        for d, r, mu in ((1, 1, 1), (2, 1, -1), (1, 2, 1)):
            dr = d * r
            ty = naive_terms("Y", dr, 40 * dr * dr)
            tk = naive_terms("K", dr, 40 * dr * dr)
            inner = 0.0
            for i, a in enumerate(ty, start=1):
                for j, b in enumerate(tk, start=1):
                    if (i + j) % r == 0:
                        inner += a * b
            total += 2.0 * mu / (d * d * r) * inner
        naive = total / 2.0
        assert got == pytest.approx(naive, rel=1e-6)

    def test_rejects_unknown_kind(self, tables_small):
        with pytest.raises(ValueError):
            offdiag_exact(2000.0, 1, "div-XX", W, tables_small)


class TestDecomposition:
    def test_cusp_exact_identity(self, hecke_small):
        rep = smooth_variance_decomposition(2000.0, 6, "cusp", W,
                                            hecke_small)
        assert rep.rel_gap <= 1e-6

    def test_rejects_bad_sequence(self, tables_small):
        with pytest.raises(ValueError):
            smooth_variance_decomposition(2000.0, 6, "nope", W,
                                          tables_small)


class TestFakeMainTerm:
    def test_q1_collapse_runs(self, tables_small):
        value, budget, ratio = fake_main_term("KK", 2000.0, 1, W,
                                              tables_small)
        assert math.isfinite(value) and budget > 0
        assert ratio == abs(value) / budget

    def test_kk_decays_fastest(self, tables_small):
        # The exponential kernel truncates the l-sum far earlier than the
        # oscillatory one, and the resulting value is far smaller.
        assert (_fmt_alpha_cut(as_kind("K"), W, 1e-6)
                < _fmt_alpha_cut(as_kind("Y"), W, 1e-6))
        vy = fake_main_term("YY", 2000.0, 1, W, tables_small)[0]
        vk = fake_main_term("KK", 2000.0, 1, W, tables_small)[0]
        assert abs(vk) < 1e-3 * abs(vy)

    def test_rejects_bad_pair(self, tables_small):
        with pytest.raises(ValueError):
            fake_main_term("KY", 2000.0, 1, W, tables_small)
