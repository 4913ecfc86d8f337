# cython: language_level=3
"""Compiled hot kernels: linear sieve and the eta-product coefficient convolution.

The convolution works in overflow-checked 128-bit signed integers: the cube of
the eta quotient is the sparse series sum_{j>=0} (-1)^j (2j+1) q^{j(j+1)/2}
(degree-24 product = that series convolved with itself seven more times).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #include <stdlib.h>
    #include <string.h>

    typedef __int128 apvar_i128;

    /* One truncated convolution step: out = cur * sparse (mod q^N).
       Returns 0 on success, or 1-based series index of the first coefficient
       whose accumulation overflowed the signed 128-bit range. */
    static long apvar_conv_sparse(const apvar_i128 *cur, apvar_i128 *out, long N,
                                  const long *tri, const long *coef, long nsp)
    {
        long t, i;
        memset(out, 0, (size_t)N * sizeof(apvar_i128));
        for (t = 0; t < nsp; t++) {
            long off = tri[t];
            long c = coef[t];
            if (off >= N) break;
            for (i = 0; i < N - off; i++) {
                apvar_i128 prod;
                if (__builtin_mul_overflow(cur[i], (apvar_i128)c, &prod))
                    return i + off + 1;
                if (__builtin_add_overflow(out[i + off], prod, &out[i + off]))
                    return i + off + 1;
            }
        }
        return 0;
    }

    /* tau(1..nmax) written as two's-complement (lo, hi) 64-bit halves.
       Returns 0 on success, -1 on allocation failure, n > 0 if the
       coefficient of q^n overflowed. */
    static long apvar_delta_tau(long nmax, unsigned long long *lo, long long *hi)
    {
        long N = nmax;            /* need coefficients 0..N-1 of the product */
        long j, n, nsp = 0, bad = 0;
        apvar_i128 *cur, *tmp, *swp;
        long *tri, *coef;
        int it;

        while (nsp * (nsp + 1) / 2 < N) nsp++;   /* triangular numbers < N */
        tri = (long *)malloc((size_t)(nsp + 1) * sizeof(long));
        coef = (long *)malloc((size_t)(nsp + 1) * sizeof(long));
        cur = (apvar_i128 *)calloc((size_t)N, sizeof(apvar_i128));
        tmp = (apvar_i128 *)malloc((size_t)N * sizeof(apvar_i128));
        if (!tri || !coef || !cur || !tmp) {
            free(tri); free(coef); free(cur); free(tmp);
            return -1;
        }
        nsp = 0;
        for (j = 0; j * (j + 1) / 2 < N; j++) {
            tri[nsp] = j * (j + 1) / 2;
            coef[nsp] = (j % 2 == 0) ? (2 * j + 1) : -(2 * j + 1);
            nsp++;
        }
        for (n = 0; n < nsp; n++) cur[tri[n]] = (apvar_i128)coef[n];
        for (it = 0; it < 7 && !bad; it++) {
            bad = apvar_conv_sparse(cur, tmp, N, tri, coef, nsp);
            swp = cur; cur = tmp; tmp = swp;
        }
        if (!bad) {
            lo[0] = 0; hi[0] = 0;
            for (n = 1; n <= nmax; n++) {
                lo[n] = (unsigned long long)(unsigned __int128)cur[n - 1];
                hi[n] = (long long)(cur[n - 1] >> 64);
            }
        }
        free(tri); free(coef); free(cur); free(tmp);
        return bad;
    }
    """
    long apvar_delta_tau(long nmax, unsigned long long *lo, long long *hi) nogil


def delta_tau_parts(long n_max):
    """Exact Ramanujan tau(1..n_max) as (lo, hi) two's-complement halves."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] lo = np.zeros(n_max + 1, dtype=np.uint64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hi = np.zeros(n_max + 1, dtype=np.int64)
    cdef long status
    with nogil:
        status = apvar_delta_tau(n_max, <unsigned long long *>lo.data,
                                 <long long *>hi.data)
    if status == -1:
        raise MemoryError("coefficient buffers for n_max=%d" % n_max)
    if status > 0:
        raise OverflowError(
            "128-bit overflow in series coefficient at n=%d" % status)
    return lo, hi


def sieve_tables(long n_max):
    """Linear sieve: divisor counts, totients, Mobius, smallest prime factors."""
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] tau = np.zeros(n_max + 1, dtype=np.uint32)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] phi = np.zeros(n_max + 1, dtype=np.uint64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] mu = np.zeros(n_max + 1, dtype=np.int8)
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] spf = np.zeros(n_max + 1, dtype=np.uint32)
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] cnt = np.zeros(n_max + 1, dtype=np.uint32)
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] primes = np.zeros(
        max(n_max, 2), dtype=np.uint32)
    cdef long i, m, nprimes = 0
    cdef unsigned long p

    if n_max >= 1:
        tau[1] = 1; phi[1] = 1; mu[1] = 1; spf[1] = 1
    for i in range(2, n_max + 1):
        if spf[i] == 0:
            spf[i] = i
            tau[i] = 2
            phi[i] = i - 1
            mu[i] = -1
            cnt[i] = 1
            primes[nprimes] = i
            nprimes += 1
        for m in range(nprimes):
            p = primes[m]
            if p > spf[i] or i * <long>p > n_max:
                break
            if p == spf[i]:
                spf[i * p] = p
                cnt[i * p] = cnt[i] + 1
                tau[i * p] = tau[i] // (cnt[i] + 1) * (cnt[i] + 2)
                phi[i * p] = phi[i] * p
                mu[i * p] = 0
            else:
                spf[i * p] = p
                cnt[i * p] = 1
                tau[i * p] = tau[i] * 2
                phi[i * p] = phi[i] * (p - 1)
                mu[i * p] = -mu[i]
    return tau, phi, mu, spf
