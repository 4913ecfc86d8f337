"""Pure-Python fallback for the compiled kernels.

Same contracts as ``_kernels``: a multiplicative-function sieve and the exact
eta-product coefficient convolution. The convolution packs the coefficient
array into a single big integer (fixed-width digits) so each sparse
convolution step becomes a handful of native bigint shift/multiply/add
operations instead of a Python-level double loop.
"""

import numpy as np

# Digit width for the packed representation, in bytes. Coefficients of all
# intermediate eta powers stay below 2^127 for n <= 10^6 (same capacity
# assumption the compiled kernel enforces); the extra headroom absorbs
# carry accumulation from the sparse multiplier and term count.
_DIGIT_BYTES = 24
_DIGIT_BITS = 8 * _DIGIT_BYTES
_I128_MAX = 1 << 127


def _eta3_sparse(n_terms):
    """Exponent/coefficient pairs of sum_{j>=0} (-1)^j (2j+1) q^{j(j+1)/2}."""
    out = []
    j = 0
    while j * (j + 1) // 2 < n_terms:
        out.append((j * (j + 1) // 2, (2 * j + 1) if j % 2 == 0 else -(2 * j + 1)))
        j += 1
    return out


def _pack(values, n):
    """Pack signed per-degree coefficients into (pos, neg) bigints."""
    pos = bytearray(_DIGIT_BYTES * n)
    neg = bytearray(_DIGIT_BYTES * n)
    for i, v in enumerate(values):
        if v > 0:
            pos[i * _DIGIT_BYTES:(i + 1) * _DIGIT_BYTES] = v.to_bytes(
                _DIGIT_BYTES, "little")
        elif v < 0:
            neg[i * _DIGIT_BYTES:(i + 1) * _DIGIT_BYTES] = (-v).to_bytes(
                _DIGIT_BYTES, "little")
    return int.from_bytes(pos, "little"), int.from_bytes(neg, "little")


def _unpack(pos, neg, n):
    """Recover signed coefficients from the packed (pos, neg) pair."""
    pos_bytes = pos.to_bytes(_DIGIT_BYTES * n, "little")
    neg_bytes = neg.to_bytes(_DIGIT_BYTES * n, "little")
    out = []
    for i in range(n):
        a = i * _DIGIT_BYTES
        out.append(int.from_bytes(pos_bytes[a:a + _DIGIT_BYTES], "little")
                   - int.from_bytes(neg_bytes[a:a + _DIGIT_BYTES], "little"))
    return out


def delta_tau_parts(n_max):
    """Exact Ramanujan tau(1..n_max) as (lo, hi) two's-complement halves."""
    n = int(n_max)
    sparse = _eta3_sparse(n)
    mask = (1 << (_DIGIT_BITS * n)) - 1

    coeffs = [0] * n
    for off, c in sparse:
        coeffs[off] = c

    for _ in range(7):
        # Digits stay below 2^127 * sum|c| < 2^(DIGIT_BITS - 1), so no digit
        # bleeds into its neighbour; re-canonicalising each round keeps that
        # invariant for the next multiplication.
        pos, neg = _pack(coeffs, n)
        new_pos = 0
        new_neg = 0
        for off, c in sparse:
            shift = _DIGIT_BITS * off
            if c > 0:
                new_pos += (pos << shift) * c
                new_neg += (neg << shift) * c
            else:
                new_pos += (neg << shift) * (-c)
                new_neg += (pos << shift) * (-c)
        coeffs = _unpack(new_pos & mask, new_neg & mask, n)

    lo = np.zeros(n + 1, dtype=np.uint64)
    hi = np.zeros(n + 1, dtype=np.int64)
    u64 = (1 << 64) - 1
    for m in range(1, n + 1):
        value = coeffs[m - 1]
        if not -_I128_MAX <= value < _I128_MAX:
            raise OverflowError(
                "128-bit overflow in series coefficient at n=%d" % m)
        lo[m] = value & u64
        hi[m] = value >> 64
    return lo, hi


def sieve_tables(n_max):
    """Vectorised sieve: divisor counts, totients, Mobius, smallest prime factors."""
    n = int(n_max)
    tau = np.zeros(n + 1, dtype=np.uint32)
    phi = np.zeros(n + 1, dtype=np.int64)
    mu = np.zeros(n + 1, dtype=np.int8)
    spf = np.zeros(n + 1, dtype=np.uint32)
    if n >= 1:
        spf[1] = 1

    # Divisor-count sieve and smallest-prime-factor marking.
    for d in range(1, n + 1):
        tau[d::d] += 1
    idx = np.arange(n + 1, dtype=np.uint32)
    for p in range(2, n + 1):
        if spf[p] == 0:
            unmarked = spf[p::p] == 0
            spf[p::p][unmarked] = p
    # phi(n) = n * prod_{p | n} (1 - 1/p), mu via squarefree sign flips.
    phi[1:] = idx[1:]
    mu[1:] = 1
    for p in range(2, n + 1):
        if spf[p] == p:  # p prime
            phi[p::p] -= phi[p::p] // p
            mu[p::p] = -mu[p::p]
            p2 = p * p
            if p2 <= n:
                mu[p2::p2] = 0
    tau[0] = 0
    return tau, phi.astype(np.uint64), mu, spf
