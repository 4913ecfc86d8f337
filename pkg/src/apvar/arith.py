"""Exact integer arithmetic functions and Dirichlet-series side data.

Provides:
  * ArithTables / build_arith_tables  -- sieved divisor counts, totients,
    Mobius values and smallest prime factors up to n_max,
  * divisors                         -- divisor enumeration via the spf array,
  * ramanujan_sum                    -- c_k(h) = sum_{d | (k,|h|)} mu(k/d) d,
  * sigma_log                        -- sum_{d|n} d^a log(d)^k,
  * h_complex / h_factor             -- the finite Euler product over p | r
    attached to the Dirichlet series of sigma_a(nr), and its a = -1 envelope
    prod_{p|r} (1 + 1/(p-1)),
  * g_of                             -- sum_{r|q} phi(r)/r.

Key identity: sum_n sigma_a(nr)/n^s = zeta(s) zeta(s-a) h(a, r, s).
"""

import math
from dataclasses import dataclass

import numpy as np

from apvar import _core

#: Hard capacity for table construction; 16 bytes/entry keeps this ~320 MB.
N_MAX_CAP = 20_000_000


@dataclass(frozen=True)
class ArithTables:
    """Sieved multiplicative-function tables, arrays indexed 1..n_max."""

    n_max: int
    tau: np.ndarray   # uint32 divisor counts
    phi: np.ndarray   # uint64 totients
    mu: np.ndarray    # int8 Mobius values in {-1, 0, 1}
    spf: np.ndarray   # uint32 smallest prime factors


def build_arith_tables(n_max):
    """Sieve tau, phi, mu and smallest prime factors for 1 <= n <= n_max.

    Args:
        n_max: largest index to tabulate (>= 1).

    Returns:
        ArithTables with all four arrays filled; index 0 is unused.

    Raises:
        ValueError: if n_max < 1 or n_max exceeds the memory cap.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1, got %d" % n_max)
    if n_max > N_MAX_CAP:
        raise ValueError(
            "n_max=%d exceeds the table capacity %d" % (n_max, N_MAX_CAP))
    tau, phi, mu, spf = _core.sieve_tables(n_max)
    return ArithTables(n_max=n_max, tau=tau, phi=phi, mu=mu, spf=spf)


def factorize(n, tables=None):
    """Prime factorisation of n as a list of (p, exponent) pairs.

    Uses the smallest-prime-factor table when ``n <= tables.n_max``; falls
    back to trial division otherwise.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive, got %d" % n)
    out = []
    if tables is not None and n <= tables.n_max:
        spf = tables.spf
        while n > 1:
            p = int(spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def divisors(n, tables=None):
    """Sorted divisors of n, built from its spf factorisation.

    Args:
        n: positive integer; must satisfy n <= tables.n_max when tables given.

    Returns:
        Increasing list of all divisors of n.
    """
    if tables is not None and n > tables.n_max:
        raise ValueError("n=%d out of table range n_max=%d" % (n, tables.n_max))
    divs = [1]
    for p, e in factorize(n, tables):
        divs = [d * p ** j for d in divs for j in range(e + 1)]
    return sorted(divs)


def ramanujan_sum(k, h, tables=None):
    """Ramanujan sum c_k(h) as an exact integer.

    Evaluates the closed form sum_{d | gcd(k, |h|)} mu(k/d) d, which equals
    the exponential sum over units d mod k of e(hd/k). For h = 0 this
    degenerates to phi(k), consistent with the direct sum.
    """
    k = int(k)
    if k < 1:
        raise ValueError("modulus k must be >= 1, got %d" % k)
    fac = factorize(k, tables)
    if h == 0:
        out = 1
        for p, e in fac:
            out *= p ** (e - 1) * (p - 1)
        return out
    h = abs(int(h))
    # Multiplicative in k: c_{p^e}(h) has a three-case local factor.
    out = 1
    for p, e in fac:
        v = 0
        hh = h
        while hh % p == 0:
            hh //= p
            v += 1
        if e <= v:
            out *= p ** (e - 1) * (p - 1)
        elif e == v + 1:
            out *= -(p ** v)
        else:
            return 0
    return out


def sigma_log(n, a, k):
    """sum_{d | n} d^a log(d)^k by exact divisor enumeration.

    Args:
        n: positive integer.
        a: real exponent.
        k: log power, one of {0, 1, 2}.
    """
    if k not in (0, 1, 2):
        raise ValueError("log power k must be in {0, 1, 2}, got %r" % (k,))
    total = 0.0
    for d in divisors(n):
        total += d ** a * math.log(d) ** k
    return total


def h_complex(a, r, s, tables=None):
    """Finite Euler product h(a, r, s) over the primes dividing r.

    h(a,r,s) = prod_{p|r} (1-p^a)^{-1}
               (1 - p^{-(s-a)} - p^{a(v+1)} + p^{-s+a(v+1)}),  v = v_p(r).

    Args:
        a: nonzero complex exponent (a = 0 hits the (1-p^a)^{-1} poles).
        r: positive integer; r = 1 gives the empty product 1.
        s: complex argument.
    """
    a = complex(a)
    if a == 0:
        raise ValueError("a=0 is a pole of the local factors (1-p^a)^{-1}")
    r = int(r)
    if r < 1:
        raise ValueError("r must be >= 1, got %d" % r)
    out = complex(1.0)
    for p, v in factorize(r, tables):
        pc = complex(p)
        out *= (1 - pc ** a) ** -1 * (
            1 - pc ** (a - s) - pc ** (a * (v + 1)) + pc ** (-s + a * (v + 1)))
    return out


def h_factor(r, tables=None):
    """The a = -1 envelope h(r) = prod_{p | r} (1 + 1/(p-1))."""
    out = 1.0
    for p, _ in factorize(r, tables):
        out *= 1.0 + 1.0 / (p - 1)
    return out


def g_of(q, tables=None):
    """g(q) = sum_{r | q} phi(r)/r, evaluated in floating point."""
    q = int(q)
    if q < 1:
        raise ValueError("q must be >= 1, got %d" % q)
    total = 0.0
    for r in divisors(q, tables):
        phi = 1
        for p, e in factorize(r, tables):
            phi *= p ** (e - 1) * (p - 1)
        total += phi / r
    return total
