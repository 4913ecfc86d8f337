"""Shifted convolutions: the Lambda_h series, exact off-diagonal sums, and
the fake main terms.

The additive-divisor main-term density

    Lambda_h(x, y) = sum_{k >= 1} c_k(h)/k^2
                     (log x - 2 gamma - 2 log k)(log y - 2 gamma - 2 log k)

is a three-moment polynomial in (log x, log y) once the k-sum is folded, so
a truncation at K costs O(K) once per h and O(1) per evaluation point. The
off-diagonal pieces of the smooth variances,

    E(X, q)    = (1/q) sum_{d r | q} (mu(d)/(d^2 r))
                 sum_{n = m (r), n != m} a(n) a(m)
                     omega_J(sqrt(n)/(dr)) omega_J(sqrt(m)/(dr)),

its divisor analogues with (tau, omega_Y), (tau, omega_K), and the cross
term over n + m = 0 (r), are exact finite double sums grouped by residue
class; together with the diagonal main terms they reassemble the directly
bucketed smooth variances identically.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from apvar import _core
from apvar.arith import divisors
from apvar.specfun import EULER_GAMMA, _panel_nodes, as_kind, omega_grid
from apvar.variance import (CUT_FACTOR, _profile, diag_cutoff, euler_phi,
                            smooth_variance_cusp, smooth_variance_divisor)

#: Default truncation of the Lambda_h series; the 1/K tail leaves ~1e-4
#: absolute room at desk log-scales.
DEFAULT_K = 100_000

_MU_CACHE = {"mu": None}
_MU_LOCK = threading.Lock()


def _mobius_upto(k_max):
    """Cached Mobius values mu(1..k_max) as an int8 array."""
    with _MU_LOCK:
        mu = _MU_CACHE["mu"]
        if mu is None or len(mu) <= k_max:
            mu = _core.sieve_tables(max(int(k_max), 1000))[2]
            _MU_CACHE["mu"] = mu
    return mu


def _check_h(h):
    h = int(h)
    if h == 0:
        raise ValueError("shift h must be nonzero")
    return h


def ramanujan_block(h, K):
    """c_k(h) for k = 1..K as a float array, via c_k(h) = sum_{d | (k,|h|)}
    mu(k/d) d folded over the divisors of |h|."""
    h = abs(_check_h(h))
    K = int(K)
    mu = _mobius_upto(K)
    c = np.zeros(K + 1)
    for d in divisors(h):
        if d > K:
            continue
        c[d::d] += float(d) * mu[1:K // d + 1]
    return c


def tau_of(n):
    """Divisor count of |n| by factorisation."""
    from apvar.arith import factorize
    out = 1
    for _, e in factorize(abs(int(n))):
        out *= e + 1
    return out


@dataclass
class LambdaSeries:
    """Truncated Lambda_h series in folded three-moment form.

    Expanding the product against L_x = log x - 2 gamma gives
    Lambda_h = S0 L_x L_y - S1 (L_x + L_y) + S2 with the moments
    S_j = sum_{k <= K} c_k(h) (2 log k)^j / k^2; evaluation is then O(1).
    """

    h: int
    K: int
    gamma: float = EULER_GAMMA
    _moments: tuple = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def moments(self):
        if self._moments is None:
            c = ramanujan_block(self.h, self.K)
            ks = np.arange(len(c), dtype=float)
            ks[0] = 1.0
            base = c / ks ** 2
            t = 2.0 * np.log(ks)
            self._moments = (float(base.sum()), float(np.dot(base, t)),
                             float(np.dot(base, t * t)))
        return self._moments

    def value(self, x, y):
        key = (float(x), float(y))
        out = self._cache.get(key)
        if out is None:
            s0, s1, s2 = self.moments()
            lx = math.log(x) - 2.0 * self.gamma
            ly = math.log(y) - 2.0 * self.gamma
            out = s0 * lx * ly - s1 * (lx + ly) + s2
            self._cache[key] = out
        return out

    def value_vec(self, xs, ys):
        s0, s1, s2 = self.moments()
        lx = np.log(xs) - 2.0 * self.gamma
        ly = np.log(ys) - 2.0 * self.gamma
        return s0 * lx * ly - s1 * (lx + ly) + s2

    def tail_bound(self, x, y):
        """Certified bound (log xy + log K)^2 tau(|h|) (2/K) on the omitted
        k > K part, from |c_k(h)| <= (k, |h|) <= tau(|h|)-smooth envelopes."""
        return ((math.log(x * y) + math.log(self.K)) ** 2
                * tau_of(self.h) * 2.0 / self.K)


_SERIES_CACHE = {}
_SERIES_LOCK = threading.Lock()


def _series(h, K):
    key = (int(h), int(K))
    with _SERIES_LOCK:
        ser = _SERIES_CACHE.get(key)
        if ser is None:
            ser = LambdaSeries(h=key[0], K=key[1])
            _SERIES_CACHE[key] = ser
    return ser


def lambda_h(x, y, h, K=DEFAULT_K):
    """Truncated Lambda_h(x, y) with a certified tail bound.

    Args:
        x, y: positive evaluation points.
        h: nonzero shift.
        K: series truncation (K >= 1).

    Returns:
        (value, tail_bound) with |full - value| <= tail_bound.
    """
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    h = _check_h(h)
    if K < 1:
        raise ValueError("K must be >= 1, got %r" % (K,))
    ser = _series(h, K)
    return ser.value(x, y), ser.tail_bound(x, y)


def lambda_series_check(h, K=1_000_000):
    """Truncated sum_{k <= K} c_k(h)/k^2 against sigma_{-1}(h)/zeta(2).

    The left side folds to sum_{d | |h|} (1/d) sum_{m <= K/d} mu(m)/m^2, so
    only Mobius prefix sums are needed.

    Returns:
        (lhs, rhs, diff) with diff = |lhs - rhs|.
    """
    h = abs(_check_h(h))
    mu = _mobius_upto(K)
    ms = np.arange(1, K + 1, dtype=float)
    prefix = np.cumsum(mu[1:K + 1] / ms ** 2)
    lhs = sum(prefix[K // d - 1] / d for d in divisors(h))
    rhs = sum(1.0 / d for d in divisors(h)) * 6.0 / math.pi ** 2
    return lhs, rhs, abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Exact shifted sums and the DFI main term
# ---------------------------------------------------------------------------

def _sequence(u, tables):
    if u == "cusp":
        return np.asarray(tables.a_norm, dtype=float)
    if u == "divisor":
        return np.asarray(tables.tau, dtype=float)
    raise ValueError("u must be 'cusp' or 'divisor', got %r" % (u,))


def shifted_sum_exact(u, h, g, M, N, tables, anti=False):
    """Exact sum over n - m = h (or n + m = h when anti=True) of
    u(n) u(m) g(m, n), with m in [M, 2M] and n in [N, 2N].

    ``g`` is a vectorised evaluator g(m, n); the sum is one pass over m.
    """
    h = _check_h(h)
    coeffs = _sequence(u, tables)
    M, N = int(M), int(N)
    ms = np.arange(M, 2 * M + 1)
    ns = (h - ms) if anti else (ms + h)
    keep = (ns >= max(N, 1)) & (ns <= 2 * N)
    ms, ns = ms[keep], ns[keep]
    if ms.size == 0:
        return 0.0
    if max(ms.max(), ns.max()) >= len(coeffs):
        raise ValueError("support box exceeds table range n_max=%d"
                         % (len(coeffs) - 1))
    vals = coeffs[ms] * coeffs[ns] * np.asarray(g(ms.astype(float),
                                                  ns.astype(float)),
                                                dtype=float)
    return float(np.sum(vals))


def dfi_main_term(u, h, g, support, K=DEFAULT_K, rel_tol=1e-8,
                  max_panels=4096):
    """Main term delta_{u=divisor} int g(x, x+h) Lambda_h(x, x+h) dx.

    The integrand is smooth on the support box, so doubling bisection panels
    (order-12 Gauss) until the change drops below rel_tol suffices.

    Args:
        u: 'cusp' (main term vanishes) or 'divisor'.
        h: nonzero shift.
        g: vectorised evaluator g(x, y).
        support: (lo, hi) with 0 < lo < hi; g vanishes outside.
    """
    h = _check_h(h)
    if u == "cusp":
        return 0.0
    if u != "divisor":
        raise ValueError("u must be 'cusp' or 'divisor', got %r" % (u,))
    lo, hi = support
    if not 0 < lo < hi:
        raise ValueError("support must satisfy 0 < lo < hi")
    lo = max(lo, 1e-12, -h + 1e-12 if h < 0 else 0.0)
    ser = _series(h, K)

    def quad(n_panels):
        xs, ws = _panel_nodes(lo, hi, n_panels, 12)
        vals = np.asarray(g(xs, xs + h), dtype=float)
        return float(np.dot(vals * ser.value_vec(xs, xs + h), ws))

    n_panels = 8
    prev = quad(n_panels)
    while n_panels < max_panels:
        n_panels *= 2
        cur = quad(n_panels)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise RuntimeError("quadrature did not stabilise at %d panels" % n_panels)


# ---------------------------------------------------------------------------
# Off-diagonal sums
# ---------------------------------------------------------------------------

_KIND_WEIGHTS = {"cusp-J": ("J", "J"), "div-YY": ("Y", "Y"),
                 "div-KK": ("K", "K"), "div-YK": ("Y", "K")}


def dual_terms(kind, coeffs, dr, w, tol_rel=1e-10, alpha_step=0.25,
               alpha_cap=64.0):
    """Adaptively truncated array t_n = c(n) omega_B(sqrt(n)/dr).

    Blocks advance in the transform argument alpha = sqrt(n)/dr, whose
    quadrature cost grows linearly, and stop once two consecutive blocks
    peak below tol_rel times the running maximum — the transforms decay
    super-polynomially past alpha ~ sqrt(X)/H, but with constants that
    only this probe can see.

    Raises:
        ValueError: if the coefficient table runs out first.
        RuntimeError: if alpha_cap is reached without decay.
    """
    kind = as_kind(kind)
    n_max = len(coeffs) - 1
    if kind.tag == "K":
        # Exponential kernel: everything past the e^{-60} argument is dead.
        alpha_cap = min(alpha_cap,
                        60.0 / (4.0 * math.pi * math.sqrt(w.H)))
    # Quadrature noise scales with the integral mass; terms below that are
    # indistinguishable from zero whatever the running peak says.
    noise_floor = 5e-15 * (w.X - w.H)
    out = []
    peak = 0.0
    quiet = 0
    a = 0.0
    n0 = 1
    while a < alpha_cap:
        a_next = a + alpha_step
        n_hi = int(math.floor((a_next * dr) ** 2))
        a = a_next
        if n_hi < n0:
            continue
        if n_hi > n_max:
            raise ValueError(
                "table n_max=%d exhausted before the dual terms decayed "
                "(dr=%d, reached n=%d)" % (n_max, dr, n0 - 1))
        ns = np.arange(n0, n_hi + 1)
        om = omega_grid(kind, np.sqrt(ns.astype(float)) / dr, w).real
        t = coeffs[n0:n_hi + 1] * om
        out.append(t)
        n0 = n_hi + 1
        m = float(np.max(np.abs(t)))
        if m <= max(tol_rel * peak, noise_floor) and peak > 0.0:
            quiet += 1
            if quiet >= 2:
                return np.concatenate(out)
        else:
            quiet = 0
            peak = max(peak, m)
    if kind.tag == "K":
        return np.concatenate(out) if out else np.zeros(0)
    raise RuntimeError(
        "dual terms did not decay below %.1e of peak by alpha=%g (dr=%d)"
        % (tol_rel, alpha_cap, dr))


def offdiag_exact(X, q, kind, w, tables, tol_rel=1e-10, alpha_cap=64.0):
    """Exact off-diagonal contribution E to the smooth variance.

    kind selects the weight pair: 'cusp-J' for E(X, q) with the Hecke
    sequence, 'div-YY'/'div-KK' for the divisor terms with equal kernels
    (both excluding the diagonal n = m), and 'div-YK' for the cross term
    over n + m = 0 (r) (all pairs, factor 2 included). Evaluation groups
    n by residue class, so each (d, r) term costs one pass over the dual
    range. Summation order is fixed (divisor-sorted pairs, numpy dot
    reductions), so results are bit-reproducible.

    Args:
        X: scale; w.X must equal X.
        q: modulus >= 1.
        w: SmoothWeight.
        tables: HeckeTable for 'cusp-J', ArithTables for the divisor kinds.
        tol_rel: relative decay threshold for the dual truncation.
    """
    if kind not in _KIND_WEIGHTS:
        raise ValueError("kind must be one of %s, got %r"
                         % (sorted(_KIND_WEIGHTS), kind))
    if abs(w.X - X) > 1e-9 * X:
        raise ValueError("weight has X=%g, expected %g" % (w.X, X))
    q = int(q)
    tag_a, tag_b = _KIND_WEIGHTS[kind]
    k = getattr(tables, "k", 12)
    kind_a, kind_b = as_kind(tag_a, k), as_kind(tag_b, k)
    coeffs = _sequence("cusp" if kind == "cusp-J" else "divisor", tables)

    cache = {}

    def terms(kd, dr):
        key = (kd.tag, dr)
        if key not in cache:
            cache[key] = dual_terms(kd, coeffs, dr, w, tol_rel,
                                    alpha_cap=alpha_cap)
        return cache[key]

    total = 0.0
    for r in divisors(q):
        for d in divisors(q // r):
            mu_d = _mobius_int(d)
            if mu_d == 0:
                continue
            dr = d * r
            va = terms(kind_a, dr)
            ns_a = np.arange(1, len(va) + 1)
            sums_a = np.bincount(ns_a % r, weights=va, minlength=r)
            if tag_b == tag_a:
                # sum_{n = m (r), n != m} = sum_c S_c^2 - sum_n v_n^2.
                inner = float(np.sum(sums_a ** 2) - np.sum(va ** 2))
                total += mu_d / (d * d * r) * inner
            else:
                vb = terms(kind_b, dr)
                ns_b = np.arange(1, len(vb) + 1)
                sums_b = np.bincount(ns_b % r, weights=vb, minlength=r)
                inner = float(np.dot(sums_a, sums_b[(-np.arange(r)) % r]))
                total += 2.0 * mu_d / (d * d * r) * inner
    return total / q


def _mobius_int(d):
    from apvar.arith import factorize
    out = 1
    for _, e in factorize(d):
        if e > 1:
            return 0
        out = -out
    return out


def diagonal_from_duals(q, kind, coeffs, w, tol_rel=1e-10):
    """Diagonal main term (1/q) sum_{r|q} (phi(r)/r^2) sum_n t_n^2 computed
    from the same adaptively truncated dual terms as the off-diagonal, so
    the two halves of the decomposition share one truncation policy."""
    q = int(q)
    total = 0.0
    for r in divisors(q):
        t = dual_terms(kind, coeffs, r, w, tol_rel)
        total += euler_phi(r) / r ** 2 * float(np.dot(t, t))
    return total / q


@dataclass(frozen=True)
class DecompositionReport:
    """Direct smooth variance against its exact diagonal + off-diagonal
    reassembly."""

    X: float
    q: int
    sequence: str
    direct: float
    diagonal: float
    offdiag: float
    reassembled: float
    rel_gap: float


def smooth_variance_decomposition(X, q, sequence, w, tables, tol_rel=1e-10):
    """Reassemble the smooth bucketed variance identity exactly.

    For the cusp sequence: A_w(q; a) = MT + E with the J-kernel pieces.
    For the divisor sequence: A_w(q; tau) = MT_Y + MT_K + E_YY + E_KK + E_YK.
    Both sides are finite computations; agreement is limited only by the
    dual truncation (tol_rel) and roundoff.
    """
    q = int(q)
    if sequence == "cusp":
        direct = smooth_variance_cusp(q, w, tables)
        kind = as_kind("J", tables.k)
        coeffs = _sequence("cusp", tables)
        diagonal = diagonal_from_duals(q, kind, coeffs, w, tol_rel)
        offdiag = offdiag_exact(X, q, "cusp-J", w, tables, tol_rel)
    elif sequence == "divisor":
        direct = smooth_variance_divisor(q, w, tables)
        coeffs = _sequence("divisor", tables)
        diagonal = (diagonal_from_duals(q, as_kind("Y"), coeffs, w, tol_rel)
                    + diagonal_from_duals(q, as_kind("K"), coeffs, w,
                                          tol_rel))
        offdiag = (offdiag_exact(X, q, "div-YY", w, tables, tol_rel)
                   + offdiag_exact(X, q, "div-KK", w, tables, tol_rel)
                   + offdiag_exact(X, q, "div-YK", w, tables, tol_rel))
    else:
        raise ValueError("sequence must be 'cusp' or 'divisor', got %r"
                         % (sequence,))
    reassembled = diagonal + offdiag
    scale = max(abs(direct), abs(reassembled))
    return DecompositionReport(
        X=float(X), q=q, sequence=sequence, direct=direct,
        diagonal=diagonal, offdiag=offdiag, reassembled=reassembled,
        rel_gap=abs(direct - reassembled) / scale if scale else 0.0)


# ---------------------------------------------------------------------------
# Fake main terms
# ---------------------------------------------------------------------------

def fake_main_term(bb, X, q, w, tables, K=DEFAULT_K, cut_factor=CUT_FACTOR,
                   quad_tol=1e-6):
    """Fake main term (2/q) sum_{d r | q} (mu(d)/(d^2 r)) sum_l
    int g_{B,B'}(x, x + l r; d r) Lambda_{l r}(x, x + l r) dx, with
    g_{B,B'}(x, y; m) = omega_B(sqrt(x)/m) omega_{B'}(sqrt(y)/m).

    For the 'YK' pair the shifted equation is x + y = l r, so the integral
    runs over g(x, l r - x) on (0, l r). The l-sum truncates where the
    transform decay kills g; both omega factors are evaluated through
    cached profiles.

    Returns:
        (value, budget, ratio): the computed value, the
        q tau(q) X^{1/2} H^{-1/2} log^4 X budget shape, and |value|/budget.
    """
    if bb not in ("YY", "KK", "YK"):
        raise ValueError("pair must be 'YY', 'KK' or 'YK', got %r" % (bb,))
    if abs(w.X - X) > 1e-9 * X:
        raise ValueError("weight has X=%g, expected %g" % (w.X, X))
    q = int(q)
    kind_a, kind_b = as_kind(bb[0]), as_kind(bb[1])
    anti = bb == "YK"
    # Truncate where the transforms die: the smooth-ramp Fourier decay
    # reaches fmt_tol by alpha ~ log(1/tol)^2 / (4 sqrt(H)) (exponential
    # kernels much earlier), so g_{B,B'} vanishes past x = (alpha dr)^2.
    cut_a = _fmt_alpha_cut(kind_a, w, quad_tol)
    cut_b = _fmt_alpha_cut(kind_b, w, quad_tol)
    plan = []
    alpha_hi = 0.0
    for r in divisors(q, tables):
        for d in divisors(q // r, tables):
            mu_d = _mobius_int(d)
            if mu_d == 0:
                continue
            dr = d * r
            x_max = (cut_a * dr) ** 2
            # Both factors must be live: y <= (cut_b dr)^2 bounds the shift.
            l_max = max(1, int(math.ceil(
                (x_max + (cut_b * dr) ** 2) / r)))
            plan.append((d, r, x_max, l_max))
            alpha_hi = max(alpha_hi, math.sqrt(x_max + l_max * r) / dr)
    prof_a = _profile(kind_a, w, alpha_hi * 1e-6, alpha_hi, quad_tol)
    prof_b = prof_a if kind_b.tag == kind_a.tag else _profile(
        kind_b, w, alpha_hi * 1e-6, alpha_hi, quad_tol)
    total = 0.0
    for d, r, x_max, l_max in plan:
        term = 0.0
        for l in range(1, l_max + 1):
            term += _fmt_integral(prof_a, prof_b, d * r, l * r, x_max, w,
                                  K, anti)
        total += _mobius_int(d) / (d * d * r) * term
    value = 2.0 * total / q
    tau_q = len(divisors(q, tables))
    budget = (q * tau_q * math.sqrt(X / w.H) * math.log(X) ** 4)
    return value, budget, abs(value) / budget


def _fmt_alpha_cut(kind, w, tol):
    """Alpha beyond which omega_B is numerically below tol relative to its
    peak: the smooth ramp's Fourier decay for the oscillatory kernels, the
    exponential dead zone for K."""
    if kind.tag == "K":
        return 60.0 / (4.0 * math.pi * math.sqrt(w.H))
    return max(1.0, math.log(1.0 / tol)) ** 2 / (4.0 * math.sqrt(w.H))


def _fmt_integral(prof_a, prof_b, dr, shift, x_max, w, K, anti):
    """int omega_A(sqrt(x)/dr) omega_B(sqrt(y)/dr) Lambda_shift(x, y) dx
    with y = shift - x (anti) or x + shift.

    Substituting x = (alpha dr)^2 turns this into an alpha-integral whose
    oscillation frequency is at most 4 pi sqrt(X); half-period panels
    resolve it, and the profiles make each node cheap.
    """
    ser = _series(shift, K)
    hi = min(x_max, shift * (1 - 1e-9)) if anti else x_max
    if hi <= 0:
        return 0.0
    a_lo = max(math.sqrt(hi) / dr * 1e-6, prof_a.alpha_min)
    a_hi = math.sqrt(hi) / dr
    if a_hi <= a_lo:
        return 0.0
    width = 1.0 / (8.0 * math.sqrt(w.X))
    n_panels = max(24, int(math.ceil((a_hi - a_lo) / width)))
    als, ws = _panel_nodes(a_lo, a_hi, n_panels, 10)
    xs = (als * dr) ** 2
    ys = (shift - xs) if anti else (xs + shift)
    al_y = np.maximum(np.sqrt(ys) / dr, prof_b.alpha_min)
    vals = (prof_a(als) * prof_b(al_y)
            * ser.value_vec(xs, ys)) * 2.0 * dr * dr * als
    return float(np.dot(vals, ws))
