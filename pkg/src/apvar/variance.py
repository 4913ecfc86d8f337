"""Variances in arithmetic progressions and their smooth main terms.

Exact side: the bucketed variances

    A(X, q)      = sum_b | sum_{n <= X, n = b (q)} a(n) |^2,
    A(x, q; tau) = sum_b | sum_{n <= x, n = b (q)} tau(n) - MT(b, x, q) |^2,

with the two-sum main term MT(b, x, q) for the divisor function. Smooth side:
the diagonal main terms

    MT(X, q)    = (1/q) sum_{r | q} (phi(r)/r^2) sum_n a(n)^2   omega_J(sqrt(n)/r)^2,
    MT(X, q, B) = (1/q) sum_{r | q} (phi(r)/r^2) sum_n tau(n)^2 omega_B(sqrt(n)/r)^2,

whose n-sums truncate at roughly r^2 X / H^2 thanks to the transform decay.
The regime comparator packages an exact variance, its prediction and the
error-budget monomials into a single report.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from apvar.arith import divisors, factorize, g_of, ramanujan_sum
from apvar.forms import estimate_rankin_residue
from apvar.specfun import (EULER_GAMMA, SmoothWeight, _osc_rule, as_kind,
                           omega_grid, smooth_weight_eval)
from apvar.voronoi import log_weight_integral


def euler_phi(n, tables=None):
    """Exact totient of n."""
    out = 1
    for p, e in factorize(n, tables):
        out *= p ** (e - 1) * (p - 1)
    return out


# ---------------------------------------------------------------------------
# Exact bucketed variances
# ---------------------------------------------------------------------------

def bucket_sums(values, q):
    """Residue-class sums sum_{n = b (q)} values[n] for b = 0..q-1.

    ``values`` is indexed by n starting at index 0 = n of 0; one bincount
    pass, so O(len + q) time. The identity sum_b bucket_b = sum_n values[n]
    holds exactly up to float addition order.
    """
    q = int(q)
    if q < 1:
        raise ValueError("q must be >= 1, got %d" % q)
    vals = np.asarray(values, dtype=float)
    ns = np.arange(len(vals))
    return np.bincount(ns % q, weights=vals, minlength=q)


def variance_cusp_exact(X, q, table):
    """A(X, q) = sum_b | sum_{n <= X, n = b (q)} a(n) |^2, exactly.

    Args:
        X: upper cutoff (real, X <= table.n_max).
        q: modulus >= 1.
        table: HeckeTable.
    """
    m = int(math.floor(X))
    if m > table.n_max:
        raise ValueError("X=%r beyond table n_max=%d" % (X, table.n_max))
    if m < 1:
        return 0.0
    sums = bucket_sums(table.a_norm[:m + 1], q)
    return float(np.sum(sums ** 2))


@dataclass(frozen=True)
class MainTermDivisor:
    """The expected count of tau(n) in the class n = b (q), n <= x."""

    b: int
    x: float
    q: int
    value: float


def mt_divisor(b, x, q, tables):
    """Exact main term MT(b, x, q) for the divisor function in a progression.

    MT(b, x, q) = (1/q) sum_{r | (q,b)} (phi(q/r) / (q/r))
                      * x (log x + 2 gamma - 1 - 2 log r)
                - (2/q) sum_{r | (q,b)} sum_{d | q/r} (mu(d) log d / d) * x.

    Only g = gcd(q, b) enters, through the divisor conditions r | (q, b).
    For q = 1 this collapses to x (log x + 2 gamma - 1).
    """
    b, q = int(b), int(q)
    if not 1 <= b <= q:
        raise ValueError("need 1 <= b <= q, got b=%d, q=%d" % (b, q))
    if x <= 0:
        raise ValueError("x must be positive, got %r" % (x,))
    g = math.gcd(q, b)
    lead = math.log(x) + 2.0 * EULER_GAMMA - 1.0
    first = 0.0
    second = 0.0
    mu = tables.mu if tables is not None else None
    for r in divisors(g, tables):
        qr = q // r
        first += euler_phi(qr, tables) / qr * (lead - 2.0 * math.log(r))
        for d in divisors(qr, tables):
            if d == 1:
                continue
            mud = int(mu[d]) if mu is not None else _mobius(d)
            second += mud * math.log(d) / d
    value = (x / q) * first - (2.0 * x / q) * second
    return MainTermDivisor(b=b, x=float(x), q=q, value=value)


def _mobius(n):
    out = 1
    for _, e in factorize(n):
        if e > 1:
            return 0
        out = -out
    return out


def variance_divisor_exact(x, q, tables):
    """A(x, q; tau) = sum_b | sum_{n <= x, n = b (q)} tau(n) - MT(b,x,q) |^2.

    The bucket sums are one bincount pass; MT(b, x, q) depends on b only
    through gcd(q, b), so it is evaluated once per divisor of q.
    """
    q = int(q)
    m = int(math.floor(x))
    if m > tables.n_max:
        raise ValueError("x=%r beyond tables n_max=%d" % (x, tables.n_max))
    buckets = bucket_sums(tables.tau[:m + 1], q) if m >= 1 else np.zeros(q)
    mt_by_gcd = {g: mt_divisor(g, x, q, tables).value for g in divisors(q, tables)}
    total = 0.0
    for b in range(1, q + 1):
        diff = buckets[b % q] - mt_by_gcd[math.gcd(q, b)]
        total += diff * diff
    return float(total)


# ---------------------------------------------------------------------------
# Smooth bucketed variances (weighted analogues)
# ---------------------------------------------------------------------------

def smooth_variance_cusp(q, w, table):
    """A_w(q; a) = sum_b | sum_{n = b (q)} a(n) w(n) |^2, exactly."""
    m = min(table.n_max, int(math.ceil(w.X)))
    ns = np.arange(m + 1, dtype=float)
    vals = np.asarray(table.a_norm[:m + 1]) * smooth_weight_eval(ns, w)
    sums = bucket_sums(vals, q)
    return float(np.sum(sums ** 2))


def smooth_variance_divisor(q, w, tables):
    """sum_b | sum_{n = b (q)} tau(n) w(n) - T_w(b, q) |^2 with the smooth
    expected value T_w(b, q) = (1/q) sum_{r | q} (c_r(b)/r) I_r, where
    I_r = int (log x + 2 gamma - 2 log r) w(x) dx and c_r is the Ramanujan
    sum.
    """
    q = int(q)
    m = min(tables.n_max, int(math.ceil(w.X)))
    if m < w.X - 1:
        raise ValueError("tables cover n <= %d < X = %g" % (tables.n_max, w.X))
    ns = np.arange(m + 1, dtype=float)
    vals = tables.tau[:m + 1] * smooth_weight_eval(ns, w)
    buckets = bucket_sums(vals, q)
    rs = divisors(q, tables)
    ints = {r: log_weight_integral(w, 2.0 * EULER_GAMMA - 2.0 * math.log(r))
            for r in rs}
    total = 0.0
    for b in range(1, q + 1):
        t_b = sum(ramanujan_sum(r, b, tables) / r * ints[r] for r in rs) / q
        diff = buckets[b % q] - t_b
        total += diff * diff
    return float(total)


# ---------------------------------------------------------------------------
# Omega profiles: spline accelerators for the big transform sums
# ---------------------------------------------------------------------------

class _KernelTable:
    """Uniform-grid cubic spline of a (real) Bessel kernel on [z_lo, z_hi].

    Step (384 tol)^{1/4} keeps the interpolation error of the unit-scale
    oscillatory kernel below tol; evaluation is a direct index-and-evaluate
    on the piecewise cubic, far cheaper than recomputing the kernel. The
    log-singular Y kernel falls back to direct evaluation below z = 4.
    """

    def __init__(self, kind, z_lo, z_hi, tol=1e-10):
        self.kind = kind
        self.direct_below = 4.0 if kind.tag == "Y" else 0.0
        lo = max(z_lo, self.direct_below)
        hi = max(z_hi, lo + 1.0)
        step = (384.0 * tol) ** 0.25
        n = int(math.ceil((hi - lo) / step)) + 2
        xs = np.linspace(lo, hi, n)
        spline = CubicSpline(xs, kind.kernel_vec(xs).real)
        self.x0 = float(xs[0])
        self.step = float(xs[1] - xs[0])
        self.n = n
        self.c = spline.c

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        i = np.clip(((z - self.x0) / self.step).astype(np.int64), 0, self.n - 2)
        dz = z - (self.x0 + i * self.step)
        c = self.c
        out = ((c[0, i] * dz + c[1, i]) * dz + c[2, i]) * dz + c[3, i]
        if self.direct_below > 0.0:
            low = z < self.direct_below
            if np.any(low):
                out[low] = self.kind.kernel_vec(z[low]).real
        return out


class OmegaProfile:
    """Cubic-spline approximant of alpha -> omega_B(alpha) on [a0, a1].

    The transform oscillates with instantaneous frequency at most
    4 pi sqrt(X) in alpha, so a uniform sample step h has interpolation
    error ~ (h * 4 pi sqrt(X))^4 / 384 relative to the local envelope;
    ``tol`` fixes h accordingly. Sampling the profile once makes the cost
    of an n-sum independent of its length; a splined kernel (see
    _KernelTable) makes the sampling itself cheap.
    """

    def __init__(self, kind, w, alpha_min, alpha_max, tol=1e-7):
        kind = as_kind(kind)
        if abs(kind.constant.imag) > 0:
            raise ValueError("profiles require a real transform constant")
        freq = 4.0 * math.pi * math.sqrt(w.X)
        h = (384.0 * tol) ** 0.25 / freq
        a0 = min(alpha_min, h)
        self.zero_above = None
        if kind.tag == "K":
            # The exponential kernel is numerically zero past the e^{-60}
            # argument; sample up to there and return 0 beyond.
            dead = 60.0 / (4.0 * math.pi * math.sqrt(w.H))
            if alpha_max > dead:
                self.zero_above = max(dead, 2.0 * a0)
        a_hi = self.zero_above if self.zero_above is not None else alpha_max
        n = max(8, int(math.ceil((a_hi - a0) / h)) + 1)
        grid = np.linspace(a0, a_hi, n)
        if kind.tag == "K":
            vals = omega_grid(kind, grid, w, order=16, half_periods=4).real
        else:
            us, wts = _osc_rule(w, alpha_max, 16, half_periods=4)
            ktab = _KernelTable(kind, 4.0 * math.pi * a0 * float(us.min()),
                                4.0 * math.pi * alpha_max * float(us.max()),
                                tol=min(1e-10, tol * 1e-3))
            vals = np.empty(n)
            chunk = max(1, int(4_000_000 / len(us)))
            for i in range(0, n, chunk):
                args = 4.0 * math.pi * np.multiply.outer(grid[i:i + chunk], us)
                vals[i:i + chunk] = ktab(args) @ wts
            vals *= kind.constant.real
        self.kind = kind
        self.alpha_min = a0
        self.alpha_max = alpha_max
        self.tol = tol
        self._spline = CubicSpline(grid, vals)

    def __call__(self, alphas):
        alphas = np.asarray(alphas, dtype=float)
        if alphas.size and (alphas.min() < self.alpha_min * (1 - 1e-12)
                            or alphas.max() > self.alpha_max * (1 + 1e-12)):
            raise ValueError("alpha outside profiled range [%g, %g]"
                             % (self.alpha_min, self.alpha_max))
        if self.zero_above is not None:
            out = np.zeros(alphas.shape)
            live = alphas <= self.zero_above
            out[live] = self._spline(np.clip(alphas[live], self.alpha_min,
                                             self.zero_above))
            return out
        return self._spline(np.clip(alphas, self.alpha_min, self.alpha_max))


_PROFILE_CACHE = {}
_PROFILE_LOCK = threading.Lock()


def _profile(kind, w, alpha_min, alpha_max, tol):
    kind = as_kind(kind)
    key = (kind.tag, kind.k, w.H, w.X, round(alpha_min, 12),
           round(alpha_max, 12), tol)
    with _PROFILE_LOCK:
        prof = _PROFILE_CACHE.get(key)
    if prof is None:
        prof = OmegaProfile(kind, w, alpha_min, alpha_max, tol)
        with _PROFILE_LOCK:
            _PROFILE_CACHE[key] = prof
    return prof


# ---------------------------------------------------------------------------
# Smooth diagonal main terms
# ---------------------------------------------------------------------------

#: The n-sum of MT truncates once sqrt(n)/r exceeds sqrt(X)/H by this factor;
#: beyond that the transforms decay super-polynomially.
CUT_FACTOR = 8.0


def diag_cutoff(kind, r, w, n_max, cut_factor=CUT_FACTOR, min_terms=1):
    """Truncation index for sum_n c(n)^2 omega_B(sqrt(n)/r)^2.

    Polynomial-phase kinds (J, Y) decay once n >> r^2 X / H^2; the K kernel
    dies exponentially, at argument scale 4 pi alpha sqrt(H). ``min_terms``
    pads short sums for exact-identity checks at scales where the critical
    index r^2 X / H^2 is tiny but the decay constants are not.
    """
    kind = as_kind(kind)
    n_crit = r * r * w.X / w.H ** 2
    cut = max(int(math.ceil(cut_factor * n_crit)), int(min_terms))
    if kind.tag == "K":
        alpha_cut = 60.0 / (4.0 * math.pi * math.sqrt(w.H))
        cut = min(cut, int(math.ceil((alpha_cut * r) ** 2)))
    return max(1, min(int(n_max), cut))


def _diag_sum(kind, coeff_sq, r, w, n_hi, profile):
    """sum_{n <= n_hi} coeff_sq[n] * omega_B(sqrt(n)/r)^2."""
    ns = np.arange(1, n_hi + 1, dtype=float)
    alphas = np.sqrt(ns) / r
    if profile is None or n_hi <= 512:
        om = omega_grid(kind, alphas, w).real
    else:
        om = profile(alphas)
    return float(np.dot(np.asarray(coeff_sq[1:n_hi + 1], dtype=float), om * om))


def _shared_profile(kind, w, cuts, quad_tol):
    """One profile spanning every long n-sum's alpha range (short sums go
    through the direct quadrature, so only n_hi > 512 ranges count)."""
    long_cuts = [(r, n_hi) for r, n_hi in cuts if n_hi > 512]
    if not long_cuts:
        return None
    lo = min(1.0 / r for r, _ in long_cuts)
    hi = max(math.sqrt(n_hi) / r for r, n_hi in long_cuts)
    return _profile(kind, w, lo, hi, quad_tol)


def mt_smooth_cusp(X, q, w, table, quad_tol=1e-7, cut_factor=CUT_FACTOR,
                   min_terms=1):
    """Smooth diagonal main term MT(X, q) of the cusp-form variance.

    MT(X, q) = (1/q) sum_{r | q} (phi(r)/r^2) sum_n a(n)^2 omega_J(sqrt(n)/r)^2,
    each n-sum truncated at diag_cutoff; grows like c X with c the mean
    square of the coefficients.

    Args:
        X: scale; w.X must equal X.
        q: modulus >= 1.
        w: SmoothWeight (default_weight(X, q) if None).
        table: HeckeTable covering the truncated n-sums.
        quad_tol: target relative accuracy of the transform profile.

    Raises:
        ValueError: if the table is too short for the r = q cutoff.
    """
    if w is None:
        w = default_weight(X, q, "cusp")
    if abs(w.X - X) > 1e-9 * X:
        raise ValueError("weight has X=%g, expected %g" % (w.X, X))
    kind = as_kind("J", table.k)
    a_sq = np.asarray(table.a_norm) ** 2
    cuts = []
    for r in divisors(int(q)):
        n_hi = diag_cutoff(kind, r, w, table.n_max, cut_factor, min_terms)
        if n_hi == table.n_max and _cut_truncated(kind, r, w, cut_factor,
                                                  table.n_max):
            raise ValueError(
                "table n_max=%d too short for r=%d (need %d)"
                % (table.n_max, r, diag_cutoff(kind, r, w, 10 ** 18,
                                               cut_factor)))
        cuts.append((r, n_hi))
    profile = _shared_profile(kind, w, cuts, quad_tol)
    total = sum(euler_phi(r) / r ** 2 * _diag_sum(kind, a_sq, r, w, n_hi,
                                                  profile)
                for r, n_hi in cuts)
    return total / q


def _cut_truncated(kind, r, w, cut_factor, n_max):
    return diag_cutoff(kind, r, w, 10 ** 18, cut_factor) > n_max


def mt_smooth_divisor(X, q, kind, w, tables, quad_tol=1e-7,
                      cut_factor=CUT_FACTOR, min_terms=1):
    """Smooth diagonal main term MT(X, q, B) of the divisor variance.

    Returns (value, fitted_cubic): the r-sum value, and the least-squares
    cubic fitted to y_r = S_r / (r^2 X) against t_r = log(r^2 / X), where
    S_r = sum_n tau(n)^2 omega_B(sqrt(n)/r)^2. Coefficients are reported
    highest degree first; None when q has fewer than five divisors.
    """
    if w is None:
        w = default_weight(X, q, "divisor")
    if abs(w.X - X) > 1e-9 * X:
        raise ValueError("weight has X=%g, expected %g" % (w.X, X))
    kind = as_kind(kind)
    if kind.tag not in ("Y", "K"):
        raise ValueError("divisor kind must be 'Y' or 'K', got %r" % kind.tag)
    tau_sq = tables.tau.astype(float) ** 2
    rs = divisors(int(q), tables)
    cuts = []
    for r in rs:
        n_hi = diag_cutoff(kind, r, w, tables.n_max, cut_factor, min_terms)
        if n_hi == tables.n_max and _cut_truncated(kind, r, w, cut_factor,
                                                   tables.n_max):
            raise ValueError(
                "tables n_max=%d too short for r=%d" % (tables.n_max, r))
        cuts.append((r, n_hi))
    profile = _shared_profile(kind, w, cuts, quad_tol)
    s_vals = []
    total = 0.0
    for r, n_hi in cuts:
        s_r = _diag_sum(kind, tau_sq, r, w, n_hi, profile)
        s_vals.append(s_r)
        total += euler_phi(r, tables) / r ** 2 * s_r
    fitted = None
    if len(rs) >= 5:
        ts = np.array([math.log(r * r / X) for r in rs])
        ys = np.array([s / (r * r * X) for r, s in zip(rs, s_vals)])
        fitted = np.polyfit(ts, ys, 3)
    return total / q, fitted


# ---------------------------------------------------------------------------
# Regime comparator
# ---------------------------------------------------------------------------

def default_weight(X, q, sequence="cusp"):
    """Smooth weight with the variance-optimised plateau width.

    H = (1/3) max(q^{16/27} X^{10/27}, q) for the cusp sequence and
    H = (1/3) max(q^{5/9} X^{7/18}, q)  for the divisor sequence, floored
    at X^{3/5} (the smooth/sharp transfer needs that much room) and kept
    below X/3 so the plateau is nonempty.
    """
    X, q = float(X), float(q)
    if sequence == "cusp":
        h = max(q ** (16.0 / 27.0) * X ** (10.0 / 27.0), q) / 3.0
    elif sequence == "divisor":
        h = max(q ** (5.0 / 9.0) * X ** (7.0 / 18.0), q) / 3.0
    else:
        raise ValueError("sequence must be 'cusp' or 'divisor', got %r"
                         % (sequence,))
    h = max(h, X ** 0.6)
    h = min(h, X / 3.000001)
    return SmoothWeight(H=h, X=X)


def error_budget(X, q, sequence="cusp", tables=None):
    """Named error-budget monomials for the variance asymptotics.

    Cusp:    q^{-1} X^{3/2} g(q),  q^{5/54} X^{47/54},  q^{1/2} X^{1/2}.
    Divisor: the same leading term plus the q^{1/2} X^{1/2} tau(q) log^4 X,
             q^{1/4} X^{3/4} (log^3 X + log^{5/2} X tau(q)) and
             q^{5/36} X^{61/72} terms.
    """
    X, qf = float(X), float(q)
    lx = math.log(X)
    lead = ("q^-1 X^3/2 g(q)", X ** 1.5 * g_of(int(q), tables) / qf)
    if sequence == "cusp":
        return [lead,
                ("q^5/54 X^47/54", qf ** (5.0 / 54.0) * X ** (47.0 / 54.0)),
                ("q^1/2 X^1/2", math.sqrt(qf * X))]
    tau_q = len(divisors(int(q), tables))
    return [lead,
            ("q^1/2 X^1/2 tau(q) log^4 X",
             math.sqrt(qf * X) * tau_q * lx ** 4),
            ("q^1/4 X^3/4 (log^3 X + log^5/2 X tau(q))",
             qf ** 0.25 * X ** 0.75 * (lx ** 3 + lx ** 2.5 * tau_q)),
            ("q^5/36 X^61/72", qf ** (5.0 / 36.0) * X ** (61.0 / 72.0))]


def regime_label(X, q):
    """Size regime of q relative to X^{1/4} and X^{1/2}."""
    if q > X:
        return "q>X"
    if q > math.sqrt(X):
        return "X^1/2<q<=X"
    if q > X ** 0.25:
        return "X^1/4<q<=X^1/2"
    return "q<=X^1/4"


@dataclass(frozen=True)
class VarianceReport:
    """Exact variance vs its prediction with the error budget."""

    X: float
    q: int
    H: float
    sequence: str
    exact: float
    prediction: float
    error_budget: tuple  # ((name, value), ...)
    ratio: float
    regime: str
    dominant: str


def _default_c_hat(table):
    hi = table.n_max
    lo = max(1000, hi // 100)
    grid = np.unique(np.geomspace(lo, hi, 12).astype(int))
    return estimate_rankin_residue(grid, table)[0]


def regime_report(X, q, table=None, tables=None, sequence="cusp",
                  c_hat=None, quad_tol=1e-7):
    """Exact variance against its predicted size, with budget and regime.

    For the cusp sequence the prediction is c_hat * X (c_hat estimated from
    the table when not supplied); for the divisor sequence it is the smooth
    diagonal aggregate MT(X, q, Y) + MT(X, q, K). The ratio is
    |exact - prediction| / (sum of budget terms).
    """
    X, q = float(X), int(q)
    if not 1 <= q:
        raise ValueError("q must be >= 1, got %d" % q)
    w = default_weight(X, q, sequence)
    if sequence == "cusp":
        if table is None:
            raise ValueError("cusp sequence needs a HeckeTable")
        exact = variance_cusp_exact(X, q, table)
        if c_hat is None:
            c_hat = _default_c_hat(table)
        prediction = c_hat * X
    elif sequence == "divisor":
        if tables is None:
            raise ValueError("divisor sequence needs ArithTables")
        exact = variance_divisor_exact(X, q, tables)
        prediction = (mt_smooth_divisor(X, q, "Y", w, tables, quad_tol)[0]
                      + mt_smooth_divisor(X, q, "K", w, tables, quad_tol)[0])
    else:
        raise ValueError("sequence must be 'cusp' or 'divisor', got %r"
                         % (sequence,))
    budget = error_budget(X, q, sequence, tables)
    total = sum(v for _, v in budget)
    dominant = max(budget, key=lambda item: item[1])[0]
    return VarianceReport(
        X=X, q=q, H=w.H, sequence=sequence, exact=exact,
        prediction=prediction, error_budget=tuple(budget),
        ratio=abs(exact - prediction) / total, regime=regime_label(X, q),
        dominant=dominant)
