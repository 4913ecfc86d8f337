"""Numerical verification of the Voronoi summation formula.

For a primitive additive character e(hn/q), the cusp-form identity reads

    sum_n a(n) e(hn/q) w(n) = (1/q) sum_n a(n) e(-hbar n/q) omega_J(sqrt(n)/q),

and for the divisor function

    sum_n tau(n) e(hn/q) w(n)
        = q^{-1} int (log x + 2 gamma - 2 log q) w(x) dx
        + (1/q) sum_n tau(n) e(-hbar n/q) omega_Y(sqrt(n)/q)
        + (1/q) sum_n tau(n) e(+hbar n/q) omega_K(sqrt(n)/q),

with hbar the inverse of h mod q. The dual sums converge fast: beyond
n ~ q^2 X H^{-2} the transforms decay super-algebraically at a rate set by
the ramp width; see default_n_cut for the truncation rule.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from apvar.specfun import (EULER_GAMMA, OmegaKind, omega_grid, _panel_nodes,
                           smooth_weight_eval)


def mod_inverse(h, q):
    """Inverse of h modulo q; requires gcd(h, q) = 1."""
    q = int(q)
    if q < 1:
        raise ValueError("modulus must be >= 1, got %d" % q)
    h = int(h) % q
    if q == 1:
        return 0
    if math.gcd(h, q) != 1:
        raise ValueError("h=%d not invertible mod q=%d" % (h, q))
    return pow(h, -1, q)


def default_n_cut(q, w):
    """Dual-sum truncation index.

    The scale rule ceil(q^2 X H^{-2} log(X)^2) captures the transition
    point, but the actual decay rate is set by the ramp width: the dual
    terms fall below 1e-9 relative only once sqrt(n)/q exceeds roughly
    log(1e9)^2 / (4 sqrt(H)). The default takes the larger of the two.
    """
    scale = q * q * w.X * w.H ** -2 * math.log(w.X) ** 2
    alpha_cut = math.log(1e9) ** 2 / (4.0 * math.sqrt(w.H))
    return int(math.ceil(max(scale, (q * alpha_cut) ** 2)))


def _phases(ns, h, q):
    """e(h n / q) for an integer array, through exact residues mod q."""
    roots = np.exp(2j * math.pi * np.arange(q) / q)
    return roots[(h % q) * (ns % q) % q]


def twisted_sum(coeffs, h, q, w):
    """sum_n c(n) e(hn/q) w(n) over the support of w (exact finite sum)."""
    n_lo = max(1, int(math.floor(w.H)) + 1)
    n_hi = min(len(coeffs) - 1, int(math.ceil(w.X)) - 1)
    ns = np.arange(n_lo, n_hi + 1)
    vals = np.asarray(coeffs[n_lo:n_hi + 1], dtype=float)
    return complex(np.sum(vals * _phases(ns, h, q) * smooth_weight_eval(ns.astype(float), w)))


def log_weight_integral(w, const):
    """int (log x + const) w(x) dx with the plateau handled in closed form."""
    H, X = w.H, w.X
    a, b = 2.0 * H, X - H

    def ilog(x):
        return x * math.log(x) - x

    total = (ilog(b) - ilog(a)) + const * (b - a)
    for lo, hi in ((H, 2 * H), (X - H, X)):
        xs, ws = _panel_nodes(lo, hi, 8, 24)
        total += float(np.dot(smooth_weight_eval(xs, w)
                              * (np.log(xs) + const), ws))
    return total


@dataclass(frozen=True)
class VoronoiReport:
    """Both sides of the identity and their discrepancy."""

    q: int
    h: int
    n_cut: int
    lhs: complex
    rhs: complex
    abs_diff: float
    rel_diff: float


def _report(q, h, n_cut, lhs, rhs):
    diff = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs))
    return VoronoiReport(q=int(q), h=int(h), n_cut=int(n_cut),
                         lhs=lhs, rhs=rhs, abs_diff=diff,
                         rel_diff=diff / scale if scale > 0 else 0.0)


def voronoi_check_cusp(q, h, table, w, n_cut=None):
    """Check the cusp-form Voronoi identity for the character e(h./q).

    Args:
        q: modulus >= 1.
        h: residue coprime to q.
        table: HeckeTable with n_max >= X.
        w: SmoothWeight (needs table coverage of [H, X]).
        n_cut: dual-sum truncation (default: the q^2 X H^{-2} log^2 rule).

    Returns:
        VoronoiReport with lhs (direct twisted sum) and rhs (dual side).
    """
    q = int(q)
    hbar = mod_inverse(h, q)
    if table.n_max < w.X:
        raise ValueError("table covers n <= %d < X = %g" % (table.n_max, w.X))
    if n_cut is None:
        n_cut = default_n_cut(q, w)
    lhs = twisted_sum(table.a_norm, h, q, w)
    ns = np.arange(1, n_cut + 1)
    omg = omega_grid(OmegaKind("J", table.k), np.sqrt(ns) / q, w)
    dual = np.asarray(table.a_norm[1:n_cut + 1]) * _phases(ns, -hbar, q) * omg
    rhs = complex(np.sum(dual)) / q
    return _report(q, h, n_cut, lhs, rhs)


def voronoi_check_divisor(q, h, tables, w, n_cut=None):
    """Check the divisor-function Voronoi identity for e(h./q).

    Same shape as the cusp check, with the logarithmic main term and the
    two dual sums against omega_Y and omega_K.
    """
    q = int(q)
    hbar = mod_inverse(h, q)
    if tables.n_max < w.X:
        raise ValueError("tables cover n <= %d < X = %g" % (tables.n_max, w.X))
    if n_cut is None:
        n_cut = default_n_cut(q, w)
    lhs = twisted_sum(tables.tau, h, q, w)
    main = log_weight_integral(w, 2.0 * EULER_GAMMA - 2.0 * math.log(q)) / q
    ns = np.arange(1, n_cut + 1)
    tau = tables.tau[1:n_cut + 1].astype(float)
    alphas = np.sqrt(ns) / q
    dual_y = tau * _phases(ns, -hbar, q) * omega_grid(OmegaKind("Y"), alphas, w)
    dual_k = tau * _phases(ns, hbar, q) * omega_grid(OmegaKind("K"), alphas, w)
    rhs = main + (complex(np.sum(dual_y)) + complex(np.sum(dual_k))) / q
    return _report(q, h, n_cut, lhs, rhs)
