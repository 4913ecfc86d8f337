"""Exact coefficients of the discriminant form and the mean-square residue fit.

The weight-12 level-1 form has q-expansion q prod_{m>=1} (1 - q^m)^24 with
integer coefficients tau(n); the normalised eigenvalues a(n) = tau(n)/n^{11/2}
satisfy the Hecke relations and |a(n)| <= tau_divisor(n).
"""

from dataclasses import dataclass, field

import numpy as np

from apvar import _core

#: Default table length and hard capacity for exact coefficients.
DEFAULT_N_MAX = 200_000
COEFF_CAP = 1_000_000


def delta_coefficients_exact(n_max):
    """Exact integer coefficients tau(1..n_max) of q prod (1-q^m)^24.

    Computed through the sparse cube representation of the eta quotient and
    repeated overflow-checked integer convolutions; any coefficient leaving
    the signed 128-bit range raises OverflowError naming the offending index.

    Returns:
        list of length n_max + 1, entry 0 unused (zero), entry n = tau(n).
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1, got %d" % n_max)
    if n_max > COEFF_CAP:
        raise ValueError(
            "n_max=%d exceeds the coefficient capacity %d" % (n_max, COEFF_CAP))
    lo, hi = _core.delta_tau_parts(n_max)
    shift = 1 << 64
    return [int(h) * shift + int(l) for h, l in zip(hi.tolist(), lo.tolist())]


def hecke_normalized(tau_exact, k=12):
    """Normalised coefficients a(n) = tau(n) / n^{(k-1)/2} as float64.

    Args:
        tau_exact: exact integer sequence with tau_exact[n] = tau(n).
        k: even weight >= 4 (default 12).
    """
    if k % 2 != 0 or k < 4:
        raise ValueError("weight k must be even and >= 4, got %r" % (k,))
    n_max = len(tau_exact) - 1
    a = np.zeros(n_max + 1)
    idx = np.arange(n_max + 1, dtype=float)
    idx[0] = 1.0
    # float(tau) is exact to one rounding since tau(n) < 2^127.
    a[1:] = np.array([float(t) for t in tau_exact[1:]]) / idx[1:] ** ((k - 1) / 2)
    return a


@dataclass(frozen=True)
class HeckeTable:
    """Exact tau values plus their Deligne-normalised doubles."""

    n_max: int
    k: int
    tau_exact: list
    a_norm: np.ndarray
    _a_sq_cumsum: np.ndarray = field(repr=False, default=None)

    def rankin_cumsum(self):
        """Cumulative sums of a(n)^2 (index x -> sum_{n<=x} a(n)^2)."""
        if self._a_sq_cumsum is None:
            object.__setattr__(self, "_a_sq_cumsum", np.cumsum(self.a_norm ** 2))
        return self._a_sq_cumsum


def build_hecke_table(n_max=DEFAULT_N_MAX, k=12):
    """Construct the exact/normalised coefficient table for the weight-k form.

    Only k = 12 has exact integer data; the weight enters the normalisation
    exponent (other even weights are exercised in the transform kernels, not
    here).
    """
    if k != 12:
        raise ValueError("exact coefficients are tabulated for k=12 only")
    tau_exact = delta_coefficients_exact(n_max)
    return HeckeTable(n_max=n_max, k=k, tau_exact=tau_exact,
                      a_norm=hecke_normalized(tau_exact, k))


def rankin_partial_sum(x, table):
    """Exact partial sum sum_{n <= x} a(n)^2."""
    if x > table.n_max:
        raise ValueError("x=%r beyond table n_max=%d" % (x, table.n_max))
    m = int(np.floor(x))
    if m < 1:
        return 0.0
    return float(table.rankin_cumsum()[m])


@dataclass(frozen=True)
class ResidualReport:
    """Diagnostics from the residue fit."""

    x_grid: np.ndarray
    partial_sums: np.ndarray
    residuals: np.ndarray        # S(x) - c_hat * x
    scaled_residuals: np.ndarray  # residuals / x
    max_scaled_residual: float


def estimate_rankin_residue(x_grid, table):
    """Least-squares slope of the a(n)^2 partial sums against x.

    The mean square sum_{n<=x} a(n)^2 grows like c*x with c the residue of
    the associated convolution L-function at s = 1; that constant has no
    convenient closed form, so the slope of the partial sums is the natural
    empirical stand-in.

    Args:
        x_grid: at least five abscissae in [10^3, n_max].
        table: object exposing ``a_norm`` (HeckeTable or a test double).

    Returns:
        (c_hat, ResidualReport); c_hat > 0 for any nonzero sequence.
    """
    xs = np.asarray(sorted(float(x) for x in x_grid))
    if len(xs) < 5 or len(np.unique(xs)) < 5:
        raise ValueError("need at least 5 distinct grid points")
    cumsum = np.cumsum(np.asarray(table.a_norm) ** 2)
    sums = np.array([cumsum[int(np.floor(x))] for x in xs])
    # Through-origin least squares: S(x) ~ c * x.
    c_hat = float(np.dot(sums, xs) / np.dot(xs, xs))
    residuals = sums - c_hat * xs
    scaled = residuals / xs
    return c_hat, ResidualReport(
        x_grid=xs, partial_sums=sums, residuals=residuals,
        scaled_residuals=scaled,
        max_scaled_residual=float(np.max(np.abs(scaled))))
