"""MINMAXVAR distortions, distorted expectations and performance measures."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bg_core import GainLossMoments
from .errors import ConvergenceError, ValidationError

INDEX_CAP = 10.0
INDEX_TOL = 1e-6
SIDES = ("lower", "upper")


@dataclass(frozen=True)
class MinMaxVar:
    """``psi(u) = 1 - (1 - u^(1/(1+gamma)))^(1+gamma)``; concave on [0, 1]."""

    gamma: float

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValidationError("MINMAXVAR stress level must be >= 0")


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise ValidationError("distortions are defined on [0, 1]")
    return u


def psi(d: MinMaxVar, u):
    u = _check_unit(u)
    g = 1.0 + d.gamma
    out = 1.0 - (1.0 - u ** (1.0 / g)) ** g
    return float(out) if out.ndim == 0 else out


def psi_dual(d: MinMaxVar, u):
    """Convex dual ``1 - psi(1 - u)``."""
    u = _check_unit(u)
    g = 1.0 + d.gamma
    out = (1.0 - (1.0 - u) ** (1.0 / g)) ** g
    return float(out) if out.ndim == 0 else out


def _check_side(side):
    if side not in SIDES:
        raise ValidationError(f"side must be one of {SIDES}, got {side!r}")


def rank_weights(n, d: MinMaxVar, side):
    """Weights ``D(i/n) - D((i-1)/n)`` for ranks ``i = 1..n`` (ascending).

    ``D`` is psi for the lower side and its dual for the upper side.
    """
    _check_side(side)
    q = np.arange(n + 1) / n
    cum = psi(d, q) if side == "lower" else psi_dual(d, q)
    return np.diff(cum)


def distorted_expectation(sample, d: MinMaxVar, side="lower"):
    """Ordered-sample estimate of the distorted expectation.

    ``sum_i x_(i) [D(i/n) - D((i-1)/n)]``; ties are broken by a stable sort.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("sample must be nonempty")
    ordered = np.sort(x, kind="stable")
    return float(np.dot(ordered, rank_weights(x.size, d, side)))


def choquet_integral(tail_pos, tail_neg, d: MinMaxVar, side="upper"):
    """Choquet integral of a law given its tail functions.

    ``tail_pos(a) = P(X+ >= a)`` and ``tail_neg(a) = P(X- >= a)`` for
    ``a > 0``. With ``side="upper"`` this is
    ``int psi(tail_pos) da - int psi_dual(tail_neg) da``, which inflates
    gains and shrinks losses. ``side="lower"`` swaps the two distortions and
    reproduces ``distorted_expectation(..., side="lower")`` in the limit.
    """
    _check_side(side)
    on_gain, on_loss = (psi, psi_dual) if side == "upper" else (psi_dual, psi)

    def integrate_tail(tail, distortion):
        f = lambda a: distortion(d, min(1.0, max(0.0, float(tail(a)))))  # noqa: E731
        val, err, *rest = integrate.quad(f, 0.0, np.inf, limit=400, epsabs=1e-11, full_output=1)
        if len(rest) > 1 and err > 1e-7:
            raise ConvergenceError(f"Choquet quadrature failed: {rest[1]}")
        return val

    return integrate_tail(tail_pos, on_gain) - integrate_tail(tail_neg, on_loss)


def sharpe_ratio(m: GainLossMoments, t=250):
    """``(mu_p - mu_n) sqrt(t) / sqrt(sigma_p^2 + sigma_n^2)``."""
    var = m.sigma_p**2 + m.sigma_n**2
    if not var > 0:
        raise ValidationError("Sharpe ratio undefined with zero variance")
    return (m.mu_p - m.mu_n) * math.sqrt(t) / math.sqrt(var)


def acceptability_index(sample, position="long", cap=INDEX_CAP, tol=INDEX_TOL):
    """Largest MINMAXVAR stress keeping the lower distorted expectation >= 0.

    Short positions use the negated sample. Returns 0 when even the plain
    mean is negative and ``cap`` when every stress level is acceptable.
    """
    if position not in ("long", "short"):
        raise ValidationError("position must be 'long' or 'short'")
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("sample must be nonempty")
    if position == "short":
        x = -x
    ordered = np.sort(x, kind="stable")

    def acceptable(g):
        return float(np.dot(ordered, rank_weights(x.size, MinMaxVar(g), "lower"))) >= 0.0

    if not acceptable(0.0):
        return 0.0
    if acceptable(cap):
        return cap
    lo, hi = 0.0, cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if acceptable(mid):
            lo = mid
        else:
            hi = mid
    return lo
