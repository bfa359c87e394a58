"""Risk-neutral acceptance conditions for bilateral gamma Levy measures.

A perturbed gain scale ``b`` against the reference ``b_hat`` changes the
Levy measure by the density ratio ``exp(x (b - b_hat) / (b b_hat))`` on
``x > 0``. Membership in the acceptance set compares the excess mass
functions ``S`` (for ``b > b_hat``) and ``S~`` (for ``b < b_hat``) with the
Fenchel conjugates of the measure distortions ``G+`` and ``G-``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import expit, xlogy

from .bg_core import BGParams
from .errors import ConvergenceError, DivergenceError, HypothesisError, ValidationError
from .expint import exp1

LOWER_HYPOTHESIS = 0.55
UPPER_LAMBDA_MAX = 50.0
GRID_POINTS = 2000
GRID_EDGE = 1e-6
KAPPA_FLOOR = 1e-6
KAPPA_RTOL = 1e-6
U_TOL = 1e-12


@dataclass(frozen=True)
class LevyDistortionPair:
    """Frequency stress ``c`` and tail stress ``gamma`` of ``G+`` / ``G-``."""

    c: float
    gamma: float

    def __post_init__(self):
        for name in ("c", "gamma"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be positive and finite")


@dataclass(frozen=True)
class ScaleInterval:
    b_hat: float
    b_low: float
    b_high: float
    c_p: float

    def __post_init__(self):
        if not (0 < self.b_low <= self.b_hat <= self.b_high < 1):
            raise ValidationError("need 0 < b_low <= b_hat <= b_high < 1")
        if not (self.c_p > 0 and math.isfinite(self.c_p)):
            raise ValidationError("c_p must be positive")


# ---------------------------------------------------------------- distortions


def _nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValidationError("measure distortions act on x >= 0")
    return x


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def g_plus(d: LevyDistortionPair, x):
    """``x + (1/c) (1 - exp(-c x))^(1/(1+gamma))``; infinite at infinite mass."""
    x = _nonneg(x)
    return _out(x + (-np.expm1(-d.c * x)) ** (1.0 / (1.0 + d.gamma)) / d.c)


def g_minus(d: LevyDistortionPair, x):
    """``x - (1/c) (1 - exp(-c x))``."""
    x = _nonneg(x)
    return _out(x + np.expm1(-d.c * x) / d.c)


def _gain_tail(p, a):
    # nu(e^x - 1 > a) = c_p E1(log(1+a)/b_p)
    return p.c_p * exp1(math.log1p(a) / p.b_p)


def _loss_tail(p, a):
    # nu(e^x - 1 < -a) = c_n E1(-log(1-a)/b_n), empty for a >= 1
    if a >= 1.0:
        return 0.0
    return p.c_n * exp1(-math.log1p(-a) / p.b_n)


def _tail_integral(f, upper):
    total, err = 0.0, 0.0
    pieces = [(0.0, 1.0)] + ([(1.0, np.inf)] if upper else [])
    for a, b in pieces:
        val, e, *rest = integrate.quad(f, a, b, limit=400, epsabs=1e-12, epsrel=1e-10, full_output=1)
        if len(rest) > 1 and e > 1e-8 * max(1.0, abs(val)):
            raise ConvergenceError(f"distorted reward quadrature failed: {rest[1]}")
        total += val
        err += e
    return total


def distorted_reward_bounds(p: BGParams, omega, d: LevyDistortionPair):
    """Lower and upper distorted rewards of ``omega t + X_t`` per unit time.

    ``lower = omega - int G+(nu(e^x-1 < -a)) da + int G-(nu(e^x-1 > a)) da``
    and ``upper`` swaps ``G+`` and ``G-``. Tails come from the closed form
    of the bilateral gamma Levy measure. The gain-side integrals need
    ``b_p < 1`` (``DivergenceError`` otherwise); ``G+`` of the gain tail
    also needs ``b_p (1 + gamma) < 1`` and the upper bound is ``inf`` past it.
    """
    if p.b_p >= 1.0:
        raise DivergenceError("distorted rewards diverge for b_p >= 1")
    loss_plus = _tail_integral(lambda a: g_plus(d, _loss_tail(p, a)), upper=False)
    loss_minus = _tail_integral(lambda a: g_minus(d, _loss_tail(p, a)), upper=False)
    gain_minus = _tail_integral(lambda a: g_minus(d, _gain_tail(p, a)), upper=True)
    if p.b_p * (1.0 + d.gamma) >= 1.0:
        gain_plus = math.inf
    else:
        gain_plus = _tail_integral(lambda a: g_plus(d, _gain_tail(p, a)), upper=True)
    lower = omega - loss_plus + gain_minus
    upper = omega - loss_minus + gain_plus
    return lower, upper


# ---------------------------------------------------------------- boundary equations


def valuation_bounds_over_interval(iv: ScaleInterval):
    """Inf and sup over ``b_p`` in the interval of the one-dollar claim value."""
    lo = ((1.0 - iv.b_hat) / (1.0 - iv.b_low)) ** iv.c_p
    hi = ((1.0 - iv.b_hat) / (1.0 - iv.b_high)) ** iv.c_p
    return lo, hi


def solve_upper_scale(b_low, ratio, c_p):
    """``b_high`` with ``((1 - b_high) / (1 - b_low))^c_p = ratio``."""
    if not 0 < b_low < 1:
        raise ValidationError("b_low must lie in (0, 1)")
    if not 0 < ratio <= 1:
        raise ValidationError("ratio must lie in (0, 1]")
    if not c_p > 0:
        raise ValidationError("c_p must be positive")
    b_high = 1.0 - ratio ** (1.0 / c_p) * (1.0 - b_low)
    if not 0 < b_high < 1:
        raise ValidationError(f"implied b_high = {b_high} is outside (0, 1)")
    return b_high


def two_sided_boundary_residual(b_bounds_p, b_bounds_n, c_p, c_n, ratio):
    """``ratio`` minus the two-sided product of gain and loss valuation factors."""
    bp_low, bp_high = b_bounds_p
    bn_low, bn_high = b_bounds_n
    for b in (bp_low, bp_high, bn_low, bn_high):
        if not 0 < b < 1:
            raise ValidationError("scale bounds must lie in (0, 1)")
    gain = ((1.0 - bp_high) / (1.0 - bp_low)) ** c_p
    loss = ((1.0 + bn_low) / (1.0 + bn_high)) ** c_n
    return ratio - gain * loss


# ---------------------------------------------------------------- conjugates


def _solve_logit(lam, gamma):
    """Logit ``s = log(u / (1-u))`` of the implicit ``u(lambda)``, vectorised bisection."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 1) or np.any(np.isnan(lam)):
        raise ValidationError("u(lambda) needs lambda > 1")
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    k = gamma / (1.0 + gamma)
    target = np.log((lam - 1.0) * (1.0 + gamma))

    def resid(s):
        # log u - k log(1-u) - target, increasing in s
        return -np.logaddexp(0.0, -s) + k * np.logaddexp(0.0, s) - target

    # for large s the residual grows like k s - target, so small gamma needs a wide bracket
    lo = np.full(lam.shape, -800.0)
    hi = np.maximum(800.0, 2.0 * np.abs(target) / k + 50.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        lo = np.where(r < 0, mid, lo)
        hi = np.where(r > 0, mid, hi)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(mid))):
            break
    s = 0.5 * (lo + hi)
    if np.any(np.abs(resid(s)) > U_TOL):
        raise ConvergenceError("u(lambda) bisection missed the residual tolerance")
    return s


def solve_u(lam, gamma):
    """Unique ``u`` in (0, 1) with ``u / (1-u)^(gamma/(1+gamma)) = (lambda-1)(1+gamma)``."""
    return _out(expit(_solve_logit(lam, gamma)))


def _phi_unit(lam, gamma):
    # c * Phi(lambda), evaluated through the logit for accuracy near u = 0 and u = 1
    s = _solve_logit(lam, gamma)
    log_u = -np.logaddexp(0.0, -s)
    one_minus_u = expit(-s)
    return (np.asarray(lam) - 1.0) * log_u + one_minus_u ** (1.0 / (1.0 + gamma))


def phi_conj(lam, d: LevyDistortionPair):
    """``Phi(lambda) = (1/c)[-(1-lambda) log u + (1-u)^(1/(1+gamma))]`` for lambda > 1.

    Decreases from ``1/c`` at ``lambda = 1+`` to 0; ``Phi' = log(u)/c``.
    """
    return _out(_phi_unit(lam, d.gamma) / d.c)


def phi_tilde_conj(lam, d: LevyDistortionPair):
    """``-Phi~(lambda) = (1/c)[lambda + (1-lambda) log(1-lambda)]`` on [0, 1)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam >= 1) or np.any(np.isnan(lam)):
        raise ValidationError("-Phi~ is defined for 0 <= lambda < 1")
    return _out((lam + xlogy(1.0 - lam, 1.0 - lam)) / d.c)


# ---------------------------------------------------------------- excess mass


def excess_mass_upper(b_hat, b, c_p, lam):
    """``int (dnu_b/dnu_hat - lambda)^+ dnu_hat`` for ``b > b_hat`` and lambda > 1.

    Equals ``c_p (E1(L/b) - lambda E1(L/b_hat))`` with
    ``L = log(lambda) b b_hat / (b - b_hat)``.
    """
    if not b > b_hat:
        raise ValidationError("upper excess mass needs b > b_hat")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 1):
        raise ValidationError("closed form is singular at lambda = 1; use the Frullani limit")
    L = np.log(lam) * b * b_hat / (b - b_hat)
    return _out(np.maximum(c_p * (exp1(L / b) - lam * exp1(L / b_hat)), 0.0))


def excess_mass_lower(b_hat, b, c_p, lam):
    """``int (lambda - dnu_b/dnu_hat)^+ dnu_hat`` for ``b < b_hat`` and 0 <= lambda < 1.

    Equals ``c_p (lambda E1(L~/b_hat) - E1(L~/b))`` with
    ``L~ = -log(lambda) b_hat b / (b_hat - b)``; zero at lambda = 0.
    """
    if not b < b_hat:
        raise ValidationError("lower excess mass needs b < b_hat")
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam >= 1):
        raise ValidationError("closed form needs 0 <= lambda < 1; use the Frullani limit at 1")
    out = np.zeros(lam.shape)
    pos = lam > 0
    L = -np.log(lam[pos]) * b_hat * b / (b_hat - b)
    out[pos] = c_p * (lam[pos] * exp1(L / b_hat) - exp1(L / b))
    return _out(np.maximum(out, 0.0))


def s_lambda(iv: ScaleInterval, lam):
    """``S(lambda)`` for the upper end ``b_high`` of the interval."""
    return excess_mass_upper(iv.b_hat, iv.b_high, iv.c_p, lam)


def s_tilde_lambda(iv: ScaleInterval, lam):
    """``S~(lambda)`` for the lower end ``b_low`` of the interval."""
    return excess_mass_lower(iv.b_hat, iv.b_low, iv.c_p, lam)


def s_lambda_limit(iv: ScaleInterval):
    """Frullani value of ``S`` at ``lambda -> 1+``: ``c_p log(b_high / b_hat)``."""
    return iv.c_p * math.log(iv.b_high / iv.b_hat)


def s_tilde_lambda_limit(iv: ScaleInterval):
    """Frullani value of ``S~`` at ``lambda -> 1-``: ``c_p log(b_hat / b_low)``."""
    return iv.c_p * math.log(iv.b_hat / iv.b_low)


# ---------------------------------------------------------------- lemma conditions


def condition_lower_max_c(iv: ScaleInterval):
    """Largest ``c`` admitting every ``b`` in ``[b_low, b_hat]``: ``1 / S~(1-)``."""
    if not iv.b_low > LOWER_HYPOTHESIS * iv.b_hat:
        raise HypothesisError(
            f"lower-side condition requires b_low > {LOWER_HYPOTHESIS} b_hat "
            f"(b_low={iv.b_low}, b_hat={iv.b_hat})"
        )
    limit = s_tilde_lambda_limit(iv)
    return math.inf if limit == 0 else 1.0 / limit


def gamma_tilde(iv: ScaleInterval):
    return (iv.b_high - iv.b_hat) / iv.b_hat


def c_tilde(iv: ScaleInterval):
    return min(condition_lower_max_c(iv), 1.0 / iv.c_p)


def upper_grid():
    return 1.0 + np.geomspace(GRID_EDGE, UPPER_LAMBDA_MAX - 1.0, GRID_POINTS)


def lower_grid():
    half = GRID_POINTS // 2
    edge = np.geomspace(GRID_EDGE, 0.5, half)
    return np.unique(np.concatenate([edge, 1.0 - edge]))


def _upper_ratio(iv, b, gamma):
    # min over the grid of (c Phi) / S; membership on the grid iff c <= this
    lam = upper_grid()
    s = excess_mass_upper(iv.b_hat, b, iv.c_p, lam)
    phi1 = _phi_unit(lam, gamma)
    with np.errstate(divide="ignore"):
        ratios = np.where(s > 0, phi1 / np.where(s > 0, s, 1.0), np.inf)
    return float(np.min(ratios))


def _lower_ratio(iv, b):
    lam = lower_grid()
    s = excess_mass_lower(iv.b_hat, b, iv.c_p, lam)
    phi1 = lam + xlogy(1.0 - lam, 1.0 - lam)
    with np.errstate(divide="ignore"):
        ratios = np.where(s > 0, phi1 / np.where(s > 0, s, 1.0), np.inf)
    return float(np.min(ratios))


def tail_condition(iv: ScaleInterval, b, gamma):
    """Decay exponents beyond the grid: ``2 + 1/gamma < b/(b - b_hat) + 1``."""
    if b <= iv.b_hat:
        return True
    return gamma > (b - iv.b_hat) / iv.b_hat


def check_membership(iv: ScaleInterval, b, d: LevyDistortionPair) -> bool:
    """Is the measure with gain scale ``b`` in the acceptance set?

    For ``b > b_hat``: ``S(lambda) <= Phi(lambda)`` on the upper grid in
    (1, 50] plus the decay-exponent test for the tail. For ``b < b_hat``:
    ``S~(lambda) <= -Phi~(lambda)`` on the lower grid in [1e-6, 1-1e-6].
    """
    if not iv.b_low <= b <= iv.b_high:
        raise ValidationError("b must lie in [b_low, b_high]")
    if b == iv.b_hat:
        return True
    if b > iv.b_hat:
        return tail_condition(iv, b, d.gamma) and d.c <= _upper_ratio(iv, b, d.gamma)
    return d.c <= _lower_ratio(iv, b)


def kappa_p(iv: ScaleInterval, gamma):
    """Largest ``c`` in (0, c~] keeping ``b_high`` acceptable at tail stress ``gamma``.

    Bisection on ``c`` to relative width 1e-6 over the bracket (1e-6, c~].
    """
    gt = gamma_tilde(iv)
    if not gamma > gt:
        raise HypothesisError(f"gamma={gamma} must exceed gamma_tilde={gt}")
    ct = c_tilde(iv)
    # Phi and S do not depend on c; evaluate the grid once and bisect on c.
    ratio = _upper_ratio(iv, iv.b_high, gamma) if iv.b_high > iv.b_hat else math.inf

    def member(c):
        return c <= ratio

    if member(ct):
        return ct
    lo, hi = KAPPA_FLOOR, ct
    if not member(lo):
        raise ConvergenceError("membership fails even at c = 1e-6")
    while hi - lo > KAPPA_RTOL * lo:
        mid = 0.5 * (lo + hi)
        if member(mid):
            lo = mid
        else:
            hi = mid
    return lo
