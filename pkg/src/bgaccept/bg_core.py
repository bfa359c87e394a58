"""Bilateral gamma distribution primitives.

A bilateral gamma variable is ``X = G - L`` with independent gamma laws
``G ~ Gamma(shape=c_p, scale=b_p)`` (gains) and ``L ~ Gamma(shape=c_n,
scale=b_n)`` (losses). Over a horizon ``t`` the shapes scale to ``t*c``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DivergenceError, ValidationError

# expected_exp refuses b_p this close to 1: the moment blows up there.
_BP_CLIFF = 1e-12
CDF_TOL = 1e-8
_PHI_CUTOFF = 1e-12
_MAX_PLAIN_PERIODS = 48


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class BGParams:
    """Scale/speed quadruple ``(b_p, c_p, b_n, c_n)``."""

    b_p: float
    c_p: float
    b_n: float
    c_n: float

    def __post_init__(self):
        for name in ("b_p", "c_p", "b_n", "c_n"):
            object.__setattr__(self, name, float(getattr(self, name)))
            _check_positive(name, getattr(self, name))

    def as_tuple(self):
        return (self.b_p, self.c_p, self.b_n, self.c_n)

    def mean(self, t=1.0):
        return t * (self.c_p * self.b_p - self.c_n * self.b_n)

    def variance(self, t=1.0):
        return t * (self.c_p * self.b_p**2 + self.c_n * self.b_n**2)


@dataclass(frozen=True)
class GainLossMoments:
    """Means and standard deviations of the gain and loss gammas."""

    mu_p: float
    sigma_p: float
    mu_n: float
    sigma_n: float

    def __post_init__(self):
        for name in ("mu_p", "sigma_p", "mu_n", "sigma_n"):
            object.__setattr__(self, name, float(getattr(self, name)))
            _check_positive(name, getattr(self, name))

    def as_tuple(self):
        return (self.mu_p, self.sigma_p, self.mu_n, self.sigma_n)


@dataclass(frozen=True)
class MartingaleDrift:
    omega: float
    r: float


def moments_from_params(p: BGParams) -> GainLossMoments:
    return GainLossMoments(
        mu_p=p.c_p * p.b_p,
        sigma_p=math.sqrt(p.c_p) * p.b_p,
        mu_n=p.c_n * p.b_n,
        sigma_n=math.sqrt(p.c_n) * p.b_n,
    )


def params_from_moments(m: GainLossMoments) -> BGParams:
    """Invert ``mu = c*b``, ``sigma = sqrt(c)*b`` on each side."""
    return BGParams(
        b_p=m.sigma_p**2 / m.mu_p,
        c_p=(m.mu_p / m.sigma_p) ** 2,
        b_n=m.sigma_n**2 / m.mu_n,
        c_n=(m.mu_n / m.sigma_n) ** 2,
    )


def char_function(p: BGParams, t, u):
    """``(1 - i u b_p)^(-t c_p) (1 + i u b_n)^(-t c_n)`` on principal branches."""
    if not t > 0:
        raise ValidationError("t must be positive")
    u = np.asarray(u, dtype=float)
    log_phi = -t * p.c_p * np.log(1.0 - 1j * u * p.b_p) - t * p.c_n * np.log(
        1.0 + 1j * u * p.b_n
    )
    out = np.exp(log_phi)
    return complex(out) if out.ndim == 0 else out


def _log_abs_char_function(p, t, u):
    return -0.5 * t * (
        p.c_p * math.log1p((u * p.b_p) ** 2) + p.c_n * math.log1p((u * p.b_n) ** 2)
    )


def levy_density(p: BGParams, x):
    """Levy density ``k(x)``; singular (and rejected) at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ValidationError("the Levy density is singular at x = 0")
    ax = np.abs(x)
    out = np.where(
        x > 0,
        p.c_p / ax * np.exp(-ax / p.b_p),
        p.c_n / ax * np.exp(-ax / p.b_n),
    )
    return float(out) if out.ndim == 0 else out


def sample(p: BGParams, t, n, seed):
    """``n`` i.i.d. draws of ``X_t``.

    ``seed`` is an int or a ``numpy.random.Generator``. The gains block is
    drawn before the losses block, so one seed gives one reproducible
    stream. Callers that split work across chunks should derive chunk
    seeds with ``numpy.random.SeedSequence(seed).spawn(k)``.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    if int(n) < 1:
        raise ValidationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    gains = rng.gamma(t * p.c_p, p.b_p, size=int(n))
    losses = rng.gamma(t * p.c_n, p.b_n, size=int(n))
    return gains - losses


def _log_mgf(p, t, theta):
    # log E[exp(theta X_t)], finite for -1/b_n < theta < 1/b_p
    return -t * p.c_p * math.log1p(-theta * p.b_p) - t * p.c_n * math.log1p(
        theta * p.b_n
    )


def _chernoff_log_tail(p, t, x, upper):
    """Log of the Chernoff bound on P(X_t >= x) (upper) or P(X_t <= x)."""
    if upper:
        hi = 1.0 / p.b_p

        def f(theta):
            return _log_mgf(p, t, theta) - theta * x
    else:
        hi = 1.0 / p.b_n

        def f(theta):
            return _log_mgf(p, t, -theta) + theta * x

    res = optimize.minimize_scalar(
        f, bounds=(0.0, hi * (1 - 1e-9)), method="bounded", options={"xatol": 1e-10 * hi}
    )
    return min(0.0, float(res.fun))


def _quad(func, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"quadrature did not converge: {exc}") from exc
    return val, err


def _cdf_scalar(p, t, x):
    # Exponential tails: Chernoff bounds below the tolerance settle the far field.
    if x > p.mean(t) and _chernoff_log_tail(p, t, x, upper=True) < math.log(1e-14):
        return 1.0
    if x < p.mean(t) and _chernoff_log_tail(p, t, x, upper=False) < math.log(1e-14):
        return 0.0

    # Head: plain adaptive quadrature up to where |phi| is negligible or a cap.
    scale = min(p.b_p, p.b_n)
    cap = 2000.0 / scale
    head_end = cap
    log_cut = math.log(_PHI_CUTOFF)
    if _log_abs_char_function(p, t, cap) < log_cut:
        head_end = optimize.brentq(
            lambda u: _log_abs_char_function(p, t, u) - log_cut, 0.0, cap
        )

    def integrand(u):
        if u == 0.0:
            return -x + p.mean(t)
        return (np.exp(-1j * u * x) * char_function(p, t, u)).imag / u

    def im_over_u(u):
        return char_function(p, t, u).imag / u

    def re_over_u(u):
        return char_function(p, t, u).real / u

    w = abs(x)
    sgn = 1.0 if x >= 0 else -1.0
    periods = w * head_end / (2 * math.pi)
    total, err = 0.0, 0.0
    if periods <= _MAX_PLAIN_PERIODS:
        # Break the head at multiples of the oscillation period of exp(-iux).
        edges = np.linspace(0.0, head_end, int(periods) + 2)
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = _quad(integrand, a, b, limit=400, epsabs=CDF_TOL / 1000, epsrel=1e-13)
            total += v
            err += e
    else:
        # Many periods: first period plainly, then cos/sin-weighted (QAWO)
        # rules on geometric pieces where phi/u varies slowly.
        u0 = 2 * math.pi / w
        v, e = _quad(integrand, 0.0, u0, limit=400, epsabs=CDF_TOL / 1000, epsrel=1e-13)
        total, err = v, e
        edges = np.geomspace(u0, head_end, 12)
        for a, b in zip(edges[:-1], edges[1:]):
            v1, e1 = _quad(im_over_u, a, b, weight="cos", wvar=w, limit=2000, epsabs=CDF_TOL / 1000)
            v2, e2 = _quad(re_over_u, a, b, weight="sin", wvar=w, limit=2000, epsabs=CDF_TOL / 1000)
            total += v1 - sgn * v2
            err += e1 + e2

    if head_end == cap:
        # phi is non-oscillatory at large u; hand the Fourier tail to QAWF.
        if x == 0.0:
            v, e = _quad(im_over_u, cap, np.inf, limit=400, epsabs=CDF_TOL / 100)
            total += v
            err += e
        else:
            v1, e1 = _quad(im_over_u, cap, np.inf, weight="cos", wvar=w, epsabs=CDF_TOL / 100)
            v2, e2 = _quad(re_over_u, cap, np.inf, weight="sin", wvar=w, epsabs=CDF_TOL / 100)
            total += v1 - sgn * v2
            err += e1 + e2

    if not err < CDF_TOL * math.pi:
        raise ConvergenceError(f"cdf inversion error estimate {err / math.pi:.3g} exceeds {CDF_TOL}")
    return min(1.0, max(0.0, 0.5 - total / math.pi))


def cdf(p: BGParams, t, x):
    """``P(X_t <= x)`` by Gil-Pelaez inversion of the characteristic function.

    ``F(x) = 1/2 - (1/pi) int_0^inf Im(exp(-iux) phi_t(u)) / u du``,
    integrated adaptively to absolute accuracy 1e-8. Raises
    ``ConvergenceError`` when the quadrature error estimate is larger.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    xs = np.asarray(x, dtype=float)
    out = np.array([_cdf_scalar(p, t, float(v)) for v in xs.ravel()]).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def expected_exp(p: BGParams, t=1.0):
    """``E[exp(X_t)] = (1 - b_p)^(-t c_p) (1 + b_n)^(-t c_n)``."""
    if p.b_p >= 1.0 - _BP_CLIFF:
        raise DivergenceError(f"E[exp(X)] is infinite for b_p = {p.b_p} >= 1")
    return math.exp(
        -t * p.c_p * math.log1p(-p.b_p) - t * p.c_n * math.log1p(p.b_n)
    )


def reward_rate(p: BGParams):
    """``int (e^x - 1) k(x) dx = -c_p log(1-b_p) - c_n log(1+b_n)``.

    This is the per-unit-time growth rate of ``E[exp(X_T)]``; it equals
    ``log(expected_exp(p, 1))``, not the product itself.
    """
    if p.b_p >= 1.0 - _BP_CLIFF:
        raise DivergenceError(f"reward rate is infinite for b_p = {p.b_p} >= 1")
    return -p.c_p * math.log1p(-p.b_p) - p.c_n * math.log1p(p.b_n)


def martingale_drift(p: BGParams, r) -> MartingaleDrift:
    """Drift ``omega`` making ``exp(omega t + X_t - r t)`` a martingale."""
    if p.b_p >= 1.0 - _BP_CLIFF:
        raise DivergenceError(f"no martingale drift for b_p = {p.b_p} >= 1")
    omega = r + p.c_p * math.log1p(-p.b_p) + p.c_n * math.log1p(p.b_n)
    return MartingaleDrift(omega=omega, r=float(r))
