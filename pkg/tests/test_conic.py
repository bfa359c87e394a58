import math

import mpmath
import numpy as np
import pytest

from bgaccept import bg_core
from bgaccept.bg_core import BGParams
from bgaccept.conic import (
    LevyDistortionPair,
    ScaleInterval,
    c_tilde,
    check_membership,
    condition_lower_max_c,
    distorted_reward_bounds,
    excess_mass_lower,
    excess_mass_upper,
    g_minus,
    g_plus,
    gamma_tilde,
    kappa_p,
    lower_grid,
    phi_conj,
    phi_tilde_conj,
    s_lambda,
    s_lambda_limit,
    s_tilde_lambda,
    s_tilde_lambda_limit,
    solve_u,
    solve_upper_scale,
    two_sided_boundary_residual,
    upper_grid,
    valuation_bounds_over_interval,
)
from bgaccept.errors import DivergenceError, HypothesisError, ValidationError

REPRESENTATIVE = ScaleInterval(b_hat=0.02, b_low=0.015, b_high=0.027, c_p=2.0)


def random_intervals(rng, k=5):
    out = []
    for _ in range(k):
        b_hat = rng.uniform(0.01, 0.3)
        out.append(
            ScaleInterval(
                b_hat=b_hat,
                b_low=b_hat * rng.uniform(0.6, 0.95),
                b_high=b_hat * rng.uniform(1.05, 1.8),
                c_p=rng.uniform(0.5, 10),
            )
        )
    return out


def excess_quad(b_hat, b, c_p, lam):
    """Direct quadrature of int (dnu_b/dnu_hat - lam)^+ or (lam - ratio)^+ against nu_hat."""
    mpmath.mp.dps = 30
    b_hat, b, c_p, lam = (mpmath.mpf(v) for v in (b_hat, b, c_p, lam))
    # the density ratio crosses lam at x = L
    L = mpmath.log(lam) * b * b_hat / (b - b_hat)

    def dens(x, scale):
        return c_p * mpmath.exp(-x / scale) / x

    if b > b_hat:
        f = lambda x: dens(x, b) - lam * dens(x, b_hat)  # noqa: E731
        val = mpmath.quad(f, [L, L + 10 * b, mpmath.inf])
    else:
        f = lambda x: lam * dens(x, b_hat) - dens(x, b)  # noqa: E731
        val = mpmath.quad(f, [L, L + 10 * b_hat, mpmath.inf])
    return float(val)


# ---------------------------------------------------------------- types


def test_interval_validation():
    with pytest.raises(ValidationError):
        ScaleInterval(0.02, 0.03, 0.04, 1.0)
    with pytest.raises(ValidationError):
        ScaleInterval(0.02, 0.01, 1.0, 1.0)
    with pytest.raises(ValidationError):
        LevyDistortionPair(0.0, 1.0)


# ---------------------------------------------------------------- distortions


def test_distortions_vanish_at_zero():
    d = LevyDistortionPair(0.7, 0.4)
    assert g_plus(d, 0.0) == 0.0 and g_minus(d, 0.0) == 0.0


def test_distortion_limits():
    d = LevyDistortionPair(0.7, 0.4)
    assert g_plus(d, 200.0) - 200.0 == pytest.approx(1 / 0.7, rel=1e-12)
    assert 200.0 - g_minus(d, 200.0) == pytest.approx(1 / 0.7, rel=1e-12)


def test_distortions_ordered():
    d = LevyDistortionPair(2.0, 0.3)
    x = np.linspace(0, 10, 501)
    assert np.all(g_plus(d, x) >= x)
    assert np.all(x >= g_minus(d, x))


def test_distortion_rejects_negative():
    with pytest.raises(ValidationError):
        g_plus(LevyDistortionPair(1.0, 1.0), -0.1)


# ---------------------------------------------------------------- distorted rewards


def test_rewards_collapse_without_distortion():
    p = BGParams(0.05, 1.3, 0.07, 1.1)
    lo, hi = distorted_reward_bounds(p, 0.01, LevyDistortionPair(1e9, 1e-9))
    exact = 0.01 + bg_core.reward_rate(p)
    assert lo == pytest.approx(exact, abs=1e-6)
    assert hi == pytest.approx(exact, abs=1e-6)


def test_rewards_straddle_reward():
    p = BGParams(0.04, 1.5, 0.04, 1.5)
    reward = bg_core.reward_rate(p)
    for c, g in [(0.5, 0.2), (2.0, 1.0), (10.0, 0.05)]:
        lo, hi = distorted_reward_bounds(p, 0.0, LevyDistortionPair(c, g))
        assert lo <= reward <= hi
        assert lo < hi


def test_rewards_diverge():
    with pytest.raises(DivergenceError):
        distorted_reward_bounds(BGParams(1.0, 1.0, 0.1, 1.0), 0.0, LevyDistortionPair(1.0, 1.0))
    lo, hi = distorted_reward_bounds(BGParams(0.6, 1.0, 0.1, 1.0), 0.0, LevyDistortionPair(1.0, 1.0))
    assert math.isfinite(lo) and hi == math.inf


# ---------------------------------------------------------------- valuation bounds


def test_valuation_degenerate_interval():
    assert valuation_bounds_over_interval(ScaleInterval(0.2, 0.2, 0.2, 3.0)) == (1.0, 1.0)


def test_valuation_example():
    lo, hi = valuation_bounds_over_interval(ScaleInterval(0.02, 0.01, 0.03, 2.0))
    assert lo == pytest.approx((0.98 / 0.99) ** 2, rel=1e-15)
    assert hi == pytest.approx((0.98 / 0.97) ** 2, rel=1e-15)
    assert lo <= 1 <= hi


def test_valuation_monte_carlo():
    iv = ScaleInterval(0.05, 0.03, 0.08, 1.5)
    r = 0.01
    ref = BGParams(iv.b_hat, iv.c_p, 0.06, 1.2)
    omega = bg_core.martingale_drift(ref, r).omega
    closed = valuation_bounds_over_interval(iv)
    for b, want in ((iv.b_low, closed[0]), (iv.b_high, closed[1])):
        x = bg_core.sample(BGParams(b, iv.c_p, 0.06, 1.2), 1.0, 400_000, seed=9)
        v = np.exp(omega + x - r)
        se = v.std(ddof=1) / math.sqrt(v.size)
        assert abs(v.mean() - want) <= 3 * se


# ---------------------------------------------------------------- boundary equations


def test_upper_scale_examples():
    assert solve_upper_scale(0.3, 1.0, 2.0) == pytest.approx(0.3, abs=1e-16)
    assert solve_upper_scale(0.02, 0.99, 1.0) == pytest.approx(0.0298, abs=1e-15)


@pytest.mark.parametrize("b_low,ratio,c_p", [(0.02, 0.99, 1.0), (0.1, 0.9, 3.5), (0.3, 0.5, 0.7)])
def test_upper_scale_round_trip(b_low, ratio, c_p):
    b_high = solve_upper_scale(b_low, ratio, c_p)
    assert ((1 - b_high) / (1 - b_low)) ** c_p == pytest.approx(ratio, abs=1e-12)
    iv = ScaleInterval(b_low, b_low, b_high, c_p)
    assert 1 / valuation_bounds_over_interval(iv)[1] == pytest.approx(ratio, abs=1e-12)


def test_upper_scale_rejects():
    with pytest.raises(ValidationError):
        solve_upper_scale(0.9, 1e-6, 0.01)
    with pytest.raises(ValidationError):
        solve_upper_scale(0.2, 1.2, 1.0)


def test_two_sided_residual():
    assert two_sided_boundary_residual((0.2, 0.2), (0.1, 0.1), 1.0, 2.0, 1.0) == 0.0
    b_high = solve_upper_scale(0.05, 0.97, 2.0)
    # degenerate loss side reduces to the one-sided relation
    assert abs(two_sided_boundary_residual((0.05, b_high), (0.1, 0.1), 2.0, 1.3, 0.97)) < 1e-12


# ---------------------------------------------------------------- u and conjugates


def test_u_golden_ratio():
    assert solve_u(1.5, 1.0) == pytest.approx((math.sqrt(5) - 1) / 2, rel=1e-14)


def test_u_limits():
    assert solve_u(1 + 1e-12, 0.5) < 1e-10
    assert solve_u(1e12, 0.5) > 1 - 1e-10


@pytest.mark.parametrize("gamma", [1.0, 5.0])
def test_u_residual(gamma):
    lam = upper_grid()
    u = solve_u(lam, gamma)
    resid = u / (1 - u) ** (gamma / (1 + gamma)) - (lam - 1) * (1 + gamma)
    assert np.all(np.abs(resid) <= 1e-10 * np.maximum(1.0, (lam - 1) * (1 + gamma)))
    assert np.all(np.diff(u) > 0)


@pytest.mark.parametrize("gamma", [0.01, 0.3])
def test_u_matches_high_precision_root(gamma):
    # for small gamma u is within rounding of 1, so compare with an exact
    # root computed in logit form instead of a float residual
    mpmath.mp.dps = 50
    k = mpmath.mpf(gamma) / (1 + mpmath.mpf(gamma))
    for lam in (1 + 1e-8, 1.01, 2.0, 50.0, 1e4):
        target = mpmath.log((mpmath.mpf(lam) - 1) * (1 + mpmath.mpf(gamma)))
        s = mpmath.findroot(lambda t: -mpmath.log1p(mpmath.exp(-t)) + k * mpmath.log1p(mpmath.exp(t)) - target, 1)
        exact = float(1 / (1 + mpmath.exp(-s)))
        assert solve_u(lam, gamma) == pytest.approx(exact, rel=1e-14, abs=0)


def test_u_rejects_lambda_at_most_one():
    with pytest.raises(ValidationError):
        solve_u(1.0, 1.0)


def test_phi_derivative():
    d = LevyDistortionPair(1.7, 0.6)
    h = 1e-6
    for lam in (1.05, 1.5, 3.0, 20.0):
        fd = (phi_conj(lam + h, d) - phi_conj(lam - h, d)) / (2 * h)
        assert fd == pytest.approx(math.log(solve_u(lam, 0.6)) / 1.7, rel=1e-5)


def test_phi_range():
    d = LevyDistortionPair(2.0, 0.5)
    lam = upper_grid()
    phi = phi_conj(lam, d)
    assert np.all(phi >= 0) and np.all(np.diff(phi) < 0)
    assert phi_conj(1 + 1e-12, d) == pytest.approx(0.5, rel=1e-6)


def test_phi_tilde():
    d = LevyDistortionPair(2.5, 1.0)
    assert phi_tilde_conj(0.0, d) == 0.0
    assert phi_tilde_conj(1 - 1e-12, d) == pytest.approx(1 / 2.5, rel=1e-9)
    assert np.all(phi_tilde_conj(lower_grid(), d) >= 0)
    with pytest.raises(ValidationError):
        phi_tilde_conj(1.0, d)


# ---------------------------------------------------------------- S and S~


def test_s_closed_forms_match_quadrature(rng):
    lam_up = 1 + np.geomspace(1e-3, 20, 50)
    lam_lo = np.linspace(0.02, 0.98, 50)
    for iv in random_intervals(rng, 2):
        got_up = s_lambda(iv, lam_up)
        got_lo = s_tilde_lambda(iv, lam_lo)
        for k in range(0, 50, 7):
            assert got_up[k] == pytest.approx(excess_quad(iv.b_hat, iv.b_high, iv.c_p, lam_up[k]), abs=1e-8)
            assert got_lo[k] == pytest.approx(excess_quad(iv.b_hat, iv.b_low, iv.c_p, lam_lo[k]), abs=1e-8)


def test_frullani_limits(rng):
    for iv in random_intervals(rng):
        assert s_lambda(iv, 1 + 1e-9) == pytest.approx(s_lambda_limit(iv), abs=1e-6)
        assert s_tilde_lambda(iv, 1 - 1e-9) == pytest.approx(s_tilde_lambda_limit(iv), abs=1e-6)
        assert s_lambda_limit(iv) == pytest.approx(iv.c_p * math.log(iv.b_high / iv.b_hat))


def test_s_vanishes_at_infinity():
    assert s_lambda(REPRESENTATIVE, 1e6) < 1e-12
    assert s_tilde_lambda(REPRESENTATIVE, 0.0) == 0.0


def test_s_singular_at_one():
    with pytest.raises(ValidationError):
        s_lambda(REPRESENTATIVE, 1.0)
    with pytest.raises(ValidationError):
        s_tilde_lambda(REPRESENTATIVE, 1.0)
    with pytest.raises(ValidationError):
        excess_mass_upper(0.02, 0.02, 1.0, 2.0)
    with pytest.raises(ValidationError):
        excess_mass_lower(0.02, 0.03, 1.0, 0.5)


def test_phi_over_s_limit():
    # at lambda -> 1+ Phi -> 1/c and S -> c_p log(b_high / b_hat)
    iv, d = REPRESENTATIVE, LevyDistortionPair(0.4, 0.5)
    lam = 1 + 1e-6
    expected = 1 / (d.c * iv.c_p * math.log(iv.b_high / iv.b_hat))
    assert phi_conj(lam, d) / s_lambda(iv, lam) == pytest.approx(expected, rel=1e-3)


# ---------------------------------------------------------------- lemma conditions


def test_condition_lower_examples():
    iv = ScaleInterval(0.02, 0.015, 0.027, 9.0)
    assert condition_lower_max_c(iv) == pytest.approx(1 / (9 * math.log(4 / 3)), rel=1e-14)
    assert condition_lower_max_c(ScaleInterval(0.02, 0.02, 0.03, 1.0)) == math.inf


def test_condition_lower_matches_numeric_limit():
    iv = ScaleInterval(0.02, 0.015, 0.027, 9.0)
    assert condition_lower_max_c(iv) == pytest.approx(1 / s_tilde_lambda(iv, 1 - 1e-6), rel=1e-4)


def test_condition_lower_hypothesis():
    with pytest.raises(HypothesisError):
        condition_lower_max_c(ScaleInterval(0.02, 0.01, 0.03, 1.0))


def test_gamma_and_c_tilde():
    assert gamma_tilde(ScaleInterval(0.02, 0.015, 0.02, 2.0)) == 0.0
    assert gamma_tilde(REPRESENTATIVE) == pytest.approx(0.35, rel=1e-12)
    for c_p in (0.5, 2.0, 9.0):
        iv = ScaleInterval(0.02, 0.015, 0.027, c_p)
        assert c_tilde(iv) <= 1 / c_p


# ---------------------------------------------------------------- membership and kappa


@pytest.mark.parametrize("c,gamma", [(0.1, 0.2), (5.0, 2.0), (100.0, 0.01)])
def test_reference_scale_always_member(c, gamma):
    assert check_membership(REPRESENTATIVE, REPRESENTATIVE.b_hat, LevyDistortionPair(c, gamma))


def test_lower_end_rejected_above_limit():
    cmax = condition_lower_max_c(REPRESENTATIVE)
    assert not check_membership(REPRESENTATIVE, REPRESENTATIVE.b_low, LevyDistortionPair(1.01 * cmax, 1.0))
    assert check_membership(REPRESENTATIVE, REPRESENTATIVE.b_low, LevyDistortionPair(0.99 * cmax, 1.0))


@pytest.mark.parametrize("b", [0.015, 0.018, 0.024, 0.027])
def test_membership_monotone_in_c(b):
    gamma = 0.5
    cs = np.geomspace(0.01, 10, 40)
    res = [check_membership(REPRESENTATIVE, b, LevyDistortionPair(c, gamma)) for c in cs]
    # once false, false for every larger c
    first_false = res.index(False) if False in res else len(res)
    assert all(res[:first_false]) and not any(res[first_false:])


def test_tail_condition_rejects_small_gamma():
    # gamma below gamma_tilde breaks the decay comparison beyond the grid
    assert not check_membership(REPRESENTATIVE, REPRESENTATIVE.b_high, LevyDistortionPair(1e-3, 0.2))


def test_kappa_contract():
    gt, ct = gamma_tilde(REPRESENTATIVE), c_tilde(REPRESENTATIVE)
    gammas = gt + np.geomspace(1e-3, 3, 10)
    ks = [kappa_p(REPRESENTATIVE, g) for g in gammas]
    assert all(0 < k <= ct for k in ks)
    assert all(b >= a for a, b in zip(ks, ks[1:]))


def test_kappa_saturates():
    gt, ct = gamma_tilde(REPRESENTATIVE), c_tilde(REPRESENTATIVE)
    assert kappa_p(REPRESENTATIVE, gt + 0.005) == ct


def test_kappa_interior_threshold():
    # a wide upper interval keeps kappa below c~, where it is a sharp threshold
    iv = ScaleInterval(0.02, 0.019, 0.06, 0.5)
    gamma = gamma_tilde(iv) + 0.01
    k = kappa_p(iv, gamma)
    assert k < c_tilde(iv)
    assert check_membership(iv, iv.b_high, LevyDistortionPair(k * (1 - 1e-3), gamma))
    assert not check_membership(iv, iv.b_high, LevyDistortionPair(k * (1 + 1e-3), gamma))


def test_kappa_hypothesis():
    with pytest.raises(HypothesisError):
        kappa_p(REPRESENTATIVE, gamma_tilde(REPRESENTATIVE))
