import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate, stats

from bgaccept import bg_core
from bgaccept.bg_core import BGParams, GainLossMoments
from bgaccept.dominance import (
    GammaLaw,
    bg_ssd_sufficient,
    gamma_ssd,
    gamma_integrated_cdf,
    gamma_ssd_numeric,
    mixture_grid,
    ssd_numeric,
)
from bgaccept.errors import ValidationError

law = st.builds(GammaLaw, st.floats(0.05, 5), st.floats(0.1, 10))


def test_equal_laws_numeric():
    f = stats.norm.cdf
    assert ssd_numeric(f, f, np.linspace(-8, 8, 200))


def test_scale_one_shapes_two_versus_one():
    assert gamma_ssd_numeric(GammaLaw(1, 2), GammaLaw(1, 1))
    assert gamma_ssd(GammaLaw(1, 2), GammaLaw(1, 1))


def test_shift_dominates():
    x = stats.gamma(2.0)
    grid = np.linspace(-1.0, x.ppf(1 - 1e-9), 3000)
    assert ssd_numeric(x.cdf, lambda s: x.cdf(s + 1.0), grid)
    assert not ssd_numeric(lambda s: x.cdf(s + 1.0), x.cdf, grid)


def test_short_or_unsorted_grid_rejected():
    f = stats.norm.cdf
    with pytest.raises(ValidationError):
        ssd_numeric(f, f, [0.0, 1.0])
    with pytest.raises(ValidationError):
        ssd_numeric(f, f, [0.0, 2.0, 1.0])


def test_identical_laws_not_strict():
    assert not gamma_ssd(GammaLaw(0.7, 1.3), GammaLaw(0.7, 1.3))


def test_equal_shape_larger_scale():
    assert gamma_ssd(GammaLaw(2.0, 3.0), GammaLaw(1.0, 3.0))
    assert not gamma_ssd(GammaLaw(1.0, 3.0), GammaLaw(2.0, 3.0))


@given(law, law)
def test_closed_form_verdict_confirmed_numerically(x, y):
    if gamma_ssd(x, y):
        assert gamma_ssd_numeric(x, y)
        assert x.mean >= y.mean


def test_closed_form_on_random_pairs(rng):
    hits = 0
    for _ in range(50):
        x = GammaLaw(*rng.uniform([0.1, 0.2], [3, 6]))
        y = GammaLaw(*rng.uniform([0.1, 0.2], [3, 6]))
        if gamma_ssd(x, y):
            hits += 1
            assert gamma_ssd_numeric(x, y)
    assert hits > 0


@given(law, st.floats(1.0, 3.0), st.floats(1.0, 3.0))
def test_transitivity(z, f1, f2):
    y = GammaLaw(z.b, z.c * f1)
    x = GammaLaw(y.b, y.c * f2)
    assume(gamma_ssd(x, y) and gamma_ssd(y, z))
    assert gamma_ssd_numeric(x, z)


def test_mean_variance_pairs_dominate(rng):
    # equal-or-higher mean with equal-or-lower variance (one strict) for gammas
    for _ in range(100):
        y = GammaLaw(*rng.uniform([0.1, 0.3], [2, 5]))
        mean = y.mean * rng.uniform(1.0, 1.5)
        var = y.variance * rng.uniform(0.5, 1.0)
        x = GammaLaw(var / mean, mean**2 / var)
        assert gamma_ssd_numeric(x, y)


def test_bg_equal_moments_false():
    m = GainLossMoments(0.03, 0.01, 0.03, 0.01)
    assert not bg_ssd_sufficient(m, m)


def test_bg_higher_gain_mean():
    x = GainLossMoments(0.04, 0.01, 0.03, 0.01)
    y = GainLossMoments(0.03, 0.01, 0.03, 0.01)
    assert bg_ssd_sufficient(x, y)
    # cross-check with the inverted cdfs of both bilateral gamma laws
    px, py = bg_core.params_from_moments(x), bg_core.params_from_moments(y)
    grid = np.linspace(-0.12, 0.2, 500)
    assert ssd_numeric(lambda s: bg_core.cdf(px, 1.0, s), lambda s: bg_core.cdf(py, 1.0, s), grid, slack=1e-8)


def test_bg_two_strict_improvements():
    x = GainLossMoments(0.04, 0.01, 0.02, 0.01)
    y = GainLossMoments(0.03, 0.01, 0.03, 0.01)
    assert not bg_ssd_sufficient(x, y)
    assert bg_ssd_sufficient(x, y, relaxed=True)


def test_bg_worse_component_fails():
    x = GainLossMoments(0.04, 0.02, 0.03, 0.01)
    y = GainLossMoments(0.03, 0.01, 0.03, 0.01)
    assert not bg_ssd_sufficient(x, y, relaxed=True)


def test_mixture_grid_spans_both():
    a, b = stats.norm(0, 1), stats.norm(5, 1)
    g = mixture_grid(a.ppf, b.ppf, size=100)
    assert g[0] < a.ppf(1e-5) and g[-1] > b.ppf(1 - 1e-5)


@pytest.mark.parametrize("law", [GammaLaw(0.5, 0.3), GammaLaw(2.0, 1.0), GammaLaw(0.1, 7.5)])
def test_integrated_cdf_matches_quadrature(law):
    for t in (0.01, 0.3, 1.0, 5.0):
        ref, _ = integrate.quad(law.frozen().cdf, 0.0, t, limit=200, epsabs=1e-13)
        assert gamma_integrated_cdf(law, t) == pytest.approx(ref, abs=1e-11)


def test_equal_mean_lower_variance_dominates():
    # equal means: the integrated cdfs touch in the tail, shape < 1 makes the
    # cdf singular at 0; both defeat a trapezoid oracle
    y = GammaLaw(0.5916577128192265, 0.45659484301966474)
    x = GammaLaw(0.4636667677702385, y.mean / 0.4636667677702385)
    assert gamma_ssd(x, y)
    assert gamma_ssd_numeric(x, y)
    assert not gamma_ssd_numeric(y, x)
