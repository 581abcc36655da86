import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ghjm.baseline import FAMILIES, BaselineHazard, check_family
from ghjm.errors import DomainError

from oracles import oracle_hazard, quad_cum_hazard, random_params, scipy_dist

pos = st.floats(0.2, 5.0)


def family_strategy(family):
    if family == "lognormal":
        return st.tuples(st.floats(-2.0, 3.0), pos)
    if family == "gamma":
        return st.tuples(pos, st.floats(0.1, 3.0))
    return st.tuples(st.floats(0.2, 10.0), st.floats(0.3, 4.0), pos)


# ------------------------------------------------------------------ examples

def test_exponential_hazard_is_rate():
    assert BaselineHazard.gamma(1.0, 0.5).hazard(3.0) == pytest.approx(0.5, rel=1e-13)


def test_lognormal_hazard_at_one():
    ref = stats.norm.pdf(0) / stats.norm.sf(0)
    assert BaselineHazard.lognormal(0.0, 1.0).hazard(1.0) == pytest.approx(ref, rel=1e-13)
    assert ref == pytest.approx(0.7978845608, abs=1e-10)


def test_pgw_delta_one_hazard():
    assert BaselineHazard.pgw(1.0, 2.0, 1.0).hazard(2.0) == pytest.approx(4.0, rel=1e-13)


@pytest.mark.parametrize("family", FAMILIES)
def test_cum_hazard_zero_at_origin(family):
    b = BaselineHazard(family, random_params(family, np.random.default_rng(1)))
    assert b.cum_hazard(0.0) == 0.0
    assert b.survival(0.0) == 1.0


def test_exponential_cum_hazard():
    assert BaselineHazard.gamma(1.0, 0.5).cum_hazard(3.0) == pytest.approx(1.5, rel=1e-13)


def test_pgw_cum_hazard_matches_quadrature():
    b = BaselineHazard.pgw(2.0, 1.5, 0.8)
    ref = quad_cum_hazard(b.hazard, 1.7)
    assert abs(b.cum_hazard(1.7) - ref) / ref <= 1e-8


def test_exponential_median():
    assert BaselineHazard.gamma(1.0, 2.0).quantile(0.5) == pytest.approx(math.log(2) / 2, rel=1e-12)


def test_pgw_quantile_hand_solution():
    # H0(t) = (1 + t)^(1/2) - 1 = 1 at t = 3
    assert BaselineHazard.pgw(1.0, 1.0, 2.0).quantile(1 - math.exp(-1)) == pytest.approx(3.0, rel=1e-12)


def test_log_pdf_examples():
    assert BaselineHazard.gamma(1.0, 1.0).log_pdf(1.0) == pytest.approx(-1.0, abs=1e-13)
    assert BaselineHazard.lognormal(0.0, 1.0).log_pdf(1.0) == pytest.approx(-0.9189385332046727, abs=1e-12)
    assert BaselineHazard.gengamma(1.0, 1.0, 1.0).log_pdf(2.0) == pytest.approx(-2.0, abs=1e-12)


# ---------------------------------------------------------------- properties

@pytest.mark.parametrize("family", FAMILIES)
def test_cum_hazard_matches_quadrature_random(family):
    rng = np.random.default_rng(7)
    t = np.logspace(-3, 3, 15)
    for _ in range(20):
        b = BaselineHazard(family, random_params(family, rng))
        ref = quad_cum_hazard(b.hazard, t, scale=b.cum_hazard(t))
        np.testing.assert_array_less(np.abs(b.cum_hazard(t) - ref) / ref, 1e-8)


@pytest.mark.parametrize("family", FAMILIES)
def test_hazard_and_survival_match_scipy(family):
    rng = np.random.default_rng(11)
    t = np.logspace(-2, 2, 30)
    for _ in range(20):
        params = random_params(family, rng)
        b = BaselineHazard(family, params)
        d = scipy_dist(family, params)
        ref = oracle_hazard(family, params, t)
        ok = np.isfinite(ref)
        np.testing.assert_allclose(b.hazard(t)[ok], ref[ok], rtol=1e-9)
        ls = d.logsf(t)
        ok = ls > -600
        np.testing.assert_allclose(b.log_survival(t)[ok], ls[ok], rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("family", FAMILIES)
def test_quantile_round_trip(family):
    u = np.array([1e-6, 1e-4, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1 - 1e-4, 1 - 1e-6])
    rng = np.random.default_rng(3)
    for _ in range(10):
        b = BaselineHazard(family, random_params(family, rng))
        np.testing.assert_allclose(b.cdf(b.quantile(u)), u, rtol=0, atol=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_log_pdf_is_log_hazard_minus_cum(family):
    b = BaselineHazard(family, random_params(family, np.random.default_rng(5)))
    t = np.logspace(-2, 2, 25)
    np.testing.assert_allclose(b.log_pdf(t), b.log_hazard(t) - b.cum_hazard(t), rtol=1e-13, atol=1e-13)


@given(eta=st.floats(0.2, 10), nu=st.floats(0.3, 4))
def test_pgw_delta_one_is_weibull(eta, nu):
    t = np.logspace(-2, 2, 20)
    h = BaselineHazard.pgw(eta, nu, 1.0).hazard(t)
    ref = nu * t ** (nu - 1) / eta ** nu
    np.testing.assert_allclose(h, ref, rtol=1e-12)


@given(eta=st.floats(0.2, 10), nu=st.floats(0.3, 4))
def test_gengamma_delta_one_is_weibull(eta, nu):
    t = np.logspace(-2, 1.5, 20)
    lp = BaselineHazard.gengamma(eta, nu, 1.0).log_pdf(t)
    ref = stats.weibull_min(c=nu, scale=eta).logpdf(t)
    np.testing.assert_allclose(np.exp(lp), np.exp(ref), rtol=1e-10)


@given(eta=st.floats(0.2, 10), delta=st.floats(0.3, 4))
def test_gengamma_nu_one_is_gamma(eta, delta):
    # GG(eta, 1, delta) is Gamma with shape delta and rate 1/eta
    t = np.logspace(-2, 1.5, 20)
    gg = BaselineHazard.gengamma(eta, 1.0, delta).pdf(t)
    ga = BaselineHazard.gamma(delta, 1.0 / eta).pdf(t)
    np.testing.assert_allclose(gg, ga, rtol=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_cum_hazard_strictly_increasing(family):
    b = BaselineHazard(family, random_params(family, np.random.default_rng(9)))
    t = np.logspace(-2, 1.5, 200)
    assert np.all(np.diff(b.cum_hazard(t)) > 0)
    assert np.all(b.hazard(t) >= 0)
    s = b.survival(t)
    assert np.all((s > 0) & (s <= 1))


@given(data=st.data(), family=st.sampled_from(FAMILIES))
def test_survival_in_unit_interval(data, family):
    b = BaselineHazard(family, data.draw(family_strategy(family)))
    t = data.draw(st.floats(1e-3, 1e3))
    s = b.survival(t)
    assert 0.0 <= s <= 1.0
    assert b.cum_hazard(t) >= 0.0


def test_small_cum_hazard_has_no_cancellation():
    # H0 ~ (t/eta)^nu / delta for tiny t: no loss to 1 - S rounding
    b = BaselineHazard.pgw(1.0, 2.0, 2.0)
    assert b.cum_hazard(1e-10) == pytest.approx(0.5e-20, rel=1e-10)
    ln = BaselineHazard.lognormal(0.0, 1.0)
    assert ln.cum_hazard(1e-3) == pytest.approx(-stats.norm.logsf(math.log(1e-3)), rel=1e-12)


def test_gamma_scale_report():
    assert BaselineHazard.gamma(2.0, 0.25).scale == 4.0


# -------------------------------------------------------------------- errors

@pytest.mark.parametrize("family, params", [
    ("gamma", (0.0, 1.0)), ("gamma", (1.0, -1.0)), ("lognormal", (0.0, 0.0)),
    ("pgw", (1.0, 1.0)), ("gengamma", (1.0, np.nan, 1.0)), ("weibull", (1.0, 1.0)),
])
def test_invalid_parameters(family, params):
    with pytest.raises(DomainError):
        BaselineHazard(family, params)


def test_invalid_times_and_probabilities():
    b = BaselineHazard.gamma(2.0, 1.0)
    for bad in (0.0, -1.0, np.nan):
        with pytest.raises(DomainError):
            b.hazard(bad)
    with pytest.raises(DomainError):
        b.cum_hazard(-1.0)
    for u in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(DomainError):
            b.quantile(u)


def test_family_aliases():
    assert check_family("LN") == "lognormal"
    assert check_family("gg") == "gengamma"


@pytest.mark.parametrize("family, params, t", [
    ("gengamma", (0.2516, 3.3385, 4.0259), 1000.0),
    ("gengamma", (1.46, 2.147, 3.087), 38.57),
    ("gamma", (2.5, 3.0), 400.0),
])
def test_gamma_type_hazard_far_upper_tail(family, params, t):
    # density and survival share the factor x^a e^{-x}; the hazard must not
    # be formed as a difference of two huge logs
    import mpmath as mp
    mp.mp.dps = 40
    if family == "gamma":
        nu, zeta = (mp.mpf(p) for p in params)
        x = zeta * t
        f = zeta ** nu * mp.mpf(t) ** (nu - 1) * mp.e ** (-x) / mp.gamma(nu)
        q = mp.gammainc(nu, x, mp.inf, regularized=True)
    else:
        eta, nu, delta = (mp.mpf(p) for p in params)
        x = (t / eta) ** nu
        f = nu * mp.mpf(t) ** (nu * delta - 1) * mp.e ** (-x) / (eta ** (nu * delta) * mp.gamma(delta))
        q = mp.gammainc(delta, x, mp.inf, regularized=True)
    b = BaselineHazard(family, params)
    assert b.hazard(t) == pytest.approx(float(f / q), rel=1e-11)
    assert b.cum_hazard(t) == pytest.approx(float(-mp.log(q)), rel=1e-12)
