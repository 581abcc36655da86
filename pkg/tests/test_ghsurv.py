import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghjm.baseline import FAMILIES, BaselineHazard
from ghjm.errors import DomainError, NumericalError
from ghjm.ghsurv import (EventRecord, SurvivalCovariates, SurvivalParams, SurvivalSpec, cr_log_fS,
                         gh_cum_hazard, gh_exponents, gh_hazard, gh_survival, log_fS,
                         warn_if_weibull_equivalent)

from oracles import quad_cum_hazard, random_params


def covars(w=(), w_tilde=(), s=(), x_tilde=()):
    def row(v):
        return np.asarray(v, dtype=float).reshape(1, -1) if len(v) else np.zeros((1, 0))
    return SurvivalCovariates(row(w), row(w_tilde), row(s), row(x_tilde))


PLAIN = SurvivalSpec(baseline="gamma", share_intercept=False, share_slope=False)
EXP1 = SurvivalParams(theta=(1.0, 1.0))


def full_spec(family, time_cov=True):
    return SurvivalSpec(baseline=family, time_covariates=("w",) if time_cov else (),
                        hazard_covariates=("v",), expansions=("s",), share_intercept=True,
                        share_slope=True, share_gamma=True)


def random_config(family, rng):
    spec = full_spec(family)
    params = SurvivalParams(theta=random_params(family, rng), kappa=rng.normal(0, 0.5, 1),
                            kappa_tilde=rng.normal(0, 0.5, 1), lam=rng.normal(0, 0.5, 1),
                            alpha0=rng.normal(0, 0.5), alpha1=rng.normal(0, 0.5))
    cv = covars(rng.normal(size=1), rng.normal(size=1), rng.normal(size=1), rng.normal(size=1))
    b = rng.normal(0, 0.5, size=(1, 2))
    gamma = rng.normal(0, 0.5, 1)
    return spec, params, cv, b, gamma


# --------------------------------------------------------------- examples

@pytest.mark.parametrize("family", FAMILIES)
def test_no_modifiers_reduces_to_baseline(family):
    theta = random_params(family, np.random.default_rng(2))
    spec = full_spec(family)
    params = SurvivalParams(theta=theta, kappa=np.zeros(1), kappa_tilde=np.zeros(1), lam=np.zeros(1))
    cv = covars([0.7], [1.0], [0.3], [0.2])
    t = np.logspace(-1, 1, 9)
    b = np.zeros((1, 2))
    base = BaselineHazard(family, theta)
    np.testing.assert_allclose(gh_hazard(spec, params, b, cv, t), base.hazard(t), rtol=1e-13)
    np.testing.assert_allclose(gh_cum_hazard(spec, params, b, cv, t), base.cum_hazard(t), rtol=1e-13)
    assert float(gh_cum_hazard(spec, params, b, cv, 0.0)[0]) == 0.0


def test_cum_hazard_matches_quadrature_example():
    rng = np.random.default_rng(23)
    for family in FAMILIES:
        spec, params, cv, b, gamma = random_config(family, rng)
        t = 2.3
        ref = quad_cum_hazard(lambda u: gh_hazard(spec, params, b, cv, u, gamma), np.array([t]))
        val = gh_cum_hazard(spec, params, b, cv, t, gamma)
        assert abs(val[0] - ref[0]) / ref[0] <= 1e-8


def test_right_censored_exponential():
    rec = EventRecord("right", time=2.0)
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(-2.0, abs=1e-14)


def test_exact_exponential():
    rec = EventRecord("exact", time=2.0)
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(-2.0, abs=1e-14)


def test_interval_exponential():
    rec = EventRecord("interval", t_left=1.0, t_right=2.0)
    ref = math.log(math.exp(-1) - math.exp(-2))
    assert ref == pytest.approx(-1.4586, abs=1e-4)
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(ref, abs=1e-14)


def test_left_censored_exponential():
    rec = EventRecord("left", time=0.5)
    ref = math.log(1 - math.exp(-0.5))
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(ref, abs=1e-14)


def test_tight_interval_is_stable():
    # S(t) - S(t + 1e-9) ~ 1e-9 e^{-1}: no cancellation to zero
    rec = EventRecord("interval", t_left=1.0, t_right=1.0 + 1e-9)
    ref = math.log(1e-9) - 1.0
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(ref, abs=1e-6)


def test_tiny_left_censoring():
    rec = EventRecord("left", time=1e-12)
    assert log_fS(PLAIN, EXP1, np.zeros(2), covars(), rec) == pytest.approx(math.log(1e-12), abs=1e-9)


def test_interval_underflow_raises():
    # a far-apart interval is fine on the log scale
    rec = EventRecord("interval", t_left=50.0, t_right=60.0)
    steep = SurvivalParams(theta=(1.0, 40.0))
    assert log_fS(PLAIN, steep, np.zeros(2), covars(), rec) == pytest.approx(-2000.0, abs=1e-12)
    # H = t^0.01 cannot separate adjacent doubles: S(t_left) - S(t_right) is lost
    flat = SurvivalSpec(baseline="pgw", share_intercept=False, share_slope=False)
    rec = EventRecord("interval", t_left=1.0, t_right=float(np.nextafter(1.0, 2.0)))
    with pytest.raises(NumericalError, match="interval"):
        log_fS(flat, SurvivalParams(theta=(1.0, 0.01, 1.0)), np.zeros(2), covars(), rec)


# ------------------------------------------------------------ reductions

@pytest.mark.parametrize("family", FAMILIES)
def test_proportional_hazards_reduction(family):
    # alpha1 = 0 and no time-scale covariates: ratio constant in t
    rng = np.random.default_rng(31)
    spec = SurvivalSpec(baseline=family, hazard_covariates=("v",), expansions=("s",), share_slope=False)
    params = SurvivalParams(theta=random_params(family, rng), kappa_tilde=np.array([0.7]),
                            lam=np.array([-0.4]), alpha0=0.5)
    t = np.linspace(0.05, 5, 100)
    ha = gh_hazard(spec, params, np.array([[0.3, 1.0]]), covars(w_tilde=[1.0], s=[0.2]), t)
    hb = gh_hazard(spec, params, np.array([[-0.1, -2.0]]), covars(w_tilde=[0.0], s=[-1.0]), t)
    ratio = ha / hb
    assert np.max(np.abs(ratio - ratio[0])) / ratio[0] <= 1e-12


@given(eta=st.floats(0.3, 8), nu=st.floats(0.3, 4), c=st.floats(-2, 2))
def test_weibull_time_scale_equals_hazard_scale(eta, nu, c):
    # PGW(delta = 1) is Weibull: h0(t e^c) = h0(t) e^{(nu - 1) c}
    t = np.logspace(-2, 1, 30)
    time_spec = SurvivalSpec(baseline="pgw", time_covariates=("w",), share_intercept=False, share_slope=False)
    haz_spec = SurvivalSpec(baseline="pgw", hazard_covariates=("v",), share_intercept=False, share_slope=False)
    theta = (eta, nu, 1.0)
    ht = gh_hazard(time_spec, SurvivalParams(theta, kappa=np.array([c])), np.zeros((1, 2)), covars(w=[1.0]), t)
    hh = gh_hazard(haz_spec, SurvivalParams(theta, kappa_tilde=np.array([(nu - 1) * c])), np.zeros((1, 2)),
                   covars(w_tilde=[1.0]), t)
    np.testing.assert_allclose(ht, hh, rtol=1e-10)
    st_ = gh_survival(time_spec, SurvivalParams(theta, kappa=np.array([c])), np.zeros((1, 2)), covars(w=[1.0]), t)
    sh = gh_survival(haz_spec, SurvivalParams(theta, kappa_tilde=np.array([(nu - 1) * c])), np.zeros((1, 2)),
                     covars(w_tilde=[1.0]), t)
    np.testing.assert_allclose(st_, sh, rtol=1e-10)


@given(eta=st.floats(0.3, 8), nu=st.floats(0.3, 4), c=st.floats(-2, 2))
def test_weibull_aft_equals_hazard_scale(eta, nu, c):
    # AFT shift c on both scales equals a hazard-scale shift nu c under Weibull
    t = np.logspace(-2, 1, 30)
    aft = SurvivalSpec(baseline="pgw", time_covariates=("w",), hazard_covariates=("v",),
                       share_intercept=False, share_slope=False)
    ph = SurvivalSpec(baseline="pgw", hazard_covariates=("v",), share_intercept=False, share_slope=False)
    theta = (eta, nu, 1.0)
    h_aft = gh_hazard(aft, SurvivalParams(theta, kappa=np.array([c]), kappa_tilde=np.array([c])),
                      np.zeros((1, 2)), covars(w=[1.0], w_tilde=[1.0]), t)
    h_ph = gh_hazard(ph, SurvivalParams(theta, kappa_tilde=np.array([nu * c])), np.zeros((1, 2)),
                     covars(w_tilde=[1.0]), t)
    np.testing.assert_allclose(h_aft, h_ph, rtol=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_aft_reduction(family):
    # equal exponents on both scales: S(t) = S0(t e^c)
    rng = np.random.default_rng(41)
    theta = random_params(family, rng)
    spec = SurvivalSpec(baseline=family, time_covariates=("w",), hazard_covariates=("v",),
                        share_intercept=False, share_slope=False)
    c = 0.37
    params = SurvivalParams(theta, kappa=np.array([c]), kappa_tilde=np.array([c]))
    t = np.logspace(-2, 1, 40)
    s = gh_survival(spec, params, np.zeros((1, 2)), covars(w=[1.0], w_tilde=[1.0]), t)
    np.testing.assert_allclose(s, BaselineHazard(family, theta).survival(t * math.exp(c)), rtol=1e-10,
                               atol=1e-300)


def test_exponents_layout():
    spec = full_spec("lognormal")
    params = SurvivalParams((0.0, 1.0), kappa=np.array([0.2]), kappa_tilde=np.array([0.3]),
                            lam=np.array([0.4]), alpha0=0.5, alpha1=-1.0)
    cv = covars([2.0], [3.0], [4.0], [5.0])
    b = np.array([[0.7, 0.1]])
    a, c = gh_exponents(spec, params, b, cv, gamma=np.array([0.6]))
    assert float(a[0]) == pytest.approx(0.2 * 2 - 1.0 * (0.6 * 5 + 0.1))
    assert float(c[0]) == pytest.approx(0.3 * 3 + 0.4 * 4 + 0.5 * 0.7)
    no_gamma = SurvivalSpec(baseline="lognormal", time_covariates=("w",), share_gamma=False)
    a2, _ = gh_exponents(no_gamma, params, b, cv, gamma=np.array([0.6]))
    assert float(a2[0]) == pytest.approx(0.2 * 2 - 1.0 * 0.1)


def test_weibull_identifiability_warning():
    spec = SurvivalSpec(baseline="pgw", hazard_covariates=("v",), share_slope=True)
    with pytest.warns(UserWarning, match="not separately identifiable"):
        assert warn_if_weibull_equivalent(spec, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not warn_if_weibull_equivalent(spec, None)
        assert not warn_if_weibull_equivalent(spec, 2.0)


# ---------------------------------------------------------- competing risks

def _cause(name, family="lognormal"):
    return SurvivalSpec(baseline=family, cause=name, hazard_covariates=("v",), share_slope=True,
                        share_intercept=True)


def test_single_cause_reduces_to_log_fs():
    spec = _cause("I")
    p = SurvivalParams((1.0, 0.7), kappa_tilde=np.array([0.3]), alpha0=0.4, alpha1=-0.5)
    cv = covars(w_tilde=[1.0])
    b = np.array([0.2, -0.3])
    for rec in (EventRecord("exact", time=2.0, cause="I"), EventRecord("right", time=2.0)):
        assert cr_log_fS([spec], [p], b, cv, rec) == pytest.approx(log_fS(spec, p, b, cv, rec), abs=1e-13)


def test_two_identical_causes_double_censored_contribution():
    p = SurvivalParams((1.0, 0.7), kappa_tilde=np.array([0.3]), alpha0=0.4, alpha1=-0.5)
    cv = covars(w_tilde=[1.0])
    b = np.array([0.2, -0.3])
    rec = EventRecord("right", time=2.0)
    one = log_fS(_cause("I"), p, b, cv, rec)
    two = cr_log_fS([_cause("I"), _cause("U")], [p, p], b, cv, rec)
    assert two == pytest.approx(2 * one, abs=1e-13)


def test_two_lognormal_causes_composition_oracle():
    specs = [SurvivalSpec(baseline="lognormal", cause="I", hazard_covariates=("v",), share_slope=True),
             SurvivalSpec(baseline="lognormal", cause="U", hazard_covariates=("v",), share_slope=True,
                          share_gamma=False)]
    params = [SurvivalParams((1.2, 0.8), kappa_tilde=np.array([0.3]), alpha0=0.4, alpha1=-0.5),
              SurvivalParams((2.0, 1.1), kappa_tilde=np.array([-0.2]), alpha0=-0.3, alpha1=0.6)]
    cv = covars(w_tilde=[1.0], x_tilde=[0.5])
    b = np.array([[0.2, -0.3]])
    gamma = np.array([0.25])
    t = 1.7
    haz = [gh_hazard(s, p, b, cv, t, gamma)[0] for s, p in zip(specs, params)]
    cum = [gh_cum_hazard(s, p, b, cv, t, gamma)[0] for s, p in zip(specs, params)]
    rec = EventRecord("exact", time=t, cause="U")
    val = cr_log_fS(specs, params, b, cv, rec, gamma)
    assert val == pytest.approx(math.log(haz[1]) - sum(cum), abs=1e-12)
    cens = cr_log_fS(specs, params, b, cv, EventRecord("right", time=t), gamma)
    assert cens == pytest.approx(-sum(cum), abs=1e-12)
    # overall survival equals the product of cause-specific survivals
    s_prod = np.prod([gh_survival(s, p, b, cv, t, gamma)[0] for s, p in zip(specs, params)])
    assert math.exp(cens) == pytest.approx(s_prod, rel=1e-12)


def test_unknown_cause():
    specs = [_cause("I"), _cause("U")]
    p = SurvivalParams((1.0, 0.7), kappa_tilde=np.array([0.3]))
    with pytest.raises(DomainError):
        cr_log_fS(specs, [p, p], np.zeros(2), covars(w_tilde=[1.0]), EventRecord("exact", time=1.0, cause="X"))
    with pytest.raises(DomainError):
        cr_log_fS(specs, [p, p], np.zeros(2), covars(w_tilde=[1.0]), EventRecord("left", time=1.0))


@pytest.mark.parametrize("kwargs", [dict(status="exact", time=0.0), dict(status="interval", t_left=2.0, t_right=1.0),
                                    dict(status="bogus", time=1.0), dict(status="right")])
def test_invalid_records(kwargs):
    with pytest.raises(DomainError):
        EventRecord(**kwargs)


def test_invalid_time_and_theta():
    with pytest.raises(DomainError):
        gh_hazard(PLAIN, EXP1, np.zeros((1, 2)), covars(), 0.0)
    with pytest.raises(DomainError):
        gh_cum_hazard(PLAIN, EXP1, np.zeros((1, 2)), covars(), -1.0)
    with pytest.raises(DomainError):
        gh_hazard(PLAIN, SurvivalParams((1.0, -1.0)), np.zeros((1, 2)), covars(), 1.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_cum_hazard_matches_quadrature_random_configs(family):
    rng = np.random.default_rng(101)
    t = np.array([0.1, 0.7, 2.3, 6.0])
    for _ in range(10):
        spec, params, cv, b, gamma = random_config(family, rng)
        val = gh_cum_hazard(spec, params, b, cv, t, gamma)
        ref = quad_cum_hazard(lambda u: gh_hazard(spec, params, b, cv, u, gamma), t, scale=val)
        np.testing.assert_array_less(np.abs(val - ref) / ref, 1e-8)
