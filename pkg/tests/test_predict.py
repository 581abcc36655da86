import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghjm.baseline import FAMILIES, BaselineHazard
from ghjm.errors import DomainError, ValidationError
from ghjm.predict import cr_predictive, draw_frame, predictive_baseline, to_long

from oracles import random_params

NAMES = {"lognormal": ("mu", "eta"), "gamma": ("nu", "eta"), "pgw": ("eta", "nu", "delta"),
         "gengamma": ("eta", "nu", "delta")}


def as_named(family, params):
    # sampling names; Gamma is sampled as (shape, scale = 1 / rate)
    if family == "gamma":
        return {"nu": params[0], "eta": 1.0 / params[1]}
    return dict(zip(NAMES[family], params))


def constant_draws(family, params, d=7, prefix=""):
    return pd.DataFrame({prefix + k: np.full(d, v) for k, v in as_named(family, params).items()})


T = np.linspace(0.05, 8.0, 60)


@pytest.mark.parametrize("family", FAMILIES)
def test_degenerate_posterior_equals_plug_in(family):
    params = random_params(family, np.random.default_rng(3))
    out = predictive_baseline(constant_draws(family, params), family, T)
    b = BaselineHazard(family, params)
    np.testing.assert_allclose(out["survival"], b.survival(T), rtol=1e-12)
    np.testing.assert_allclose(out["hazard"], b.hazard(T), rtol=1e-10)
    for stat in ("median", "lo", "hi"):
        np.testing.assert_allclose(out[f"survival_{stat}"], b.survival(T), rtol=1e-12)
        np.testing.assert_allclose(out[f"hazard_{stat}"], b.hazard(T), rtol=1e-10)


def test_exponential_mixture_oracle():
    rates = np.array([0.2, 0.5, 1.0, 3.0])
    draws = pd.DataFrame({"nu": np.ones(4), "eta": 1 / rates})
    out = predictive_baseline(draws, "gamma", T)
    e = np.exp(-np.outer(rates, T))
    np.testing.assert_allclose(out["survival"], e.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(out["hazard"], (rates[:, None] * e).mean(axis=0) / e.mean(axis=0), rtol=1e-12)
    # constant per-draw hazards: quantile bands are quantiles of the rates
    np.testing.assert_allclose(out["hazard_lo"], np.quantile(rates, 0.025), rtol=1e-12)
    np.testing.assert_allclose(out["hazard_hi"], np.quantile(rates, 0.975), rtol=1e-12)
    # a mixture of exponentials has a decreasing predictive hazard
    assert np.all(np.diff(out["hazard"]) < 0)


def test_gamma_rate_column_is_accepted():
    draws = pd.DataFrame({"nu": [2.0, 3.0], "zeta": [0.5, 2.0]})
    alt = pd.DataFrame({"nu": [2.0, 3.0], "eta": [2.0, 0.5]})
    pd.testing.assert_frame_equal(predictive_baseline(draws, "gamma", T), predictive_baseline(alt, "gamma", T))


@settings(max_examples=20)
@given(seed=st.integers(0, 10 ** 6), family=st.sampled_from(FAMILIES))
def test_predictive_curves_are_well_formed(seed, family):
    rng = np.random.default_rng(seed)
    frame = pd.concat([constant_draws(family, random_params(family, rng), d=1) for _ in range(5)],
                      ignore_index=True)
    out = predictive_baseline(frame, family, T)
    s = out["survival"].to_numpy()
    assert np.all(np.diff(s) <= 0) and np.all((s >= 0) & (s <= 1))
    assert np.all(out["hazard"] >= 0)
    assert np.all(out["survival_lo"] <= out["survival_median"] + 1e-15)
    assert np.all(out["survival_median"] <= out["survival_hi"] + 1e-15)


# ---------------------------------------------------------- competing risks

def test_two_exponential_causes_closed_form():
    l1, l2 = 0.3, 0.9
    draws = pd.DataFrame({"a.nu": [1.0], "a.eta": [1 / l1], "b.nu": [1.0], "b.eta": [1 / l2]})
    t = np.linspace(1e-4, 6.0, 20001)
    out = cr_predictive(draws, {"a": "gamma", "b": "gamma"}, t)
    lam = l1 + l2
    for c, l in (("a", l1), ("b", l2)):
        cur = out[out["cause"] == c]
        np.testing.assert_allclose(cur["hazard"], l, rtol=1e-10)
        np.testing.assert_allclose(cur["cif"], l / lam * (1 - np.exp(-lam * t)), atol=1e-7)
    np.testing.assert_allclose(out[out["cause"] == "a"]["survival"], np.exp(-lam * t), rtol=1e-12)


@pytest.mark.parametrize("fams", [("lognormal", "pgw"), ("gengamma", "gamma"), ("pgw", "pgw", "lognormal")])
def test_total_probability_on_dense_grid(fams):
    rng = np.random.default_rng(4)
    causes = [f"c{k}" for k in range(len(fams))]
    frame = {}
    for c, f in zip(causes, fams):
        rows = [as_named(f, random_params(f, rng)) for _ in range(30)]
        for k in rows[0]:
            frame[f"{c}.{k}"] = [r[k] for r in rows]
    t = np.geomspace(1e-4, 20.0, 4000)
    out = cr_predictive(pd.DataFrame(frame), dict(zip(causes, fams)), t)
    total = out.groupby("t")["cif"].sum().to_numpy()
    s = out[out["cause"] == causes[0]]["survival"].to_numpy()
    assert np.max(np.abs(total + s - 1.0)) <= 1e-3
    for c in causes:
        assert np.all(np.diff(out[out["cause"] == c]["cif"]) >= -1e-15)


@pytest.mark.parametrize("family", FAMILIES)
def test_single_cause_cif_is_one_minus_survival(family):
    rng = np.random.default_rng(5)
    frame = pd.concat([constant_draws(family, random_params(family, rng), d=1) for _ in range(10)],
                      ignore_index=True)
    t = np.geomspace(1e-3, 10.0, 3000)
    out = cr_predictive(frame, {"event": family}, t)
    # trapezoid error bound: max |f''| dt^2 / 12 per step, summed
    np.testing.assert_allclose(out["cif"], 1 - out["survival"], atol=1e-3)
    pb = predictive_baseline(frame, family, t)
    np.testing.assert_allclose(out["survival"], pb["survival"], rtol=1e-12)
    np.testing.assert_allclose(out["hazard"], pb["hazard"], rtol=1e-10)


# --------------------------------------------------------------- inputs

@pytest.mark.parametrize("grid, err", [([], ValidationError), ([0.0, 1.0], DomainError),
                                       ([1.0, -2.0], DomainError), ([1.0, np.inf], DomainError),
                                       ([2.0, 1.0], ValidationError), ([1.0, 1.0], ValidationError)])
def test_grid_errors(grid, err):
    with pytest.raises(err):
        predictive_baseline(constant_draws("gamma", (1.0, 1.0)), "gamma", grid)


def test_missing_columns_and_causes():
    with pytest.raises(ValidationError, match="lack baseline column"):
        predictive_baseline(pd.DataFrame({"mu": [0.0]}), "lognormal", T)
    with pytest.raises(ValidationError):
        cr_predictive(constant_draws("gamma", (1.0, 1.0)), {}, T)
    with pytest.raises(ValidationError):
        draw_frame([])


def test_draw_frame_inputs():
    d = {"mu": 0.5, "eta": [1.0]}
    f = draw_frame(d)
    assert list(f.columns) == ["mu", "eta"] and len(f) == 1
    both = draw_frame([f, f])
    assert len(both) == 2


def test_long_format():
    out = predictive_baseline(constant_draws("gamma", (2.0, 1.0)), "gamma", T[:3])
    long = to_long(out, cause="event")
    assert list(long.columns) == ["t", "statistic", "value", "cause"]
    assert len(long) == 3 * 8 and set(long["cause"]) == {"event"}
    cr = cr_predictive(constant_draws("gamma", (2.0, 1.0)), {"x": "gamma"}, T[:3])
    assert set(to_long(cr)["cause"]) == {"x"}


def test_single_grid_point():
    out = cr_predictive(constant_draws("gamma", (1.0, 2.0)), {"x": "gamma"}, [0.5])
    assert out["cif"].iloc[0] == pytest.approx(1 - math.exp(-1.0), rel=1e-12)
