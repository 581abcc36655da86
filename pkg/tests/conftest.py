import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import ghjm  # noqa: F401  (enables float64 in jax)
from ghjm.model import JointModel
from ghjm.simulate import ScenarioConfig, fit_specs, simulate_dataset

settings.register_profile("ghjm", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ghjm")


def scenario_model(scenario="1", n=20, baseline="lognormal", seed=3, censoring_time=6.2, **kw):
    cfg = ScenarioConfig.from_scenario(scenario, n=n, baseline=baseline, seed=seed,
                                       censoring_time=censoring_time)
    data, truth = simulate_dataset(cfg)
    long_spec, specs = fit_specs(scenario, baseline)
    return JointModel(long_spec, specs, data, **kw), truth, cfg


@pytest.fixture(scope="session")
def s1_model():
    """Scenario-1 log-normal model on 20 simulated subjects (about 35% censored)."""
    model, truth, _ = scenario_model()
    return model, truth


def random_interior(model, rng, scale=0.3):
    """Random unconstrained point around the pilot estimates."""
    return model.initial_point(rng) + scale * rng.standard_normal(model.dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, repeated in the terminal summary so they survive output capture
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
