# %% [markdown]
# # Simulating and fitting a joint model
#
# Scenario 1 pairs a linear mixed model for a biomarker with a log-normal
# survival model. The random intercept enters the hazard scale and the
# random slope the time scale.

# %%
import warnings

import numpy as np
import pandas as pd

from ghjm.model import JointModel
from ghjm.sampler import SamplerConfig, diagnostics, run_hmc
from ghjm.simulate import ScenarioConfig, fit_specs, simulate_dataset, tabulated_censoring_time

# %% [markdown]
# Administrative censoring times for 5%, 35% and 60% censoring are shipped
# for every default scenario and baseline.

# %%
censoring_time = tabulated_censoring_time("1", "lognormal", 0.35)
cfg = ScenarioConfig.from_scenario("1", n=60, baseline="lognormal", seed=7, censoring_time=censoring_time)
data, truth = simulate_dataset(cfg)
print(data.subjects.head())
print(f"censored: {truth['censoring_proportion']:.0%}")

# %% [markdown]
# The fitted model has the same structure as the generating one. The run
# is shorter than the defaults to keep the example quick; an R-hat above
# 1.01 is the signal to run longer.

# %%
long_spec, specs = fit_specs("1", "lognormal")
model = JointModel(long_spec, specs, data)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    chains = run_hmc(model, SamplerConfig(iterations=1500, burn_in=750, thin=3, chains=2, seed=1))

draws = pd.concat([c.constrained for c in chains], ignore_index=True)
keep = [c for c in draws.columns if not c.startswith(("b0[", "b1["))]
diag = diagnostics(chains)

# %%
values = truth["values"]
for name in ("beta0", "beta1", "sigma2", "sigma1sq", "sigma2sq", "rho", "mu", "eta", "alpha0", "alpha1"):
    lo, hi = np.quantile(draws[name], [0.025, 0.975])
    print(f"{name:>9}  true {values[name]:6.2f}  mean {draws[name].mean():6.2f}  95% CI ({lo:6.2f}, {hi:6.2f})  "
          f"R-hat {diag.loc[name, 'rhat']:.3f}")
