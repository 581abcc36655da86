# %% [markdown]
# # Comparing models by bridge sampling
#
# Two fits to the same Scenario-1 data: the full model and one without the
# shared random slope. The marginal likelihood of each is estimated by
# bridge sampling with the random effects integrated out by quadrature.

# %%
import warnings

from ghjm.model import JointModel
from ghjm.modelsel import comparison_table, lbf_matrix, log_marginal_bridge
from ghjm.sampler import SamplerConfig, run_hmc
from ghjm.simulate import ScenarioConfig, fit_specs, simulate_dataset

cfg = ScenarioConfig.from_scenario("1", n=30, seed=3, censoring_time=6.2)
data, _ = simulate_dataset(cfg)

results, names = [], []
for scenario in ("1", "0"):
    long_spec, specs = fit_specs(scenario, "lognormal")
    model = JointModel(long_spec, specs, data, name=f"scenario {scenario} fit")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        chains = run_hmc(model, SamplerConfig(iterations=800, burn_in=400, thin=4, chains=2, seed=2))
        results.append(log_marginal_bridge(chains, model, space="marginal", nodes=7))
    names.append(model.name)

# %% [markdown]
# Posterior model probabilities assume equal prior weights. Bayes factors
# are reported on the log10 scale.

# %%
print(comparison_table(names, results))
print(lbf_matrix(names, [r.logml for r in results]).round(2))
