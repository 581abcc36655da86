"""Exact simulation from the joint model.

Each subject gets random effects ``b_i ~ N2(0, Sigma)``, then an event
time by inverting its GH survival function at a uniform draw, then
longitudinal measurements at visit times up to the observed time. For a
single cause::

    t_i = H0^{-1}(-log(1 - u) / B) / A,   A = exp(a_i),  B = exp(c_i - a_i)

which is the inverse-CDF form ``F0^{-1}(1 - exp(log(1 - u) / B)) / A``
written on the cumulative hazard scale so that tiny ``u`` keep full
precision. Competing risks use independent latent cause-specific times
and record the first.

Per-subject random streams are derived from ``(seed, subject index)``, so
a subject's record does not depend on ``n`` or on evaluation order.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import pandas as pd

from .baseline import BaselineHazard, check_family
from .dataset import JointDataset
from .errors import DomainError, ValidationError
from .ghsurv import SurvivalCovariates, SurvivalParams, SurvivalSpec, gh_exponents
from .longitudinal import LongitudinalParams, LongitudinalSpec
from .model import BASELINE_SAMPLING, baseline_theta

AGE_GROUPS = ((30.0, 65.0), (65.0, 75.0), (75.0, 85.0))
AGE_WEIGHTS = (0.25, 0.35, 0.4)
AGE_CENTRE, AGE_SCALE = 70.0, 10.0
SCHEDULES = ("equidistant", "exponential", "mixed")


def load_scenarios() -> dict:
    """The shipped scenario file (repository default truths)."""
    text = resources.files("ghjm").joinpath("data/scenarios.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Everything needed to simulate one dataset.

    ``truth`` holds constrained parameter values: longitudinal entries at
    top level and survival entries under ``truth["survival"][cause]``
    (baseline parameters by sampling name, e.g. ``mu``/``eta``).
    ``schedule`` is a dict with ``type`` in ``equidistant`` (``delta``),
    ``exponential`` (``rate``) or ``mixed`` (both: periodic visits plus
    extra visits at exponential gaps). ``censoring_rate`` adds independent
    exponential random censoring.
    """

    scenario: str
    n: int
    longitudinal: LongitudinalSpec
    survival: list
    truth: dict
    censoring_time: float = 30.0
    censoring_rate: float | None = None
    schedule: dict = field(default_factory=lambda: {"type": "equidistant", "delta": 1.0})
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if not (self.censoring_time > 0):
            raise ValidationError("administrative censoring time must be > 0")
        if self.censoring_rate is not None and not self.censoring_rate > 0:
            raise ValidationError("random censoring rate must be > 0")
        check_schedule(self.schedule)
        if isinstance(self.survival, SurvivalSpec):
            self.survival = [self.survival]
        causes = [s.cause for s in self.survival]
        missing = [c for c in causes if c not in self.truth.get("survival", {})]
        if missing:
            raise ValidationError(f"no true survival parameters for causes {missing}")

    @classmethod
    def from_scenario(cls, scenario="1", n=500, baseline="lognormal", seed=0, **overrides):
        """Build a configuration from the shipped defaults.

        ``baseline`` selects the family (with its default truth);
        keyword overrides replace fields, and ``truth`` overrides are
        merged into the defaults.
        """
        data = load_scenarios()
        key = str(scenario)
        if key not in data["scenarios"]:
            raise ValidationError(f"unknown scenario {scenario!r}; expected one of {sorted(data['scenarios'])}")
        entry = data["scenarios"][key]
        entry = data["scenarios"][entry.get("simulate_as", key)]
        long_spec = LongitudinalSpec(**entry["longitudinal"])
        specs = [SurvivalSpec(baseline=baseline, **s) for s in entry["survival"]]
        truth = copy.deepcopy(entry["truth"])
        for s in specs:
            truth["survival"][s.cause].update(data["baselines"][s.baseline])
        truth = _merge(truth, overrides.pop("truth", {}))
        return cls(scenario=key, n=n, longitudinal=long_spec, survival=specs, truth=truth,
                   seed=seed, **overrides)

    def survival_params(self, k: int) -> SurvivalParams:
        spec = self.survival[k]
        tv = self.truth["survival"][spec.cause]
        named = dict(tv)
        if spec.baseline == "gamma" and "zeta" in named and "eta" not in named:
            named["eta"] = 1.0 / named["zeta"]
        for nm, _ in BASELINE_SAMPLING[spec.baseline]:
            if nm not in named:
                raise ValidationError(f"cause {spec.cause!r}: missing true baseline parameter {nm!r}")
        return SurvivalParams(
            theta=baseline_theta(spec.baseline, named),
            kappa=np.asarray(tv.get("kappa", []), dtype=float),
            kappa_tilde=np.asarray(tv.get("kappa_tilde", []), dtype=float),
            lam=np.asarray(tv.get("lambda", []), dtype=float),
            alpha0=float(tv.get("alpha0", 0.0)), alpha1=float(tv.get("alpha1", 0.0)))

    def longitudinal_params(self) -> LongitudinalParams:
        t = self.truth
        return LongitudinalParams(float(t["beta0"]), float(t["beta1"]), np.asarray(t["beta"], dtype=float),
                                  np.asarray(t.get("gamma", []), dtype=float), float(t.get("sigma2", 1.0)))

    @property
    def re_cov(self) -> np.ndarray:
        s1, s2, rho = self.truth["sigma1sq"], self.truth["sigma2sq"], self.truth["rho"]
        c = rho * np.sqrt(s1 * s2)
        return np.array([[s1, c], [c, s2]])


def fit_specs(scenario="1", baseline="lognormal"):
    """``(LongitudinalSpec, [SurvivalSpec])`` used to fit a scenario.

    Identical to the generating model except for Scenario 0, which drops
    the shared random slope.
    """
    data = load_scenarios()
    entry = data["scenarios"][str(scenario)]
    base = data["scenarios"][entry.get("simulate_as", str(scenario))]
    long_spec = LongitudinalSpec(**base["longitudinal"])
    specs = []
    for k, s in enumerate(base["survival"]):
        s = dict(s)
        if "fit_survival" in entry:
            s.update(entry["fit_survival"][k])
        specs.append(SurvivalSpec(baseline=baseline, **s))
    return long_spec, specs


def truth_by_block(cfg: ScenarioConfig, multi: bool | None = None) -> dict:
    """True values keyed like :class:`~ghjm.model.JointModel` blocks."""
    t = cfg.truth
    out = {k: t[k] for k in ("beta0", "beta1", "beta", "gamma", "sigma2", "sigma1sq", "sigma2sq", "rho")
           if k in t}
    multi = len(cfg.survival) > 1 if multi is None else multi
    for spec in cfg.survival:
        p = f"{spec.cause}." if multi else ""
        tv = t["survival"][spec.cause]
        for key, val in tv.items():
            out[p + key] = val
        if spec.baseline == "gamma":
            if p + "eta" not in out:
                out[p + "eta"] = 1.0 / tv["zeta"]
            out[p + "zeta"] = 1.0 / out[p + "eta"]
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def check_schedule(schedule: dict) -> None:
    kind = schedule.get("type")
    if kind not in SCHEDULES:
        raise ValidationError(f"schedule type must be one of {SCHEDULES}, got {kind!r}")
    need = {"equidistant": ("delta",), "exponential": ("rate",), "mixed": ("delta", "rate")}[kind]
    for k in need:
        if not (schedule.get(k, 0) > 0):
            raise ValidationError(f"{kind} schedule needs a positive {k!r}")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def simulate_age(rng, size=None):
    """Raw age from the three-component uniform mixture."""
    comp = rng.choice(len(AGE_WEIGHTS), p=AGE_WEIGHTS, size=size)
    lo = np.asarray([g[0] for g in AGE_GROUPS])[comp]
    hi = np.asarray([g[1] for g in AGE_GROUPS])[comp]
    return rng.uniform(lo, hi)


def simulate_covariates(rng) -> dict:
    age = simulate_age(rng)
    return {"age": (age - AGE_CENTRE) / AGE_SCALE, "sex": float(rng.binomial(1, 0.5)),
            "comorb": float(rng.binomial(1, 0.5))}


def simulate_event_time(spec: SurvivalSpec, params: SurvivalParams, b, covars: SurvivalCovariates, u,
                        gamma=None):
    """Event time solving ``S(t | Psi) = 1 - u`` (vectorised over subjects).

    Raises :class:`DomainError` unless ``0 < u < 1``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("uniform draw must lie strictly inside (0, 1)")
    a, c = gh_exponents(spec, params, np.asarray(b, dtype=float), covars, gamma)
    a, c = np.asarray(a), np.asarray(c)
    base = BaselineHazard(spec.baseline, tuple(float(x) for x in params.theta))
    target = -np.log1p(-u) * np.exp(a - c)
    return base.inverse_cum_hazard(target) * np.exp(-a)


def visit_times(schedule: dict, t_end: float, rng) -> np.ndarray:
    """Measurement times in ``[0, t_end]``; a visit at time 0 is always made."""
    check_schedule(schedule)
    kind = schedule["type"]
    times = [0.0]
    if kind in ("equidistant", "mixed"):
        d = float(schedule["delta"])
        times += list(np.arange(1, int(np.floor(t_end / d)) + 1) * d)
    if kind in ("exponential", "mixed"):
        rate = float(schedule["rate"])
        t = rng.exponential(1.0 / rate)
        while t <= t_end:
            times.append(t)
            t += rng.exponential(1.0 / rate)
    return np.unique(np.asarray(times))


@dataclass
class SubjectRecord:
    subject_id: str
    covariates: dict
    b: np.ndarray
    time: float
    status: str
    cause: str
    obs_times: np.ndarray
    outcomes: np.ndarray
    latent_times: dict = field(default_factory=dict)


def _simulate_records(cfg: ScenarioConfig, indices) -> list[SubjectRecord]:
    rngs = [np.random.default_rng([int(cfg.seed), int(i)]) for i in indices]
    n = len(rngs)
    K = len(cfg.survival)
    covs = [simulate_covariates(r) for r in rngs]
    L = np.linalg.cholesky(cfg.re_cov)
    b = np.array([L @ r.standard_normal(2) for r in rngs]).reshape(n, 2)
    u = np.clip(np.array([r.uniform(size=K) for r in rngs]).reshape(n, K), 1e-300, 1 - 1e-16)
    c_rand = np.array([r.exponential(1.0 / cfg.censoring_rate) if cfg.censoring_rate else np.inf
                       for r in rngs])
    frame = pd.DataFrame(covs)
    s, xt = cfg.longitudinal.design(frame)
    lp = cfg.longitudinal_params()
    latent = np.column_stack([
        simulate_event_time(spec, cfg.survival_params(k), b, spec.design(frame, x_tilde=xt), u[:, k], lp.gamma)
        for k, spec in enumerate(cfg.survival)])
    first = np.argmin(latent, axis=1)
    t_event = latent[np.arange(n), first]
    t_cens = np.minimum(cfg.censoring_time, c_rand)
    beta, gamma = np.asarray(lp.beta), np.asarray(lp.gamma)
    p1, p2 = cfg.longitudinal.p1_degree, cfg.longitudinal.p2_degree
    recs = []
    for j, (i, rng) in enumerate(zip(indices, rngs)):
        if t_event[j] <= t_cens[j]:
            time, status, cause = t_event[j], "exact", cfg.survival[first[j]].cause
        else:
            time, status, cause = t_cens[j], "right", ""
        obs_t = visit_times(cfg.schedule, time, rng)
        eta = (lp.beta0 + s[j] @ beta + (xt[j] @ gamma) * obs_t ** p1
               + b[j, 0] + (lp.beta1 + b[j, 1]) * obs_t ** p2)
        if cfg.longitudinal.family == "gaussian":
            y = eta + rng.normal(scale=np.sqrt(lp.sigma2), size=eta.shape)
        else:
            y = rng.binomial(1, 1.0 / (1.0 + np.exp(-eta))).astype(float)
        recs.append(SubjectRecord(f"{i + 1}", covs[j], b[j], float(time), status, cause, obs_t, y,
                                  {spec.cause: float(latent[j, k]) for k, spec in enumerate(cfg.survival)}))
    return recs


def simulate_subject(cfg: ScenarioConfig, i: int) -> SubjectRecord:
    """Simulate subject ``i`` from its own ``(seed, i)`` random stream."""
    return _simulate_records(cfg, [i])[0]


def simulate_dataset(cfg: ScenarioConfig, start: int = 0) -> tuple[JointDataset, dict]:
    """Simulate ``cfg.n`` subjects; returns the dataset and the realised
    random effects (``b``, shape ``(n, 2)``) alongside the true values.

    Subjects whose event precedes every visit after time 0 keep their
    single baseline measurement.
    """
    recs = _simulate_records(cfg, range(start, start + cfg.n))
    outcome = cfg.longitudinal.outcome
    subj = pd.DataFrame({
        "subject_id": [r.subject_id for r in recs],
        "status": [r.status for r in recs],
        "time": [r.time for r in recs],
        "cause": [r.cause for r in recs],
        **{k: [r.covariates[k] for r in recs] for k in recs[0].covariates},
    })
    lg = pd.DataFrame({
        "subject_id": np.concatenate([[r.subject_id] * len(r.obs_times) for r in recs]),
        "time": np.concatenate([r.obs_times for r in recs]),
        outcome: np.concatenate([r.outcomes for r in recs]),
    })
    truth = {"values": truth_by_block(cfg), "b": np.array([r.b for r in recs]),
             "censoring_proportion": float(np.mean([r.status == "right" for r in recs]))}
    return JointDataset(subj, lg, outcome), truth


# ---------------------------------------------------------------------------
# censoring calibration
# ---------------------------------------------------------------------------

def simulate_event_times_bulk(cfg: ScenarioConfig, n_sim: int, rng) -> np.ndarray:
    """Observed (first) event times of ``n_sim`` subjects, vectorised."""
    age = (simulate_age(rng, n_sim) - AGE_CENTRE) / AGE_SCALE
    frame = pd.DataFrame({"age": age, "sex": rng.binomial(1, 0.5, n_sim).astype(float),
                          "comorb": rng.binomial(1, 0.5, n_sim).astype(float)})
    b = rng.multivariate_normal(np.zeros(2), cfg.re_cov, size=n_sim, method="cholesky")
    _, xt = cfg.longitudinal.design(frame)
    gamma = cfg.longitudinal_params().gamma
    times = np.full(n_sim, np.inf)
    for k, spec in enumerate(cfg.survival):
        u = np.clip(rng.uniform(size=n_sim), 1e-300, 1 - 1e-16)
        tk = simulate_event_time(spec, cfg.survival_params(k), b, spec.design(frame, x_tilde=xt), u, gamma)
        times = np.minimum(times, tk)
    return times


def calibrate_censoring(cfg: ScenarioConfig, target: float, n_sim: int = 100_000, seed: int = 12345,
                        tol: float = 1e-4) -> float:
    """Administrative censoring time giving censoring proportion ``target``.

    Bisection on the simulated censoring proportion of ``n_sim`` subjects
    (common random numbers throughout). Random censoring in ``cfg`` is
    included.
    """
    if not 0 < target < 1:
        raise DomainError("target censoring rate must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    t = simulate_event_times_bulk(cfg, n_sim, rng)
    c_rand = rng.exponential(1.0 / cfg.censoring_rate, n_sim) if cfg.censoring_rate else np.full(n_sim, np.inf)

    def rate(c):
        return np.mean(t > np.minimum(c, c_rand))

    hi = float(np.max(t[np.isfinite(t)])) * 2.0
    if rate(hi) > target:
        raise DomainError(f"target {target} unattainable: random censoring alone gives {rate(hi):.3f}")
    lo = float(np.min(t)) * 0.5
    if rate(lo) < target:
        raise DomainError(f"target {target} unattainable with administrative censoring")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    return hi


def tabulated_censoring_time(scenario: str, baseline: str, target: float) -> float | None:
    """Shipped calibrated censoring time for a default scenario, or ``None``.

    Scenario ``0`` shares the data of scenario ``1``.
    """
    sc = load_scenarios()
    scenario = str(scenario)
    scenario = sc["scenarios"].get(scenario, {}).get("simulate_as", scenario)
    entry = sc.get("censoring", {}).get(scenario, {}).get(check_family(baseline), {})
    for key, value in entry.items():
        if np.isclose(float(key), target):
            return float(value)
    return None


def with_censoring(cfg: ScenarioConfig, target: float, **kw) -> ScenarioConfig:
    """Copy of ``cfg`` with the calibrated administrative censoring time."""
    return replace(cfg, censoring_time=calibrate_censoring(cfg, target, **kw))
