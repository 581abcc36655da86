"""Command-line front end: ``simulate``, ``fit``, ``compare`` and ``predict``.

Configs are single JSON or YAML documents validated against the schemas
below (unknown keys are rejected). Exit status is 0 on success, 1 for
invalid input and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd
import yaml

from .dataset import JointDataset
from .errors import DomainError, NumericalError, ShapeError, ValidationError
from .ghsurv import SurvivalSpec
from .longitudinal import LongitudinalSpec
from .model import JointModel
from .modelsel import comparison_table, lbf_matrix, log_marginal_bridge
from .predict import cr_predictive, predictive_baseline, to_long
from .priors import PriorConfig
from .sampler import SamplerConfig, diagnostics, run_hmc
from .simulate import ScenarioConfig, calibrate_censoring, simulate_dataset

FAMILY_NAMES = ["lognormal", "ln", "gamma", "pgw", "gengamma", "gg", "generalised_gamma",
                "generalized_gamma"]

_COVARIATE = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "additionalProperties": False, "required": ["name"],
         "properties": {"name": {"type": "string"}, "expansion": {"enum": ["raw", "bspline"]},
                        "degree": {"type": "integer", "minimum": 1},
                        "n_interior_knots": {"type": "integer", "minimum": 0},
                        "knots": {"type": "array", "items": {"type": "number"}, "minItems": 2}}},
    ]
}
_NAMES = {"type": "array", "items": {"type": "string"}}
LONGITUDINAL_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {"covariates": {"type": "array", "items": _COVARIATE}, "time_varying": _NAMES,
                   "p1_degree": {"type": "integer", "minimum": 1}, "p2_degree": {"type": "integer", "minimum": 1},
                   "family": {"enum": ["gaussian", "bernoulli"]}, "outcome": {"type": "string"}},
}
SURVIVAL_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {"cause": {"type": "string"}, "baseline": {"enum": FAMILY_NAMES},
                   "time_covariates": _NAMES, "hazard_covariates": _NAMES,
                   "expansions": {"type": "array", "items": _COVARIATE},
                   "share_intercept": {"type": "boolean"}, "share_slope": {"type": "boolean"},
                   "share_gamma": {"type": "boolean"}},
}
_POS = {"type": "number", "exclusiveMinimum": 0}
PRIOR_SCHEMA = {"type": "object", "additionalProperties": False,
                "properties": {k: ({"type": ["number", "null"], "exclusiveMinimum": 0}
                                   if k in ("g_beta", "g_lambda") else _POS)
                               for k in PriorConfig.__dataclass_fields__}}
SAMPLER_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "properties": {"iterations": {"type": "integer", "minimum": 1}, "burn_in": {"type": "integer", "minimum": 0},
                   "thin": {"type": "integer", "minimum": 1}, "chains": {"type": "integer", "minimum": 1},
                   "target_accept": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                   "max_leapfrog": {"type": "integer", "minimum": 1}, "integration_time": _POS,
                   "seed": {"type": "integer", "minimum": 0}, "init_jitter": _POS, "divergence_warn": _POS},
}
MODEL_SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["survival"],
    "properties": {
        "name": {"type": "string"},
        "longitudinal": LONGITUDINAL_SCHEMA,
        "survival": {"oneOf": [SURVIVAL_SCHEMA, {"type": "array", "items": SURVIVAL_SCHEMA, "minItems": 1}]},
        "fixed": {"type": "object", "additionalProperties": {"oneOf": [
            {"type": "number"}, {"type": "array", "items": {"type": "number"}}]}},
        "priors": PRIOR_SCHEMA,
        "sampler": SAMPLER_SCHEMA,
    },
}
SCENARIO_SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["n"],
    "properties": {
        "scenario": {"type": ["string", "integer"]},
        "n": {"type": "integer"},
        "baseline": {"enum": FAMILY_NAMES},
        "censoring_time": _POS,
        "censoring_target": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "censoring_rate": _POS,
        "schedule": {"type": "object", "additionalProperties": False, "required": ["type"],
                     "properties": {"type": {"enum": ["equidistant", "exponential", "mixed"]},
                                    "delta": _POS, "rate": _POS}},
        "longitudinal": LONGITUDINAL_SCHEMA,
        "survival": {"type": "array", "items": SURVIVAL_SCHEMA, "minItems": 1},
        "truth": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

RUN_FILE = "run.json"


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_document(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {p}: {exc}") from exc
    try:
        doc = json.loads(text) if p.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot parse config {p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"config {p} must be a mapping")
    return doc


def validate_document(doc: dict, schema: dict, what: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        lines = [f"  {'/'.join(str(x) for x in e.path) or '<root>'}: {e.message}" for e in errors]
        raise ValidationError(f"invalid {what} config:\n" + "\n".join(lines))


def model_from_config(doc: dict, data: JointDataset) -> JointModel:
    validate_document(doc, MODEL_SCHEMA, "model")
    long_spec = LongitudinalSpec(**doc.get("longitudinal", {}))
    surv = doc["survival"]
    surv = [surv] if isinstance(surv, dict) else surv
    specs = [SurvivalSpec(**s) for s in surv]
    return JointModel(long_spec, specs, data, PriorConfig.from_dict(doc.get("priors")),
                      fixed=doc.get("fixed"), name=doc.get("name", "model"))


def scenario_from_config(doc: dict, seed: int | None) -> tuple[ScenarioConfig, float | None]:
    validate_document(doc, SCENARIO_SCHEMA, "scenario")
    doc = dict(doc)
    if doc["n"] < 1:
        raise ValidationError("n must be >= 1")
    seed = seed if seed is not None else doc.pop("seed", 0)
    doc.pop("seed", None)
    target = doc.pop("censoring_target", None)
    scenario = str(doc.pop("scenario", "1"))
    baseline = doc.pop("baseline", "lognormal")
    if scenario == "custom":
        if "longitudinal" not in doc or "survival" not in doc or "truth" not in doc:
            raise ValidationError("custom scenarios need longitudinal, survival and truth")
        cfg = ScenarioConfig(scenario="custom", n=doc.pop("n"),
                             longitudinal=LongitudinalSpec(**doc.pop("longitudinal")),
                             survival=[SurvivalSpec(**s) for s in doc.pop("survival")],
                             truth=doc.pop("truth"), seed=seed, **doc)
    else:
        for k in ("longitudinal", "survival"):
            if k in doc:
                raise ValidationError(f"{k!r} may only be given for custom scenarios")
        cfg = ScenarioConfig.from_scenario(scenario, baseline=baseline, seed=seed, **doc)
    return cfg, target


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def summary_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Posterior mean, median, 2.5% and 97.5% quantiles (type 7) and P(> 0)."""
    q = frame.quantile([0.5, 0.025, 0.975], interpolation="linear")
    return pd.DataFrame({
        "parameter": frame.columns,
        "mean": frame.mean().to_numpy(),
        "median": q.loc[0.5].to_numpy(),
        "q2.5": q.loc[0.025].to_numpy(),
        "q97.5": q.loc[0.975].to_numpy(),
        "P(>0)": [f"{v:.3f}" for v in (frame > 0).mean().to_numpy()],
    })


def _is_random_effect(name: str) -> bool:
    return name.startswith("b0[") or name.startswith("b1[")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(config, out, seed=None) -> Path:
    cfg, target = scenario_from_config(load_document(config), seed)
    if target is not None:
        cfg.censoring_time = calibrate_censoring(cfg, target)
    data, truth = simulate_dataset(cfg)
    out = Path(out)
    data.to_csv(out)
    _write_json(out / "truth.json", {
        "scenario": cfg.scenario, "n": cfg.n, "seed": cfg.seed, "baseline": [s.baseline for s in cfg.survival],
        "censoring_time": cfg.censoring_time, "censoring_rate": cfg.censoring_rate,
        "censoring_proportion": truth["censoring_proportion"], "schedule": cfg.schedule,
        "values": truth["values"], "b": truth["b"],
        "note": "true values are repository defaults unless overridden in the config",
    })
    return out


def cmd_fit(config, data_dir, out, seed=None) -> Path:
    doc = load_document(config)
    validate_document(doc, MODEL_SCHEMA, "model")
    data = JointDataset.from_dir(data_dir, outcome=doc.get("longitudinal", {}).get("outcome", "outcome"))
    model = model_from_config(doc, data)
    scfg = dict(doc.get("sampler", {}))
    if seed is not None:
        scfg["seed"] = seed
    scfg = SamplerConfig.from_dict(scfg)
    chains = run_hmc(model, scfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for ch in chains:
        ch.constrained.to_csv(out / f"chain_{ch.chain}.csv", index=False, float_format="%.17g")
        pd.DataFrame(ch.draws, columns=model.layout.names).to_csv(
            out / f"chain_{ch.chain}_unconstrained.csv", index=False, float_format="%.17g")
    diag = diagnostics(chains)
    diag.to_csv(out / "diagnostics.csv", float_format="%.6g")
    frame = pd.concat([c.constrained for c in chains], ignore_index=True)
    keep = [c for c in frame.columns if not _is_random_effect(c)]
    summary_table(frame[keep]).to_csv(out / "summary.csv", index=False, float_format="%.6g")
    _write_json(out / RUN_FILE, {
        "model": doc, "name": model.name, "data_dir": str(Path(data_dir).resolve()),
        "dataset_hash": data.content_hash(), "sampler": scfg.__dict__, "chains": len(chains),
        "step_size": [c.step_size for c in chains], "mean_accept": [c.mean_accept for c in chains],
        "divergent": [c.adaptation["divergent_after_burn_in"] for c in chains],
    })
    return out


def _load_run(run_dir):
    run_dir = Path(run_dir)
    if not (run_dir / RUN_FILE).exists():
        raise ValidationError(f"{run_dir} is not a fitted run (missing {RUN_FILE})")
    meta = json.loads((run_dir / RUN_FILE).read_text(encoding="utf-8"))
    n_chains = meta["chains"]
    unc = [pd.read_csv(run_dir / f"chain_{c}_unconstrained.csv").to_numpy(float) for c in range(n_chains)]
    con = [pd.read_csv(run_dir / f"chain_{c}.csv") for c in range(n_chains)]
    return meta, unc, con


def cmd_compare(runs, out, seed=None, space="marginal") -> Path:
    """Bridge-sampling comparison of fitted runs sharing one dataset.

    By default the random effects are integrated out by quadrature
    (``space="marginal"``); ``"augmented"`` bridges over them as well.
    """
    if len(runs) < 1:
        raise ValidationError("compare needs at least one run")
    loaded = [_load_run(r) for r in runs]
    hashes = {m["dataset_hash"] for m, _, _ in loaded}
    if len(hashes) != 1:
        raise ValidationError("runs were fitted to different datasets (dataset hashes differ)")
    names, results = [], []
    for (meta, unc, _), r in zip(loaded, runs):
        data = JointDataset.from_dir(meta["data_dir"],
                                     outcome=meta["model"].get("longitudinal", {}).get("outcome", "outcome"))
        if data.content_hash() != meta["dataset_hash"]:
            raise ValidationError(f"dataset for run {r} changed since fitting")
        model = model_from_config(meta["model"], data)
        results.append(log_marginal_bridge(unc, model, seed=0 if seed is None else seed, space=space))
        names.append(meta.get("name") or Path(r).name)
    if len(set(names)) != len(names):
        names = [f"{n}#{i + 1}" for i, n in enumerate(names)]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    comparison_table(names, results).to_csv(out / "comparison.csv", index=False, float_format="%.10g")
    lbf_matrix(names, [r.logml for r in results]).to_csv(out / "lbf.csv", float_format="%.10g")
    return out


def parse_grid(spec: str | None, t_max: float) -> np.ndarray:
    if spec is None:
        return np.linspace(t_max / 200.0, t_max, 200)
    try:
        parts = [float(x) for x in spec.split(":")]
    except ValueError as exc:
        raise ValidationError(f"grid must be start:stop:num, got {spec!r}") from exc
    if len(parts) != 3 or parts[2] < 2 or int(parts[2]) != parts[2]:
        raise ValidationError(f"grid must be start:stop:num with num >= 2, got {spec!r}")
    return np.linspace(parts[0], parts[1], int(parts[2]))


def cmd_predict(run, out, grid=None, seed=None) -> Path:
    meta, _, con = _load_run(run)
    surv = meta["model"]["survival"]
    surv = [surv] if isinstance(surv, dict) else surv
    specs = [SurvivalSpec(**s) for s in surv]
    data = pd.read_csv(Path(meta["data_dir"]) / "survival.csv")
    t_max = float(np.nanmax(data[["time", "t_right"]].to_numpy(float))) if "t_right" in data \
        else float(data["time"].max())
    t = parse_grid(grid, t_max)
    if len(specs) == 1:
        curves = to_long(predictive_baseline(con, specs[0].baseline, t), cause=specs[0].cause)
        cr = cr_predictive(con, {specs[0].cause: specs[0].baseline}, t)
        cif = to_long(cr[["t", "cause", "cif", "cif_median", "cif_lo", "cif_hi"]])
        curves = pd.concat([curves, cif], ignore_index=True)
    else:
        curves = to_long(cr_predictive(con, {s.cause: s.baseline for s in specs}, t))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    curves.to_csv(out / "curves.csv", index=False, float_format="%.10g")
    return out


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides config)")
    p = argparse.ArgumentParser(prog="ghjm", description="Joint longitudinal / GH survival models",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate a dataset from a scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    f = sub.add_parser("fit", parents=[common], help="fit a model by HMC")
    f.add_argument("--config", required=True)
    f.add_argument("--data", required=True, help="directory with survival.csv and longitudinal.csv")
    f.add_argument("--out", required=True)
    c = sub.add_parser("compare", parents=[common], help="compare fitted runs by bridge sampling")
    c.add_argument("runs", nargs="+")
    c.add_argument("--out", required=True)
    c.add_argument("--space", choices=["marginal", "augmented"], default="marginal",
                   help="integrate random effects by quadrature (default) or bridge over them")
    r = sub.add_parser("predict", parents=[common], help="predictive baseline curves and CIFs")
    r.add_argument("--run", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--grid", default=None, help="start:stop:num (default: 200 points up to the last time)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    seed = getattr(args, "seed", None)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out, seed)
        elif args.command == "fit":
            cmd_fit(args.config, args.data, args.out, seed)
        elif args.command == "compare":
            cmd_compare(args.runs, args.out, seed, args.space)
        else:
            cmd_predict(args.run, args.out, args.grid, seed)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, DomainError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
