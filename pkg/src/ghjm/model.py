"""Joint model assembly: designs, parameter layout and the log posterior.

A :class:`JointModel` binds a longitudinal specification, one GH survival
specification per cause, a dataset and a prior configuration. It exposes
the log posterior on a flat unconstrained vector, suitable for gradient
based samplers. Random effects are sampled jointly with the parameters in
non-centred form, ``b_i = L z_i`` with ``L`` the Cholesky factor of the
random-effects covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd

from . import priors as pr
from .baseline import check_family
from .dataset import JointDataset
from .errors import NumericalError, ShapeError, ValidationError
from .ghsurv import (EXACT, INTERVAL, LEFT, STATUS_CODES, SurvivalParams,
                     SurvivalSpec, gh_log_hazard_cum, log_fs_from_cum, warn_if_weibull_equivalent)
from .longitudinal import (LongitudinalParams, LongitudinalSpec, linear_predictor,
                           log_density_from_predictor, re_cholesky, re_log_density, spline_blocks)

# sampling names and transform kinds of the baseline parameters
BASELINE_SAMPLING = {
    "lognormal": (("mu", "real"), ("eta", "positive")),
    "gamma": (("nu", "positive"), ("eta", "positive")),
    "pgw": (("eta", "positive"), ("nu", "positive"), ("delta", "positive")),
    "gengamma": (("eta", "positive"), ("nu", "positive"), ("delta", "positive")),
}
VECTOR_BLOCKS = ("beta", "gamma", "z", "kappa", "kappa_tilde", "lambda")


def baseline_theta(family: str, named: dict) -> tuple:
    """Kernel parameter tuple from sampling-named values (Gamma: rate = 1/eta)."""
    if family == "lognormal":
        return (named["mu"], named["eta"])
    if family == "gamma":
        return (named["nu"], 1.0 / named["eta"])
    return (named["eta"], named["nu"], named["delta"])


@dataclass(frozen=True)
class ParamBlock:
    name: str
    size: int
    kind: str
    labels: tuple
    cause: int | None = None


class ParameterLayout:
    """Ordered blocks with a bijection to one flat unconstrained vector."""

    def __init__(self, blocks):
        self.blocks = list(blocks)
        self.slices = {}
        start = 0
        for blk in self.blocks:
            self.slices[blk.name] = slice(start, start + blk.size)
            start += blk.size
        self.dim = start
        self.by_name = {b.name: b for b in self.blocks}

    @property
    def names(self) -> list[str]:
        return [lab for b in self.blocks for lab in b.labels]

    def __contains__(self, name):
        return name in self.by_name

    def unflatten(self, flat):
        """``(constrained dict, elementwise log-Jacobian vector)``."""
        out, logj = {}, []
        for blk in self.blocks:
            u = flat[self.slices[blk.name]]
            x, lj = pr.from_unconstrained(u, blk.kind)
            out[blk.name] = x
            logj.append(lj)
        return out, (jnp.concatenate(logj) if logj else jnp.zeros(0))

    def flatten(self, values: dict) -> np.ndarray:
        flat = np.zeros(self.dim)
        for blk in self.blocks:
            v = np.asarray(values[blk.name], dtype=float).ravel()
            if v.size != blk.size:
                raise ShapeError(f"block {blk.name!r} expects {blk.size} values, got {v.size}")
            flat[self.slices[blk.name]] = pr.to_unconstrained(v, blk.kind)
        return flat


class JointModel:
    """Joint longitudinal / GH-survival model bound to a dataset.

    Parameters
    ----------
    longitudinal : LongitudinalSpec
    survival : SurvivalSpec or sequence of SurvivalSpec
        One specification per cause; more than one gives a cause-specific
        competing-risks model.
    data : JointDataset
    priors : PriorConfig, optional
    fixed : dict, optional
        Parameters held at constant (constrained) values, keyed by block
        name (e.g. ``"delta"`` or ``"ISC.alpha1"``).
    name : str, optional
    """

    def __init__(self, longitudinal: LongitudinalSpec, survival, data: JointDataset,
                 priors: pr.PriorConfig | None = None, fixed: dict | None = None, name: str = "model"):
        self.name = name
        self.data = data
        self.prior_cfg = priors or pr.PriorConfig()
        specs = [survival] if isinstance(survival, SurvivalSpec) else list(survival)
        if not specs:
            raise ValidationError("at least one survival specification is required")
        causes = [s.cause for s in specs]
        if len(set(causes)) != len(causes):
            raise ValidationError(f"duplicate cause labels {causes}")
        frame = data.subjects
        self.n = data.n_subjects
        self.subject_ids = frame["subject_id"].to_numpy()
        self.long_spec = longitudinal.fit(frame) if len(frame) else longitudinal
        self.surv_specs = [s.fit(frame) if len(frame) else s for s in specs]
        self.multi = len(specs) > 1
        self.prefixes = [f"{s.cause}." if self.multi else "" for s in self.surv_specs]

        self._build_data()
        self._build_layout(fixed or {})
        self._build_gpriors()
        for k, spec in enumerate(self.surv_specs):
            d = self.fixed.get(self.prefixes[k] + "delta")
            warn_if_weibull_equivalent(spec, None if d is None else float(np.asarray(d)))

        self._log_density = jax.jit(self._log_density_impl)
        self._value_and_grad = jax.jit(jax.value_and_grad(self._log_density_impl))
        self._pieces = jax.jit(self._pieces_impl)

    # ------------------------------------------------------------ data
    def _build_data(self):
        frame = self.data.subjects
        n = self.n
        # an empty frame still yields designs of the right width; spline
        # terms then need knots given up front
        s_l, xt = self.long_spec.design(frame)
        self.S_long = s_l
        self.X_tilde = xt
        self.beta_names = self.long_spec.beta_names()
        if s_l.shape[1] != len(self.beta_names):
            raise ShapeError("longitudinal design width does not match its column names")

        lg = self.data.longitudinal
        outcome = self.long_spec.outcome if self.long_spec.outcome in lg else self.data.outcome
        index = {sid: i for i, sid in enumerate(self.subject_ids)}
        self.obs_subject = np.array([index[s] for s in lg["subject_id"]], dtype=int)
        self.obs_time = lg["time"].to_numpy(float)
        self.obs_y = lg[outcome].to_numpy(float)
        if self.long_spec.family == "bernoulli" and np.any((self.obs_y != 0) & (self.obs_y != 1)):
            raise ValidationError("bernoulli outcomes must be coded 0/1")
        self.S_obs = s_l[self.obs_subject]
        self.Xt_obs = xt[self.obs_subject]

        self.covars = [spec.design(frame, x_tilde=xt) for spec in self.surv_specs]
        status = frame["status"].map(STATUS_CODES).to_numpy(int) if n else np.zeros(0, int)
        t = frame["time"].to_numpy(float)
        tl = frame["t_left"].to_numpy(float)
        tr = frame["t_right"].to_numpy(float)
        is_int = status == INTERVAL
        self.status = status
        self.t1 = np.where(is_int, tl, t)
        self.t2 = np.where(is_int, tr, self.t1)
        self.has_interval = bool(is_int.any())
        if self.multi:
            if np.any((status == LEFT) | (status == INTERVAL)):
                raise ValidationError("competing-risks data must be exact or right-censored")
            labels = [s.cause for s in self.surv_specs]
            cause_idx = np.full(n, -1)
            for i, (st, c) in enumerate(zip(status, frame["cause"])):
                if st == EXACT:
                    if c not in labels:
                        raise ValidationError(f"subject {self.subject_ids[i]}: unknown cause {c!r}")
                    cause_idx[i] = labels.index(c)
            self.cause_idx = cause_idx
        else:
            self.cause_idx = np.where(status == EXACT, 0, -1)

    # ---------------------------------------------------------- layout
    def _build_layout(self, fixed):
        ls = self.long_spec
        blocks = [
            ParamBlock("beta0", 1, "real", ("beta0",)),
            ParamBlock("beta1", 1, "real", ("beta1",)),
            ParamBlock("beta", len(self.beta_names), "real",
                       tuple(f"beta[{c}]" for c in self.beta_names)),
            ParamBlock("gamma", len(ls.time_varying), "real",
                       tuple(f"gamma[{c}]" for c in ls.time_varying)),
        ]
        if ls.family == "gaussian":
            blocks.append(ParamBlock("sigma2", 1, "positive", ("sigma2",)))
        blocks += [
            ParamBlock("sigma1sq", 1, "positive", ("sigma1sq",)),
            ParamBlock("sigma2sq", 1, "positive", ("sigma2sq",)),
            ParamBlock("rho", 1, "correlation", ("rho",)),
            ParamBlock("z", 2 * self.n, "real",
                       tuple(f"z{j}[{sid}]" for sid in self.subject_ids for j in (0, 1))),
        ]
        for k, spec in enumerate(self.surv_specs):
            p = self.prefixes[k]
            for nm, kind in BASELINE_SAMPLING[spec.baseline]:
                blocks.append(ParamBlock(p + nm, 1, kind, (p + nm,), k))
            cv = self.covars[k]
            blocks.append(ParamBlock(p + "kappa", cv.w.shape[1], "real",
                                     tuple(f"{p}kappa[{c}]" for c in spec.time_covariates), k))
            blocks.append(ParamBlock(p + "kappa_tilde", cv.w_tilde.shape[1], "real",
                                     tuple(f"{p}kappa_tilde[{c}]" for c in spec.hazard_covariates), k))
            blocks.append(ParamBlock(p + "lambda", cv.s.shape[1], "real",
                                     tuple(f"{p}lambda[{c}]" for c in spec.lambda_names()), k))
            if spec.share_intercept:
                blocks.append(ParamBlock(p + "alpha0", 1, "real", (p + "alpha0",), k))
            if spec.share_slope:
                blocks.append(ParamBlock(p + "alpha1", 1, "real", (p + "alpha1",), k))
        self.all_blocks = {b.name: b for b in blocks}
        unknown = sorted(set(fixed) - set(self.all_blocks))
        if unknown:
            raise ValidationError(f"cannot fix unknown parameters {unknown}")
        if "z" in fixed:
            raise ValidationError("random effects cannot be fixed")
        self.fixed = {}
        for k, v in fixed.items():
            blk = self.all_blocks[k]
            arr = np.asarray(v, dtype=float).ravel()
            if arr.size != blk.size:
                raise ShapeError(f"fixed value for {k!r} needs {blk.size} entries")
            pr.to_unconstrained(arr, blk.kind)  # domain check
            self.fixed[k] = arr
        self.layout = ParameterLayout([b for b in blocks if b.name not in self.fixed and b.size > 0])
        self.dim = self.layout.dim

    def _build_gpriors(self):
        cfg = self.prior_cfg
        n = max(self.n, 1)
        self.g_long = []
        for name, sl in spline_blocks(self.long_spec.covariates):
            deg = next(c.degree for c in self.long_spec.covariates if c.name == name)
            g = cfg.g_beta if cfg.g_beta is not None else pr.g_factor(n, deg)
            self.g_long.append((sl, pr.GPrior.from_design(f"beta:{name}", self.S_long[:, sl], g)))
        self.g_surv = []
        for k, spec in enumerate(self.surv_specs):
            blocks = []
            for name, sl in spline_blocks(spec.expansions):
                deg = next(c.degree for c in spec.expansions if c.name == name)
                g = cfg.g_lambda if cfg.g_lambda is not None else pr.g_factor(n, deg)
                blocks.append((sl, pr.GPrior.from_design(f"{self.prefixes[k]}lambda:{name}",
                                                         self.covars[k].s[:, sl], g)))
            self.g_surv.append(blocks)

    # ------------------------------------------------------ parameters
    def unpack(self, flat):
        """Constrained parameter dict (random effects as ``b``) and the
        total log-Jacobian of the unconstrained-to-constrained map."""
        flat = jnp.asarray(flat, dtype=float)
        if flat.shape[-1] != self.dim:
            raise ShapeError(f"parameter vector has length {flat.shape[-1]}, expected {self.dim}")
        vals, logj = self.layout.unflatten(flat)
        params = {k: jnp.zeros(0) for k, b in self.all_blocks.items() if b.size == 0}
        params.update({k: jnp.asarray(v) for k, v in self.fixed.items()})
        params.update(vals)
        params = {k: (v if k.split(".")[-1] in VECTOR_BLOCKS else v[0]) for k, v in params.items()}
        z = params.pop("z").reshape(self.n, 2)
        L = re_cholesky(params["sigma1sq"], params["sigma2sq"], params["rho"])
        params["b"] = z @ L.T
        log_det_l = 0.5 * (jnp.log(params["sigma1sq"]) + jnp.log(params["sigma2sq"])
                           + jnp.log1p(-params["rho"] ** 2))
        return params, logj, log_det_l

    def params_dict(self, values: dict) -> dict:
        """Constrained parameter dict (without random effects) from named
        values; fixed parameters fill in, unknown keys are ignored."""
        P = {k: jnp.zeros(0) for k, b in self.all_blocks.items() if b.size == 0}
        for name, blk in self.all_blocks.items():
            if name == "z" or blk.size == 0:
                continue
            if name in self.fixed:
                v = self.fixed[name]
            elif name in values:
                v = np.asarray(values[name], dtype=float).ravel()
            else:
                raise ValidationError(f"missing parameter value {name!r}")
            if v.size != blk.size:
                raise ShapeError(f"parameter {name!r} needs {blk.size} values, got {v.size}")
            P[name] = jnp.asarray(v if name.split(".")[-1] in VECTOR_BLOCKS else v[0])
        return P

    def pack(self, params: dict) -> np.ndarray:
        """Flat unconstrained vector from constrained values (``b`` given
        as an ``(n, 2)`` array)."""
        vals = {k: v for k, v in params.items() if k != "b"}
        s1 = float(params.get("sigma1sq", self.fixed.get("sigma1sq", [np.nan])[0]))
        s2 = float(params.get("sigma2sq", self.fixed.get("sigma2sq", [np.nan])[0]))
        rho = float(params.get("rho", self.fixed.get("rho", [np.nan])[0]))
        L = np.asarray(re_cholesky(s1, s2, rho))
        b = np.asarray(params.get("b", np.zeros((self.n, 2))), dtype=float).reshape(self.n, 2)
        vals["z"] = np.linalg.solve(L, b.T).T.ravel()
        missing = [blk.name for blk in self.layout.blocks if blk.name not in vals]
        if missing:
            raise ValidationError(f"missing parameter values for {missing}")
        return self.layout.flatten(vals)

    def long_params(self, P) -> LongitudinalParams:
        return LongitudinalParams(P["beta0"], P["beta1"], P["beta"], P["gamma"], P.get("sigma2", 1.0))

    def surv_params(self, P, k) -> SurvivalParams:
        spec, p = self.surv_specs[k], self.prefixes[k]
        named = {nm: P[p + nm] for nm, _ in BASELINE_SAMPLING[spec.baseline]}
        return SurvivalParams(
            theta=baseline_theta(spec.baseline, named),
            kappa=P[p + "kappa"], kappa_tilde=P[p + "kappa_tilde"], lam=P[p + "lambda"],
            alpha0=P.get(p + "alpha0", 0.0), alpha1=P.get(p + "alpha1", 0.0))

    # ------------------------------------------------------- densities
    def obs_loglik(self, P, B):
        lp = self.long_params(P)
        eta = linear_predictor(self.long_spec, lp, B[self.obs_subject], self.S_obs, self.Xt_obs,
                               self.obs_time)
        return log_density_from_predictor(self.long_spec.family, eta, self.obs_y, lp.sigma2)

    def surv_loglik(self, P, B):
        gamma = P["gamma"]
        lh1, cum1, cum2 = [], [], []
        for k, spec in enumerate(self.surv_specs):
            sp = self.surv_params(P, k)
            lh, c1 = gh_log_hazard_cum(spec, sp, B, self.covars[k], self.t1, gamma)
            lh1.append(lh)
            cum1.append(c1)
            if self.has_interval:
                cum2.append(gh_log_hazard_cum(spec, sp, B, self.covars[k], self.t2, gamma)[1])
        if not self.multi:
            return log_fs_from_cum(self.status, lh1[0], cum1[0], cum2[0] if cum2 else cum1[0])
        total = sum(cum1)
        event = sum(jnp.where(self.cause_idx == k, lh1[k], 0.0) for k in range(len(lh1)))
        return jnp.where(self.status == EXACT, event, 0.0) - total

    def subject_loglik(self, P, B):
        """Per-subject log likelihood (longitudinal + survival) given ``b``."""
        obs = self.obs_loglik(P, B)
        per = jax.ops.segment_sum(obs, self.obs_subject, num_segments=self.n)
        return per + self.surv_loglik(P, B)

    def prior_terms(self, P):
        """Vector of log prior contributions, one per free block."""
        cfg = self.prior_cfg
        free = self.layout.by_name
        terms = []
        if "beta0" in free:
            terms.append(pr.normal_logpdf(P["beta0"], cfg.phi2_beta_tilde))
        if "beta1" in free:
            terms.append(pr.normal_logpdf(P["beta1"], cfg.phi2_beta_tilde))
        if "beta" in free:
            disp = P.get("sigma2", 1.0)
            terms.append(pr.regression_logprior(P["beta"], cfg.phi2_beta, self.g_long, disp))
        if "gamma" in free:
            terms.append(jnp.sum(pr.normal_logpdf(P["gamma"], cfg.phi2_gamma)))
        for v in ("sigma2", "sigma1sq", "sigma2sq"):
            if v in free:
                terms.append(pr.inv_gamma_logpdf(P[v], cfg.ig_shape, cfg.ig_scale))
        if "rho" in free:
            terms.append(pr.correlation_logpdf(P["rho"], cfg.rho_a, cfg.rho_b))
        for k, spec in enumerate(self.surv_specs):
            p = self.prefixes[k]
            theta = {nm: P[p + nm] for nm, _ in BASELINE_SAMPLING[spec.baseline] if p + nm in free}
            if theta:
                terms.append(pr.baseline_logprior(spec.baseline, theta, cfg))
            for blk in ("kappa", "kappa_tilde"):
                if p + blk in free:
                    terms.append(jnp.sum(pr.normal_logpdf(P[p + blk], cfg.phi2_kappa)))
            if p + "lambda" in free:
                terms.append(pr.regression_logprior(P[p + "lambda"], cfg.phi2_lambda, self.g_surv[k],
                                                    cfg.eta2_lambda))
            for a in ("alpha0", "alpha1"):
                if p + a in free:
                    terms.append(pr.normal_logpdf(P[p + a], cfg.phi2_alpha))
        return jnp.stack([jnp.asarray(t, dtype=float) for t in terms]) if terms else jnp.zeros(0)

    def prior_audit(self) -> list[str]:
        """Free parameter blocks without a proper prior term (expected empty)."""
        covered = {"beta0", "beta1", "beta", "gamma", "sigma2", "sigma1sq", "sigma2sq", "rho", "z"}
        for k, spec in enumerate(self.surv_specs):
            p = self.prefixes[k]
            covered |= {p + nm for nm, _ in BASELINE_SAMPLING[spec.baseline]}
            covered |= {p + b for b in ("kappa", "kappa_tilde", "lambda", "alpha0", "alpha1")}
        return [b.name for b in self.layout.blocks if b.name not in covered]

    def _pieces_impl(self, flat):
        P, logj, log_det_l = self.unpack(flat)
        B = P["b"]
        re = re_log_density(B, P["sigma1sq"], P["sigma2sq"], P["rho"])
        return {
            "longitudinal": self.obs_loglik(P, B),
            "survival": self.surv_loglik(P, B),
            "random_effects": re,
            "prior": self.prior_terms(P),
            "jacobian": jnp.concatenate([logj, jnp.full(self.n, log_det_l)]),
        }

    def _log_density_impl(self, flat):
        pieces = self._pieces_impl(flat)
        return sum(jnp.sum(v) for v in pieces.values())

    # ------------------------------------------------------- public API
    def log_density(self, flat):
        """Fast jitted log posterior (XLA summation order)."""
        return self._log_density(jnp.asarray(flat, dtype=float))

    def value_and_grad(self, flat):
        return self._value_and_grad(jnp.asarray(flat, dtype=float))

    def log_posterior_terms(self, flat) -> dict:
        return {k: np.asarray(v) for k, v in self._pieces(jnp.asarray(flat, dtype=float)).items()}

    def log_posterior(self, flat) -> float:
        """Log posterior with exactly rounded summation.

        Raises :class:`NumericalError` naming the first non-finite term.
        """
        pieces = self.log_posterior_terms(flat)
        for key, vals in pieces.items():
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                i = int(bad[0])
                if key == "longitudinal":
                    where = f"observation {i} of subject {self.subject_ids[self.obs_subject[i]]}"
                elif key in ("survival", "random_effects"):
                    where = f"subject {self.subject_ids[i]}"
                else:
                    where = f"entry {i}"
                raise NumericalError(f"non-finite {key} term at {where}: {vals[i]}")
        return math.fsum(np.concatenate([np.ravel(v) for v in pieces.values()]))

    def grad_log_posterior(self, flat) -> np.ndarray:
        v, g = self.value_and_grad(flat)
        g = np.asarray(g)
        bad = np.flatnonzero(~np.isfinite(g))
        if bad.size:
            raise NumericalError(f"non-finite gradient at coordinate {bad[0]} ({self.layout.names[bad[0]]})")
        return g

    # ----------------------------------------------------- reporting
    def constrained_values(self, flat) -> dict:
        P, _, _ = self.unpack(flat)
        return {k: np.asarray(v) for k, v in P.items()}

    @property
    def report_names(self) -> list[str]:
        names = []
        for name, blk in self.all_blocks.items():
            if name == "z":
                names += [f"b0[{s}]" for s in self.subject_ids] + [f"b1[{s}]" for s in self.subject_ids]
                continue
            if blk.size == 0:
                continue
            names += list(blk.labels)
            k = blk.cause
            if k is not None and self.surv_specs[k].baseline == "gamma" and name == self.prefixes[k] + "eta":
                names.append(self.prefixes[k] + "zeta")
        return names

    def _report_vector(self, P):
        out = []
        for name, blk in self.all_blocks.items():
            if name == "z":
                out += [P["b"][:, 0], P["b"][:, 1]]
                continue
            if blk.size == 0:
                continue
            out.append(jnp.ravel(jnp.asarray(P[name], dtype=float)))
            k = blk.cause
            if k is not None and self.surv_specs[k].baseline == "gamma" and name == self.prefixes[k] + "eta":
                out.append(jnp.ravel(1.0 / jnp.asarray(P[name], dtype=float)))
        return jnp.concatenate(out)

    def constrain(self, draws) -> pd.DataFrame:
        """Named constrained values for each row of unconstrained ``draws``."""
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        fn = jax.jit(jax.vmap(lambda f: self._report_vector(self.unpack(f)[0])))
        return pd.DataFrame(np.asarray(fn(draws)), columns=self.report_names)

    def baseline_columns(self, k: int = 0) -> dict:
        """Column names holding the sampling-named baseline parameters of cause ``k``."""
        spec, p = self.surv_specs[k], self.prefixes[k]
        return {nm: p + nm for nm, _ in BASELINE_SAMPLING[spec.baseline]}

    # ---------------------------------------------------- initial values
    def pilot_values(self) -> dict:
        """Crude data-driven starting values (constrained)."""
        vals = {"beta0": 0.0, "beta1": 0.0, "beta": np.zeros(len(self.beta_names)),
                "gamma": np.zeros(len(self.long_spec.time_varying)),
                "sigma1sq": 1.0, "sigma2sq": 0.1, "rho": 0.0}
        b = np.zeros((self.n, 2))
        y, t = self.obs_y, self.obs_time
        if y.size > 2 and self.long_spec.family == "gaussian":
            p1 = t ** self.long_spec.p1_degree
            p2 = t ** self.long_spec.p2_degree
            X = np.column_stack([np.ones_like(y), p2, self.S_obs, self.Xt_obs * p1[:, None]])
            coef, *_ = np.linalg.lstsq(X, y, rcond=None)
            r = y - X @ coef
            q, pt = len(self.beta_names), len(self.long_spec.time_varying)
            vals.update(beta0=coef[0], beta1=coef[1], beta=coef[2:2 + q], gamma=coef[2 + q:2 + q + pt])
            for i in range(self.n):
                m = self.obs_subject == i
                if m.sum() >= 3 and np.ptp(p2[m]) > 0:
                    b[i] = np.polyfit(p2[m], r[m], 1)[::-1]
                elif m.sum() >= 1:
                    b[i, 0] = r[m].mean()
            v0, v1 = np.var(b[:, 0]), np.var(b[:, 1])
            resid = r - b[self.obs_subject, 0] - b[self.obs_subject, 1] * p2
            vals.update(sigma1sq=max(v0, 1e-2 * np.var(y)), sigma2sq=max(v1, 1e-4 * np.var(y)),
                        sigma2=max(np.var(resid), 1e-3 * np.var(y)))
        elif y.size and self.long_spec.family == "bernoulli":
            m = np.clip(y.mean(), 0.05, 0.95)
            vals["beta0"] = float(np.log(m / (1 - m)))
        vals.setdefault("sigma2", 1.0)
        times = self.t1[self.t1 > 0] if self.n else np.array([1.0])
        lt = np.log(times)
        for k, spec in enumerate(self.surv_specs):
            p = self.prefixes[k]
            med = float(np.exp(np.median(lt)))
            if spec.baseline == "lognormal":
                vals[p + "mu"], vals[p + "eta"] = float(np.mean(lt)), float(max(np.std(lt), 0.1))
            elif spec.baseline == "gamma":
                m, v = np.mean(times), max(np.var(times), 1e-6)
                vals[p + "nu"], vals[p + "eta"] = m * m / v, v / m
            else:
                vals[p + "eta"], vals[p + "nu"], vals[p + "delta"] = med, 1.0, 1.0
            cv = self.covars[k]
            vals[p + "kappa"] = np.zeros(cv.w.shape[1])
            vals[p + "kappa_tilde"] = np.zeros(cv.w_tilde.shape[1])
            vals[p + "lambda"] = np.zeros(cv.s.shape[1])
            vals[p + "alpha0"] = 0.0
            vals[p + "alpha1"] = 0.0
        vals["b"] = b
        vals.update({k: (v[0] if v.size == 1 else v) for k, v in self.fixed.items()})
        return vals

    def initial_point(self, rng=None, jitter_var: float = 0.1) -> np.ndarray:
        """Pilot values mapped to the sampling space plus ``N(0, jitter_var)`` noise."""
        rng = np.random.default_rng(rng)
        vals = self.pilot_values()
        vals = {k: v for k, v in vals.items() if k in self.layout.by_name or k == "b"}
        for name in ("sigma1sq", "sigma2sq", "rho"):
            vals.setdefault(name, self.fixed.get(name, [None])[0])
        flat = self.pack(vals)
        return flat + rng.normal(scale=np.sqrt(jitter_var), size=flat.shape)

    def copy_with(self, data: JointDataset) -> "JointModel":
        """Same structure bound to another dataset (knots are refitted)."""
        return JointModel(self.long_spec, self.surv_specs, data, self.prior_cfg, self.fixed, self.name)


def check_families(specs):
    return [check_family(s.baseline) for s in specs]
