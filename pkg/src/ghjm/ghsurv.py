"""General hazard (GH) survival sub-model.

For subject ``i`` the hazard is::

    h(t) = h0(t * exp(a_i) | theta) * exp(c_i)
    a_i  = w_i' kappa + alpha1 * (x~_i' gamma + b1_i)      (time scale)
    c_i  = w~_i' kappa~ + s_i' lambda + alpha0 * b0_i      (hazard scale)

and the cumulative hazard is available in closed form,
``H(t) = H0(t * exp(a_i)) * exp(c_i - a_i)``. PH, AFT and AH structures are
special cases. The same machinery gives cause-specific hazards for
competing risks, where overall survival is the product over causes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from . import baseline as bl
from .errors import DomainError, NumericalError, ValidationError
from .longitudinal import CovariateTerm, build_design

EXACT, RIGHT, LEFT, INTERVAL = 0, 1, 2, 3
STATUS_CODES = {"exact": EXACT, "right": RIGHT, "left": LEFT, "interval": INTERVAL}
STATUS_NAMES = {v: k for k, v in STATUS_CODES.items()}


@dataclass(frozen=True)
class SurvivalSpec:
    """Structure of one (cause-specific) GH hazard.

    The three association layouts used for model comparison are
    ``share_slope=True, share_gamma=True`` (time-dependent block and random
    slope on the time scale), ``share_slope=True, share_gamma=False`` (random
    slope only) and ``share_slope=False`` (random intercept only).
    """

    baseline: str = "lognormal"
    cause: str = "event"
    time_covariates: tuple = ()
    hazard_covariates: tuple = ()
    expansions: tuple = ()
    share_intercept: bool = True
    share_slope: bool = True
    share_gamma: bool = True

    def __post_init__(self):
        object.__setattr__(self, "baseline", bl.check_family(self.baseline))
        object.__setattr__(self, "time_covariates", tuple(self.time_covariates))
        object.__setattr__(self, "hazard_covariates", tuple(self.hazard_covariates))
        exps = tuple(c if isinstance(c, CovariateTerm) else CovariateTerm(**c) if isinstance(c, dict)
                     else CovariateTerm(str(c)) for c in self.expansions)
        object.__setattr__(self, "expansions", exps)

    def fit(self, frame) -> "SurvivalSpec":
        return replace(self, expansions=tuple(c.fit(frame[c.name]) for c in self.expansions))

    def design(self, frame, x_tilde=None) -> "SurvivalCovariates":
        n = len(frame)

        def cols(names):
            for v in names:
                if v not in frame:
                    raise ValidationError(f"survival covariate column {v!r} not found")
            return (np.column_stack([np.asarray(frame[v], dtype=float) for v in names])
                    if names else np.zeros((n, 0)))

        s, _ = build_design(self.expansions, frame)
        xt = np.zeros((n, 0)) if x_tilde is None else np.asarray(x_tilde, dtype=float)
        return SurvivalCovariates(cols(self.time_covariates), cols(self.hazard_covariates), s, xt)

    def lambda_names(self) -> list[str]:
        return [n for c in self.expansions for n in c.column_names()]

    @property
    def has_time_scale_effects(self) -> bool:
        return bool(self.time_covariates) or self.share_slope

    @property
    def has_hazard_scale_effects(self) -> bool:
        return bool(self.hazard_covariates) or bool(self.expansions) or self.share_intercept


class SurvivalParams(NamedTuple):
    theta: tuple
    kappa: jnp.ndarray = ()
    kappa_tilde: jnp.ndarray = ()
    lam: jnp.ndarray = ()
    alpha0: float = 0.0
    alpha1: float = 0.0


class SurvivalCovariates(NamedTuple):
    w: jnp.ndarray
    w_tilde: jnp.ndarray
    s: jnp.ndarray
    x_tilde: jnp.ndarray


def warn_if_weibull_equivalent(spec: SurvivalSpec, fixed_delta: float | None) -> bool:
    """Warn when a PGW baseline with ``delta = 1`` (Weibull) is combined with
    both time-scale and hazard-scale effects, which are then confounded."""
    if spec.baseline == "pgw" and fixed_delta is not None and np.isclose(fixed_delta, 1.0) \
            and spec.has_time_scale_effects and spec.has_hazard_scale_effects:
        warnings.warn(
            f"cause {spec.cause!r}: PGW with delta fixed at 1 is a Weibull baseline; time-scale "
            "and hazard-scale effects are not separately identifiable", stacklevel=2)
        return True
    return False


def _dot(x, coef):
    x = jnp.asarray(x)
    coef = jnp.asarray(coef, dtype=float)
    if coef.size == 0:
        return jnp.zeros(x.shape[:-1])
    return x @ coef


def gh_exponents(spec: SurvivalSpec, params: SurvivalParams, b, covars: SurvivalCovariates, gamma=None):
    """Time-scale and hazard-scale linear predictors ``(a, c)``."""
    b = jnp.asarray(b)
    a = _dot(covars.w, params.kappa)
    if spec.share_slope:
        shared = b[..., 1]
        if spec.share_gamma and gamma is not None and jnp.size(gamma) > 0:
            shared = shared + _dot(covars.x_tilde, gamma)
        a = a + params.alpha1 * shared
    c = _dot(covars.w_tilde, params.kappa_tilde) + _dot(covars.s, params.lam)
    if spec.share_intercept:
        c = c + params.alpha0 * b[..., 0]
    return a, c


def gh_log_hazard_cum(spec: SurvivalSpec, params: SurvivalParams, b, covars, t, gamma=None):
    """``(log h(t), H(t))`` for ``t > 0``; jax-traceable.

    The exponents are computed once and shared by both outputs.
    """
    a, c = gh_exponents(spec, params, b, covars, gamma)
    t_scaled = jnp.exp(jnp.log(t) + a)
    lh0, ls0 = bl.log_hazard_and_log_survival(spec.baseline, params.theta, t_scaled)
    return lh0 + c, -ls0 * jnp.exp(c - a)


def _check_t(t, allow_zero=False):
    if isinstance(t, jax.core.Tracer):
        return
    ta = np.asarray(t, dtype=float)
    if np.any(np.isnan(ta)) or np.any(ta < 0) or (not allow_zero and np.any(ta == 0)):
        raise DomainError("time must be > 0" if not allow_zero else "time must be >= 0")


def _check_theta(spec, params):
    bl.BaselineHazard(spec.baseline, tuple(np.asarray(params.theta, dtype=float)))


def gh_hazard(spec: SurvivalSpec, params: SurvivalParams, b, covars, t, gamma=None):
    """GH hazard ``h0(t e^a) e^c``."""
    _check_t(t)
    _check_theta(spec, params)
    lh, _ = gh_log_hazard_cum(spec, params, b, covars, t, gamma)
    return np.exp(np.asarray(lh))


def gh_cum_hazard(spec: SurvivalSpec, params: SurvivalParams, b, covars, t, gamma=None):
    """Closed-form GH cumulative hazard ``H0(t e^a) e^(c - a)``; zero at ``t = 0``."""
    _check_t(t, allow_zero=True)
    _check_theta(spec, params)
    ta = np.asarray(t, dtype=float)
    pos = ta > 0
    _, cum = gh_log_hazard_cum(spec, params, b, covars, np.where(pos, ta, 1.0), gamma)
    return np.where(pos, np.asarray(cum), 0.0)


def gh_survival(spec, params, b, covars, t, gamma=None):
    return np.exp(-gh_cum_hazard(spec, params, b, covars, t, gamma))


# ---------------------------------------------------------------------------
# likelihood contributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventRecord:
    """An observed (possibly censored) event time.

    ``time`` is used for exact, right- and left-censored records; interval
    censoring uses ``(t_left, t_right)``. ``cause`` names the failure cause
    for competing risks and is ignored for censored records.
    """

    status: str
    time: float | None = None
    t_left: float | None = None
    t_right: float | None = None
    cause: str | None = None

    def __post_init__(self):
        if self.status not in STATUS_CODES:
            raise DomainError(f"unknown status {self.status!r}; expected one of {list(STATUS_CODES)}")
        if self.status == "interval":
            if self.t_left is None or self.t_right is None or not (0 < self.t_left < self.t_right):
                raise DomainError("interval censoring requires 0 < t_left < t_right")
        elif self.time is None or not self.time > 0:
            raise DomainError("event time must be > 0")

    @property
    def code(self) -> int:
        return STATUS_CODES[self.status]


def log_fs_from_cum(status, lh1, cum1, cum2):
    """Censoring-aware log contribution from ``log h(t1)``, ``H(t1)`` and ``H(t2)``.

    ``t1`` is the event/censoring time (or ``t_left``) and ``t2`` is
    ``t_right`` for interval-censored rows; ``cum2`` is ignored elsewhere.
    """
    status = jnp.asarray(status)
    is_int = status == INTERVAL
    is_left = status == LEFT
    # benign arguments in branches that are not selected keep gradients finite
    cum_left = jnp.where(is_left, cum1, 1.0)
    gap = jnp.where(is_int, cum1 - cum2, -1.0)
    exact = lh1 - cum1
    right = -cum1
    left = jnp.log(-jnp.expm1(-cum_left))
    interval = -cum1 + jnp.log(-jnp.expm1(gap))
    return jnp.where(status == EXACT, exact,
                     jnp.where(status == RIGHT, right, jnp.where(is_left, left, interval)))


def _scalar(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size != 1:
        raise DomainError(f"expected a single record, got {x.size} values")
    return float(x.reshape(()))


def log_fS(spec: SurvivalSpec, params: SurvivalParams, b, covars, rec: EventRecord, gamma=None) -> float:
    """Log likelihood contribution of one survival record."""
    _check_theta(spec, params)
    if rec.status == "interval":
        lh1, c1 = gh_log_hazard_cum(spec, params, b, covars, rec.t_left, gamma)
        _, c2 = gh_log_hazard_cum(spec, params, b, covars, rec.t_right, gamma)
        if not _scalar(c2) > _scalar(c1):
            raise NumericalError("interval contribution underflow: S(t_left) <= S(t_right) numerically")
    else:
        lh1, c1 = gh_log_hazard_cum(spec, params, b, covars, rec.time, gamma)
        c2 = c1
    return _scalar(log_fs_from_cum(rec.code, lh1, c1, c2))


def cr_log_fS(specs: Sequence[SurvivalSpec], params: Sequence[SurvivalParams], b, covars,
              rec: EventRecord, gamma=None) -> float:
    """Cause-specific competing-risks contribution.

    An event of cause ``k`` at ``t`` contributes ``log h_k(t) - sum_j H_j(t)``;
    a right-censored record contributes ``-sum_j H_j(t)``. ``covars`` is a
    single :class:`SurvivalCovariates` or one per cause.
    """
    if rec.status not in ("exact", "right"):
        raise DomainError("competing-risks records must be exact (with cause) or right-censored")
    if isinstance(covars, SurvivalCovariates):
        covars = [covars] * len(specs)
    causes = [s.cause for s in specs]
    if rec.status == "exact" and len(specs) > 1 and rec.cause not in causes:
        raise DomainError(f"unknown cause label {rec.cause!r}; model causes are {causes}")
    total = 0.0
    log_h = 0.0
    for spec, p, cv in zip(specs, params, covars):
        _check_theta(spec, p)
        lh, cum = gh_log_hazard_cum(spec, p, b, cv, rec.time, gamma)
        total += _scalar(cum)
        if rec.status == "exact" and (len(specs) == 1 or rec.cause == spec.cause):
            log_h = _scalar(lh)
    return (log_h if rec.status == "exact" else 0.0) - total
