"""Parametric baseline hazards: Log-normal, Gamma, PGW and Generalised Gamma.

Two layers live here. The ``log_hazard`` / ``cum_hazard`` / ``log_survival``
kernels are pure ``jax.numpy`` functions of ``(family, params, t)`` without
argument checks, used inside the jitted posterior. :class:`BaselineHazard`
wraps them with validation and returns NumPy values.

Parameter conventions
---------------------
========== ===================================== =====================
family     params                                survival S0(t)
========== ===================================== =====================
lognormal  (mu, eta): log-location, scale        1 - Phi((log t - mu)/eta)
gamma      (nu, zeta): shape, rate               Q(nu, zeta t)
pgw        (eta, nu, delta): scale, shape, power exp{1 - [1 + (t/eta)^nu]^(1/delta)}
gengamma   (eta, nu, delta): scale, two shapes   Q(delta, (t/eta)^nu)
========== ===================================== =====================
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
from jax.scipy.special import log_ndtr, ndtr
from scipy.special import ndtri

from .errors import DomainError, NumericalError
from .special import log_gammainc_terms

FAMILIES = ("lognormal", "gamma", "pgw", "gengamma")

PARAM_NAMES = {
    "lognormal": ("mu", "eta"),
    "gamma": ("nu", "zeta"),
    "pgw": ("eta", "nu", "delta"),
    "gengamma": ("eta", "nu", "delta"),
}

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def check_family(family: str) -> str:
    family = str(family).lower()
    aliases = {"ln": "lognormal", "log-normal": "lognormal", "gg": "gengamma",
               "generalised_gamma": "gengamma", "generalized_gamma": "gengamma"}
    family = aliases.get(family, family)
    if family not in FAMILIES:
        raise DomainError(f"unknown baseline family {family!r}; expected one of {FAMILIES}")
    return family


# ---------------------------------------------------------------------------
# jax kernels (no validation)
# ---------------------------------------------------------------------------

def _lognormal_terms(params, t):
    mu, eta = params
    z = (jnp.log(t) - mu) / eta
    # H = -log(1 - Phi(z)); lower tail via log1p keeps tiny H accurate
    neg = z < 0.0
    z_lo = jnp.where(neg, z, -1.0)
    z_hi = jnp.where(neg, 1.0, z)
    log_s = jnp.where(neg, jnp.log1p(-ndtr(z_lo)), log_ndtr(-z_hi))
    log_f = -0.5 * z * z - _LOG_SQRT_2PI - jnp.log(t) - jnp.log(eta)
    return log_f - log_s, log_s


def _gamma_terms(params, t):
    nu, zeta = params
    x = zeta * t
    _, log_s, ratio = log_gammainc_terms(nu, x)
    # f = zeta g / x and S = g e^ratio with g = x^nu e^{-x} / Gamma(nu)
    return jnp.log(zeta) - jnp.log(x) - ratio, log_s


def _pgw_terms(params, t):
    eta, nu, delta = params
    log_ratio = nu * (jnp.log(t) - jnp.log(eta))
    log1p_r = jnp.log1p(jnp.exp(log_ratio))
    # H = (1 + r)^(1/delta) - 1
    cum = jnp.expm1(log1p_r / delta)
    log_h = (jnp.log(nu) - jnp.log(delta) - nu * jnp.log(eta)
             + (nu - 1.0) * jnp.log(t) + (1.0 / delta - 1.0) * log1p_r)
    return log_h, -cum


def _gengamma_terms(params, t):
    eta, nu, delta = params
    log_x = nu * (jnp.log(t) - jnp.log(eta))
    x = jnp.exp(log_x)
    _, log_s, ratio = log_gammainc_terms(delta, x)
    # f = nu g / t and S = g e^ratio with g = x^delta e^{-x} / Gamma(delta)
    return jnp.log(nu) - jnp.log(t) - ratio, log_s


_TERMS = {
    "lognormal": _lognormal_terms,
    "gamma": _gamma_terms,
    "pgw": _pgw_terms,
    "gengamma": _gengamma_terms,
}


def log_hazard_and_log_survival(family, params, t):
    """``(log h0(t), log S0(t))`` for ``t > 0``; jax-traceable."""
    return _TERMS[family](params, t)


def log_hazard(family, params, t):
    return _TERMS[family](params, t)[0]


def log_survival(family, params, t):
    return _TERMS[family](params, t)[1]


def cum_hazard(family, params, t):
    return -_TERMS[family](params, t)[1]


def log_pdf(family, params, t):
    lh, ls = _TERMS[family](params, t)
    return lh + ls


def _vectorised(fn):
    return jax.jit(fn, static_argnums=0)


_log_terms_jit = _vectorised(log_hazard_and_log_survival)


# ---------------------------------------------------------------------------
# public object
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaselineHazard:
    """A parametric baseline hazard ``h0(t | theta)``.

    Parameters
    ----------
    family : {'lognormal', 'gamma', 'pgw', 'gengamma'}
    params : tuple of float
        Family parameters in the order listed in the module docstring.

    Examples
    --------
    >>> BaselineHazard("gamma", (1.0, 0.5)).hazard(3.0)
    0.5
    """

    family: str
    params: tuple

    def __post_init__(self):
        family = check_family(self.family)
        params = tuple(float(p) for p in np.atleast_1d(np.asarray(self.params, dtype=float)))
        names = PARAM_NAMES[family]
        if len(params) != len(names):
            raise DomainError(f"{family} expects {len(names)} parameters {names}, got {len(params)}")
        if not all(np.isfinite(params)):
            raise DomainError(f"non-finite {family} parameters {params}")
        positive = params[1:] if family == "lognormal" else params
        if any(p <= 0 for p in positive):
            raise DomainError(f"{family} scale/shape parameters must be > 0, got {params}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)

    @classmethod
    def lognormal(cls, mu, eta):
        return cls("lognormal", (mu, eta))

    @classmethod
    def gamma(cls, shape, rate):
        return cls("gamma", (shape, rate))

    @classmethod
    def pgw(cls, scale, shape, power):
        return cls("pgw", (scale, shape, power))

    @classmethod
    def gengamma(cls, scale, shape, power):
        return cls("gengamma", (scale, shape, power))

    @property
    def named_params(self) -> dict:
        return dict(zip(PARAM_NAMES[self.family], self.params))

    @property
    def scale(self) -> float:
        """Scale parameter; for the Gamma family this is ``1 / rate``."""
        if self.family == "gamma":
            return 1.0 / self.params[1]
        if self.family == "lognormal":
            return self.params[1]
        return self.params[0]

    def _terms(self, t, allow_zero=False):
        t = np.asarray(t, dtype=float)
        if np.any(np.isnan(t)) or np.any(t < 0) or (not allow_zero and np.any(t == 0)):
            raise DomainError("baseline functions require t > 0" + (" (t >= 0 for H0)" if allow_zero else ""))
        pos = t > 0
        lh, ls = _log_terms_jit(self.family, self.params, np.where(pos, t, 1.0))
        lh = np.where(pos, np.asarray(lh), -np.inf)
        ls = np.where(pos, np.asarray(ls), 0.0)
        return lh, ls

    @staticmethod
    def _out(x):
        return float(x) if np.ndim(x) == 0 else x

    def hazard(self, t):
        """Baseline hazard ``h0(t) = f0(t) / S0(t)`` for ``t > 0``."""
        return self._out(np.exp(self._terms(t)[0]))

    def log_hazard(self, t):
        return self._out(self._terms(t)[0])

    def cum_hazard(self, t):
        """Closed-form cumulative hazard ``H0(t)``; ``H0(0) = 0``."""
        return self._out(-self._terms(t, allow_zero=True)[1] + 0.0)

    def survival(self, t):
        return self._out(np.exp(self._terms(t, allow_zero=True)[1]))

    def log_survival(self, t):
        return self._out(self._terms(t, allow_zero=True)[1])

    def cdf(self, t):
        return self._out(-np.expm1(self._terms(t, allow_zero=True)[1]))

    def log_pdf(self, t):
        lh, ls = self._terms(t)
        return self._out(lh + ls)

    def pdf(self, t):
        return self._out(np.exp(self.log_pdf(t)))

    def quantile(self, u):
        """Inverse CDF ``F0^{-1}(u)`` for ``0 < u < 1``."""
        u = np.asarray(u, dtype=float)
        if np.any(np.isnan(u)) or np.any(u <= 0) or np.any(u >= 1):
            raise DomainError("quantile requires 0 < u < 1")
        if self.family == "lognormal":
            mu, eta = self.params
            return self._out(np.exp(mu + eta * ndtri(u)))
        return self.inverse_cum_hazard(-np.log1p(-u))

    def inverse_cum_hazard(self, target):
        """Solve ``H0(t) = target`` for ``target > 0``."""
        target = np.asarray(target, dtype=float)
        if np.any(np.isnan(target)) or np.any(target <= 0) or np.any(np.isinf(target)):
            raise DomainError("inverse cumulative hazard requires 0 < H < inf")
        fam, p = self.family, self.params
        if fam == "pgw":
            eta, nu, delta = p
            # (1 + (t/eta)^nu)^(1/delta) = 1 + H
            inner = np.expm1(delta * np.log1p(target))
            return self._out(eta * inner ** (1.0 / nu))
        if fam == "lognormal":
            mu, eta = p
            # S = exp(-H); Phi^{-1}(1 - S) written through the upper tail
            return self._out(np.exp(mu - eta * ndtri(np.exp(-target))))
        return self._out(_invert_cum_hazard(self, target))


def _invert_cum_hazard(b: BaselineHazard, target, max_iter=200, rtol=1e-12):
    """Safeguarded Newton on ``log H0(e^s) = log target`` with a bisection
    fallback. The bracket is found by doubling/halving ``t``."""
    shape = np.shape(target)
    target = np.atleast_1d(target).astype(float).ravel()
    log_target = np.log(target)

    def g_and_slope(s):
        t = np.exp(s)
        lh, ls = _log_terms_jit(b.family, b.params, t)
        lh, ls = np.asarray(lh), np.asarray(ls)
        cum = -ls
        with np.errstate(divide="ignore"):
            log_cum = np.log(cum)
        # d log H / d s = t h(t) / H(t)
        slope = np.exp(lh + s - log_cum)
        return log_cum - log_target, slope

    s = np.log(b.scale) * np.ones_like(target)
    g, _ = g_and_slope(s)
    lo = s.copy()
    hi = s.copy()
    lo_ok = g < 0
    hi_ok = g > 0
    step = np.log(2.0)
    for _ in range(2000):
        if np.all(lo_ok) and np.all(hi_ok):
            break
        lo = np.where(lo_ok, lo, lo - step)
        hi = np.where(hi_ok, hi, hi + step)
        glo, _ = g_and_slope(lo)
        ghi, _ = g_and_slope(hi)
        lo_ok = lo_ok | (glo < 0)
        hi_ok = hi_ok | (ghi > 0)
        step *= 1.5
    else:
        raise NumericalError("could not bracket the inverse cumulative hazard")

    s = 0.5 * (lo + hi)
    done = np.zeros_like(target, dtype=bool)
    for _ in range(max_iter):
        g, slope = g_and_slope(s)
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        newton = s - g / slope
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        s_new = np.where(bad, 0.5 * (lo + hi), newton)
        # relative change in t is |ds| for small ds
        done = done | (np.abs(s_new - s) <= rtol) | (g == 0)
        s = np.where(done, s, s_new)
        if np.all(done):
            break
    else:
        g, _ = g_and_slope(s)
        raise NumericalError(
            f"inverse cumulative hazard did not converge; max residual {np.max(np.abs(g)):.3e}")
    return np.exp(s).reshape(shape)
