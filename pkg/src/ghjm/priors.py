"""Prior densities and sampling-space transforms.

Defaults follow a weakly informative setup: vague normals (variance
``phi2 = 100``) for regression coefficients and associations, g-priors
``N(0, g (S'S)^{-1} v)`` with ``g = n / degree`` for spline blocks,
``Inv-Gamma(0.01, 0.01)`` for variances, ``Beta(1, 1)`` for
``(rho + 1) / 2``, half-Cauchy(0, 2.5) for baseline scales and shapes and
``Gamma(shape=1.83, rate=0.65)`` for the third (power) parameter of the PGW
and Generalised Gamma baselines (prior mean 1.83 / 0.65 = 2.815).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import jax.numpy as jnp
import numpy as np
from jax.scipy.special import betaln, gammaln

from .errors import DomainError, NumericalError, ValidationError

_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters. Keys of a config file map one-to-one onto fields."""

    phi2_beta_tilde: float = 100.0
    phi2_gamma: float = 100.0
    phi2_beta: float = 100.0
    phi2_lambda: float = 100.0
    phi2_kappa: float = 100.0
    phi2_mu: float = 100.0
    phi2_alpha: float = 100.0
    s_eta: float = 2.5
    s_nu: float = 2.5
    ig_shape: float = 0.01
    ig_scale: float = 0.01
    rho_a: float = 1.0
    rho_b: float = 1.0
    g_beta: float | None = None
    g_lambda: float | None = None
    eta2_lambda: float = 1.0
    delta_shape: float = 1.83
    delta_rate: float = 0.65

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"prior hyperparameter {f.name} must be positive, got {v}")

    @classmethod
    def from_dict(cls, d: dict | None) -> "PriorConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown prior keys: {unknown}")
        return cls(**d)

    @property
    def delta_mean(self) -> float:
        return self.delta_shape / self.delta_rate


def g_factor(n: int, degree: int) -> float:
    """Default g-prior factor ``n / q`` for a spline block of degree ``q``."""
    if n < 1 or degree < 1:
        raise DomainError("g factor needs n >= 1 and degree >= 1")
    return n / degree


# ---------------------------------------------------------------------------
# univariate log densities (jax-traceable)
# ---------------------------------------------------------------------------

def normal_logpdf(x, var, mean=0.0):
    r = x - mean
    return -0.5 * (_LOG_2PI + jnp.log(var)) - 0.5 * r * r / var


def half_cauchy_logpdf(x, scale):
    z = x / scale
    return jnp.log(2.0 / (jnp.pi * scale)) - jnp.log1p(z * z)


def inv_gamma_logpdf(x, shape, scale):
    return shape * jnp.log(scale) - gammaln(shape) - (shape + 1.0) * jnp.log(x) - scale / x


def gamma_logpdf(x, shape, rate):
    return shape * jnp.log(rate) - gammaln(shape) + (shape - 1.0) * jnp.log(x) - rate * x


def beta_logpdf(x, a, b):
    return (a - 1.0) * jnp.log(x) + (b - 1.0) * jnp.log1p(-x) - betaln(a, b)


def correlation_logpdf(rho, a, b):
    """Log density of ``rho`` when ``(rho + 1) / 2 ~ Beta(a, b)``."""
    return beta_logpdf(0.5 * (rho + 1.0), a, b) - _LOG2


@dataclass(frozen=True)
class GPrior:
    """Zero-mean g-prior ``N(0, g (S'S)^{-1} v)`` for one spline block."""

    name: str
    gram: np.ndarray
    g: float
    log_det_gram: float

    @classmethod
    def from_design(cls, name: str, design: np.ndarray, g: float) -> "GPrior":
        design = np.asarray(design, dtype=float)
        gram = design.T @ design
        k = gram.shape[0]
        rank = np.linalg.matrix_rank(design) if design.size else 0
        if rank < k:
            raise NumericalError(f"spline design for block {name!r} is rank deficient ({rank} < {k})")
        sign, logdet = np.linalg.slogdet(gram)
        if sign <= 0:
            raise NumericalError(f"spline design for block {name!r} has a singular Gram matrix")
        return cls(name, gram, float(g), float(logdet))

    @property
    def covariance(self) -> np.ndarray:
        """Covariance for unit dispersion: ``g (S'S)^{-1}``."""
        return self.g * np.linalg.inv(self.gram)

    def logpdf(self, x, dispersion=1.0):
        k = self.gram.shape[0]
        scale = self.g * dispersion
        quad = x @ (jnp.asarray(self.gram) @ x)
        return (-0.5 * k * (_LOG_2PI + jnp.log(scale)) + 0.5 * self.log_det_gram
                - 0.5 * quad / scale)


def baseline_logprior(family: str, theta: dict, cfg: PriorConfig):
    """Prior on baseline parameters given by name.

    ``theta`` uses the sampling names: ``(mu, eta)`` for Log-normal,
    ``(nu, eta)`` with ``eta = 1 / rate`` for Gamma, and
    ``(eta, nu, delta)`` for PGW and Generalised Gamma. Parameters absent
    from ``theta`` (held fixed) contribute nothing.
    """
    lp = 0.0
    if "mu" in theta:
        lp = lp + normal_logpdf(theta["mu"], cfg.phi2_mu)
    if "eta" in theta:
        lp = lp + half_cauchy_logpdf(theta["eta"], cfg.s_eta)
    if "nu" in theta:
        lp = lp + half_cauchy_logpdf(theta["nu"], cfg.s_nu)
    if "delta" in theta:
        lp = lp + gamma_logpdf(theta["delta"], cfg.delta_shape, cfg.delta_rate)
    return lp


def regression_logprior(x, raw_var, gblocks=(), dispersion=1.0):
    """Independent normals on raw-scale entries and g-priors on spline blocks.

    ``gblocks`` is a sequence of ``(slice, GPrior)`` pairs.
    """
    x = jnp.asarray(x)
    if x.size == 0:
        return 0.0
    mask = np.ones(x.shape[0], dtype=bool)
    lp = 0.0
    for sl, gp in gblocks:
        mask[sl] = False
        lp = lp + gp.logpdf(x[sl], dispersion)
    if mask.any():
        lp = lp + jnp.sum(normal_logpdf(x[np.flatnonzero(mask)], raw_var))
    return lp


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

KINDS = ("real", "positive", "correlation")


def to_unconstrained(x, kind: str):
    """Map a constrained value to the sampling space."""
    x = np.asarray(x, dtype=float)
    if kind == "real":
        return x
    if kind == "positive":
        if np.any(~(x > 0)) or np.any(~np.isfinite(x)):
            raise DomainError("positive parameter must be finite and > 0")
        return np.log(x)
    if kind == "correlation":
        if np.any(~(np.abs(x) < 1)):
            raise DomainError("correlation must lie strictly inside (-1, 1)")
        return np.arctanh(x)
    raise DomainError(f"unknown transform kind {kind!r}")


def from_unconstrained(u, kind: str):
    """Inverse transform; returns ``(x, log|dx/du|)`` elementwise."""
    if kind == "real":
        return u, jnp.zeros_like(u)
    if kind == "positive":
        return jnp.exp(u), u
    if kind == "correlation":
        # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
        return jnp.tanh(u), 2.0 * (_LOG2 - u - jnp.logaddexp(0.0, -2.0 * u))
    raise DomainError(f"unknown transform kind {kind!r}")
