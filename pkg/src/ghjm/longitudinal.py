"""Longitudinal sub-model: a GLMM with random intercept and slope.

The mean structure for subject ``i`` at time ``t`` is::

    g(mu) = beta0 + s_i' beta + (x~_i' gamma) P1(t) + b0_i + (beta1 + b1_i) P2(t)

where ``s_i`` stacks raw covariates and B-spline expansions, ``x~_i`` is a
subset of the covariates carrying time-dependent effects, and ``P1``,
``P2`` are monomial time bases ``t**degree`` (degree 1 is the identity).
Supported outcome families are ``gaussian`` (identity link) and
``bernoulli`` (logit link).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DomainError, ShapeError, ValidationError

OUTCOME_FAMILIES = ("gaussian", "bernoulli")
_LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# B-splines
# ---------------------------------------------------------------------------

def clamped_knots(breakpoints, degree: int) -> np.ndarray:
    bp = np.asarray(breakpoints, dtype=float)
    return np.concatenate([np.repeat(bp[0], degree), bp, np.repeat(bp[-1], degree)])


def bspline_basis(x, degree: int, knots) -> np.ndarray:
    """Evaluate the clamped B-spline basis by the Cox-de Boor recursion.

    Parameters
    ----------
    x : float or array_like
        Evaluation points inside ``[knots[0], knots[-1]]``.
    degree : int
        Polynomial degree, at least 1.
    knots : array_like
        Strictly increasing breakpoints, boundaries included. The boundary
        knots are repeated ``degree`` extra times internally.

    Returns
    -------
    numpy.ndarray
        Shape ``x.shape + (len(knots) + degree - 1,)``. Each row is
        non-negative and sums to one.
    """
    if int(degree) != degree or degree < 1:
        raise DomainError("B-spline degree must be an integer >= 1")
    degree = int(degree)
    bp = np.asarray(knots, dtype=float)
    if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
        raise DomainError("B-spline knots must be a strictly increasing vector of length >= 2")
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < bp[0]) or np.any(x > bp[-1]):
        raise DomainError(f"x outside the knot span [{bp[0]}, {bp[-1]}]")
    shape = x.shape
    xf = x.ravel()
    tk = clamped_knots(bp, degree)
    n_int = bp.size - 1

    # degree-0: indicator of the half-open interval; the right boundary
    # belongs to the last interval
    span = np.clip(np.searchsorted(bp, xf, side="right") - 1, 0, n_int - 1)
    basis = np.zeros((xf.size, tk.size - 1))
    basis[np.arange(xf.size), span + degree] = 1.0

    for k in range(1, degree + 1):
        nxt = np.zeros((xf.size, tk.size - 1 - k))
        for j in range(tk.size - 1 - k):
            left_den = tk[j + k] - tk[j]
            right_den = tk[j + k + 1] - tk[j + 1]
            term = 0.0
            if left_den > 0:
                term = term + (xf - tk[j]) / left_den * basis[:, j]
            if right_den > 0:
                term = term + (tk[j + k + 1] - xf) / right_den * basis[:, j + 1]
            nxt[:, j] = term
        basis = nxt
    return basis.reshape(shape + (basis.shape[-1],))


@dataclass(frozen=True)
class CovariateTerm:
    """One covariate column and its expansion.

    ``expansion='bspline'`` uses a clamped B-spline basis of ``degree``;
    the first basis function is dropped so the block is not collinear with
    the intercept. When ``knots`` is None the boundary knots are the data
    range and ``n_interior_knots`` interior knots sit at empirical
    quantiles (see :meth:`fit`).
    """

    name: str
    expansion: str = "raw"
    degree: int = 3
    n_interior_knots: int = 2
    knots: tuple | None = None

    def __post_init__(self):
        if self.expansion not in ("raw", "bspline"):
            raise ValidationError(f"covariate {self.name!r}: expansion must be 'raw' or 'bspline'")
        if self.expansion == "bspline" and self.degree < 1:
            raise ValidationError(f"covariate {self.name!r}: spline degree must be >= 1")
        if self.knots is not None:
            object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))

    @property
    def is_spline(self) -> bool:
        return self.expansion == "bspline"

    def fit(self, values) -> "CovariateTerm":
        if not self.is_spline or self.knots is not None:
            return self
        v = np.asarray(values, dtype=float)
        lo, hi = float(np.min(v)), float(np.max(v))
        if not hi > lo:
            raise ValidationError(f"covariate {self.name!r} is constant; cannot place spline knots")
        probs = np.linspace(0, 1, self.n_interior_knots + 2)[1:-1]
        interior = np.quantile(v, probs) if probs.size else np.array([])
        knots = np.unique(np.concatenate([[lo], interior, [hi]]))
        return replace(self, knots=tuple(knots))

    @property
    def n_columns(self) -> int:
        if not self.is_spline:
            return 1
        if self.knots is None:
            raise ValidationError(f"spline covariate {self.name!r} has no knots; call fit() first")
        return len(self.knots) + self.degree - 2

    def column_names(self) -> list[str]:
        if not self.is_spline:
            return [self.name]
        return [f"{self.name}:bs{j}" for j in range(1, self.n_columns + 1)]

    def expand(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if not self.is_spline:
            return v[:, None]
        if self.knots is None:
            raise ValidationError(f"spline covariate {self.name!r} has no knots; call fit() first")
        lo, hi = self.knots[0], self.knots[-1]
        # values a hair outside the fitted range (e.g. new data) are clamped
        return bspline_basis(np.clip(v, lo, hi), self.degree, self.knots)[:, 1:]


def build_design(terms: Sequence[CovariateTerm], frame) -> tuple[np.ndarray, list[str]]:
    n = len(frame)
    cols, names = [], []
    for term in terms:
        if term.name not in frame:
            raise ValidationError(f"covariate column {term.name!r} not found")
        cols.append(term.expand(np.asarray(frame[term.name], dtype=float)))
        names.extend(term.column_names())
    mat = np.concatenate(cols, axis=1) if cols else np.zeros((n, 0))
    return mat, names


def spline_blocks(terms: Sequence[CovariateTerm]) -> list[tuple[str, slice]]:
    """Column slices of spline-expanded terms within the design matrix."""
    out, start = [], 0
    for term in terms:
        stop = start + term.n_columns
        if term.is_spline:
            out.append((term.name, slice(start, stop)))
        start = stop
    return out


# ---------------------------------------------------------------------------
# specification and parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LongitudinalSpec:
    covariates: tuple = ()
    time_varying: tuple = ()
    p1_degree: int = 1
    p2_degree: int = 1
    family: str = "gaussian"
    outcome: str = "outcome"

    def __post_init__(self):
        covs = tuple(c if isinstance(c, CovariateTerm) else CovariateTerm(**c) if isinstance(c, dict)
                     else CovariateTerm(str(c)) for c in self.covariates)
        object.__setattr__(self, "covariates", covs)
        object.__setattr__(self, "time_varying", tuple(self.time_varying))
        if self.family not in OUTCOME_FAMILIES:
            raise ValidationError(f"outcome family must be one of {OUTCOME_FAMILIES}")
        names = {c.name for c in covs}
        extra = [v for v in self.time_varying if v not in names]
        if extra:
            raise ValidationError(f"time-varying covariates {extra} are not among the covariates")
        if self.p1_degree < 1 or self.p2_degree < 1:
            raise ValidationError("time basis degrees must be >= 1")

    def fit(self, frame) -> "LongitudinalSpec":
        return replace(self, covariates=tuple(c.fit(frame[c.name]) for c in self.covariates))

    def design(self, frame) -> tuple[np.ndarray, np.ndarray]:
        """Subject-level design ``(S, X~)`` for the rows of ``frame``."""
        s, _ = build_design(self.covariates, frame)
        xt = np.column_stack([np.asarray(frame[v], dtype=float) for v in self.time_varying]) \
            if self.time_varying else np.zeros((len(frame), 0))
        return s, xt

    def beta_names(self) -> list[str]:
        return [n for c in self.covariates for n in c.column_names()]


class LongitudinalParams(NamedTuple):
    beta0: float
    beta1: float
    beta: jnp.ndarray
    gamma: jnp.ndarray
    sigma2: float = 1.0


def time_basis(t, degree: int):
    return t if degree == 1 else t ** degree


def linear_predictor(spec: LongitudinalSpec, params: LongitudinalParams, b, s, x_tilde, t):
    """Linear predictor on the link scale.

    ``b`` is ``(b0, b1)`` (or an ``(..., 2)`` array), ``s`` and ``x_tilde``
    are expanded design rows; all broadcast against ``t``.
    """
    b = jnp.asarray(b)
    s = jnp.asarray(s)
    x_tilde = jnp.asarray(x_tilde)
    beta = jnp.asarray(params.beta)
    gamma = jnp.asarray(params.gamma)
    if s.shape[-1] != beta.shape[-1] or x_tilde.shape[-1] != gamma.shape[-1]:
        raise ShapeError(f"design widths ({s.shape[-1]}, {x_tilde.shape[-1]}) do not match "
                         f"coefficients ({beta.shape[-1]}, {gamma.shape[-1]})")
    p1 = time_basis(t, spec.p1_degree)
    p2 = time_basis(t, spec.p2_degree)
    return (params.beta0 + s @ beta + (x_tilde @ gamma) * p1
            + b[..., 0] + (params.beta1 + b[..., 1]) * p2)


def log_density_from_predictor(family: str, eta, y, sigma2=1.0):
    if family == "gaussian":
        r = y - eta
        return -0.5 * (_LOG_2PI + jnp.log(sigma2)) - 0.5 * r * r / sigma2
    # logit link: y*eta - log(1 + e^eta)
    return y * eta - jnp.logaddexp(0.0, eta)


def _is_traced(x) -> bool:
    return isinstance(x, jax.core.Tracer)


def log_density_obs(spec: LongitudinalSpec, params: LongitudinalParams, b, s, x_tilde, t, y):
    """Log density of one (or many) longitudinal observations."""
    if not _is_traced(y):
        ya = np.asarray(y, dtype=float)
        if spec.family == "bernoulli" and np.any((ya != 0) & (ya != 1)):
            raise DomainError("bernoulli outcomes must be 0 or 1")
        if np.any(~np.isfinite(ya)):
            raise DomainError("non-finite longitudinal outcome")
    if spec.family == "gaussian" and not _is_traced(params.sigma2) and not params.sigma2 > 0:
        raise DomainError("error variance must be > 0")
    eta = linear_predictor(spec, params, b, s, x_tilde, t)
    return log_density_from_predictor(spec.family, eta, y, params.sigma2)


def re_log_density(b, sigma1sq, sigma2sq, rho):
    """Bivariate normal log density of ``b = (b0, b1)``; jax-traceable."""
    b = jnp.asarray(b)
    b0, b1 = b[..., 0], b[..., 1]
    one_m_r2 = 1.0 - rho * rho
    z0 = b0 / jnp.sqrt(sigma1sq)
    z1 = b1 / jnp.sqrt(sigma2sq)
    quad = (z0 * z0 - 2.0 * rho * z0 * z1 + z1 * z1) / one_m_r2
    log_det = jnp.log(sigma1sq) + jnp.log(sigma2sq) + jnp.log1p(-rho * rho)
    return -_LOG_2PI - 0.5 * log_det - 0.5 * quad


def log_density_re(b, sigma1sq, sigma2sq, rho):
    """Log density of the random effects ``b ~ N2(0, Sigma)``.

    ``Sigma = [[s1, rho*sqrt(s1*s2)], [rho*sqrt(s1*s2), s2]]``.
    """
    vals = [sigma1sq, sigma2sq, rho]
    if not any(_is_traced(v) for v in vals):
        if not (sigma1sq > 0 and sigma2sq > 0 and -1 < rho < 1):
            raise DomainError("random-effects covariance requires s1 > 0, s2 > 0 and |rho| < 1")
    return re_log_density(b, sigma1sq, sigma2sq, rho)


def re_cholesky(sigma1sq, sigma2sq, rho):
    """Lower Cholesky factor of the random-effects covariance."""
    s1 = jnp.sqrt(sigma1sq)
    s2 = jnp.sqrt(sigma2sq)
    return jnp.array([[s1, 0.0], [rho * s2, s2 * jnp.sqrt(1.0 - rho * rho)]])


@dataclass(frozen=True)
class RandomEffects:
    """Per-subject random effects with their population covariance."""

    b: np.ndarray
    sigma1sq: float
    sigma2sq: float
    rho: float

    def __post_init__(self):
        if not (self.sigma1sq > 0 and self.sigma2sq > 0 and -1 < self.rho < 1):
            raise DomainError("random-effects covariance requires s1 > 0, s2 > 0 and |rho| < 1")

    @property
    def cov(self) -> np.ndarray:
        c = self.rho * np.sqrt(self.sigma1sq * self.sigma2sq)
        return np.array([[self.sigma1sq, c], [c, self.sigma2sq]])

    def log_density(self):
        return np.asarray(re_log_density(self.b, self.sigma1sq, self.sigma2sq, self.rho))
