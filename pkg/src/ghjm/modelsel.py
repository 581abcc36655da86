"""Marginal likelihoods by bridge sampling, model probabilities and Bayes factors.

The bridge estimator uses a multivariate normal proposal moment-matched
to the second half of each chain (in the unconstrained space) and the
first halves for the iterative scheme of Meng and Wong. Because the
chains target the augmented posterior, the random effects are part of the
integration space; the result is the marginal likelihood of the data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .errors import DomainError, NumericalError, ValidationError
from .sampler import PosteriorChain, Target, as_target, ess, split_rhat


@dataclass(frozen=True)
class BridgeResult:
    logml: float
    se: float
    n_iter: int
    converged: bool

    def __float__(self):
        return self.logml


def _log_density_fn(model):
    if callable(model) and not hasattr(model, "dim") and not isinstance(model, Target):
        fn = model
    else:
        fn = as_target(model).logdensity
    return jax.jit(jax.vmap(fn))


def _regularised_cov(x: np.ndarray):
    """Sample covariance; shrunk towards its diagonal when not positive
    definite (always the case with no more draws than dimensions, even if
    rounding lets a Cholesky factorisation through)."""
    n, p = x.shape
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    if n > p:
        try:
            return cov, np.linalg.cholesky(cov), False
        except np.linalg.LinAlgError:
            pass
    diag = np.diag(np.diag(cov)) + 1e-10 * np.eye(p)
    w = min(1.0, max(p / (n + p), 1e-6))
    while True:
        shrunk = (1 - w) * cov + w * diag
        try:
            return shrunk, np.linalg.cholesky(shrunk), True
        except np.linalg.LinAlgError:
            w = min(1.0, 2 * w)


def log_marginal_bridge(chains, model, seed: int = 0, tol: float = 1e-8, max_iter: int = 1000,
                        rhat_warn: float = 1.05, space: str = "augmented", nodes: int = 9) -> BridgeResult:
    """Bridge-sampling estimate of ``log p(Data | M)``.

    Parameters
    ----------
    chains : list of PosteriorChain or list of arrays
        Unconstrained posterior draws, one ``(draws, dim)`` block per chain.
    model : JointModel, Target or callable
        Supplies the unnormalised log posterior on the unconstrained space
        (including the log-Jacobian).
    seed : int
        Seed for the proposal draws.
    space : {"augmented", "marginal"}
        ``augmented`` bridges over parameters and random effects jointly.
        ``marginal`` (JointModel only) drops the random-effect coordinates
        and integrates them out by adaptive Gauss-Hermite quadrature with
        ``nodes`` per dimension; much more accurate when the number of
        draws is small relative to the number of subjects.

    Returns
    -------
    BridgeResult
        Log marginal likelihood, an approximate standard error (relative
        mean squared error of the estimator, corrected for
        autocorrelation), the number of iterations and a convergence flag.
    """
    arrs = [np.asarray(c.draws if isinstance(c, PosteriorChain) else c, dtype=float) for c in chains]
    arrs = [a.reshape(len(a), -1) for a in arrs]
    if space == "marginal":
        from .posterior import marginal_log_posterior, split_draws
        arrs = [split_draws(a, model) for a in arrs]

        def logq(x):
            return np.array([marginal_log_posterior(row, model, nodes) for row in np.asarray(x)])
    elif space == "augmented":
        logq = _log_density_fn(model)
    else:
        raise ValidationError(f"space must be 'augmented' or 'marginal', got {space!r}")
    if min(len(a) for a in arrs) < 4:
        raise ValidationError("bridge sampling needs at least 4 draws per chain")
    if len(arrs) > 1 or len(arrs[0]) >= 20:
        r = split_rhat(arrs)
        if np.nanmax(r) > rhat_warn:
            warnings.warn(f"chains may not have converged (max split R-hat {np.nanmax(r):.3f})", stacklevel=2)
    first = np.concatenate([a[: len(a) // 2] for a in arrs])
    second = np.concatenate([a[len(a) // 2:] for a in arrs])
    n1 = len(first)
    p = first.shape[1]
    mean = second.mean(axis=0)
    cov, chol, regularised = _regularised_cov(second)
    if regularised:
        warnings.warn("proposal covariance was not positive definite; shrunk towards its diagonal", stacklevel=2)
    rng = np.random.default_rng(seed)
    n2 = n1
    prop = mean + rng.standard_normal((n2, p)) @ chol.T
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))

    def log_g(x):
        z = np.linalg.solve(chol, (x - mean).T)
        return -0.5 * (p * math.log(2 * math.pi) + log_det) - 0.5 * np.sum(z * z, axis=0)

    q1 = np.asarray(logq(jnp.asarray(first)))
    q2 = np.asarray(logq(jnp.asarray(prop)))
    if not np.all(np.isfinite(q1)):
        raise NumericalError("non-finite log posterior at a posterior draw")
    q2 = np.where(np.isfinite(q2), q2, -np.inf)
    l1 = q1 - log_g(first)
    l2 = q2 - log_g(prop)

    # effective posterior sample size for the weights
    sizes = [len(a) // 2 for a in arrs]
    chunks = np.split(l1, np.cumsum(sizes)[:-1])
    n1_eff = n1
    if min(sizes) >= 4:
        e = float(ess(chunks)[0])
        n1_eff = float(np.clip(e, 1.0, n1)) if np.isfinite(e) else n1
    s1 = n1_eff / (n1_eff + n2)
    s2 = n2 / (n1_eff + n2)
    lstar = float(np.median(l1))
    e1 = l1 - lstar
    e2 = l2 - lstar
    log_r = 0.0
    converged = False
    for it in range(1, max_iter + 1):
        # r = [mean_j e2_j / (s1 e2_j + s2 r)] / [mean_i 1 / (s1 e1_i + s2 r)]
        num = logsumexp(e2 - np.logaddexp(math.log(s1) + e2, math.log(s2) + log_r)) - math.log(n2)
        den = logsumexp(-np.logaddexp(math.log(s1) + e1, math.log(s2) + log_r)) - math.log(n1)
        new = num - den
        if not np.isfinite(new):
            raise NumericalError("bridge iteration produced a non-finite estimate")
        step = new - log_r
        change = abs(math.expm1(step)) if step < 700 else math.inf
        log_r = new
        if change <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"bridge iteration did not reach tolerance {tol} in {max_iter} iterations", stacklevel=2)
    # approximate relative mean squared error
    f1 = np.exp(-np.logaddexp(math.log(s1) + e1, math.log(s2) + log_r))
    f2 = np.exp(e2 - np.logaddexp(math.log(s1) + e2, math.log(s2) + log_r))
    re2 = (np.var(f2, ddof=1) / np.mean(f2) ** 2) / n2 + (np.var(f1, ddof=1) / np.mean(f1) ** 2) / n1_eff
    return BridgeResult(logml=float(log_r + lstar), se=float(math.sqrt(re2)), n_iter=it, converged=converged)


def posterior_model_probs(log_marginals, prior_probs=None) -> np.ndarray:
    """Posterior model probabilities from log marginal likelihoods.

    Equal prior probabilities by default; computed as a max-shifted
    softmax, so adding a constant to every log marginal changes nothing.
    """
    lm = np.asarray(log_marginals, dtype=float).ravel()
    if lm.size == 0:
        raise ValidationError("no models supplied")
    if not np.all(np.isfinite(lm)):
        raise DomainError("log marginal likelihoods must be finite")
    if prior_probs is None:
        prior = np.full(lm.size, 1.0 / lm.size)
    else:
        prior = np.asarray(prior_probs, dtype=float).ravel()
        if prior.shape != lm.shape or np.any(prior < 0) or not np.isclose(prior.sum(), 1.0, atol=1e-12):
            raise ValidationError("prior model probabilities must be non-negative and sum to 1")
    with np.errstate(divide="ignore"):
        z = lm + np.log(prior)
    z = z - np.max(z)
    w = np.exp(z)
    return w / w.sum()


def log10_bayes_factor(log_marg_v, log_marg_j) -> float:
    """Base-10 log Bayes factor of model ``v`` against model ``j``."""
    a, b = float(log_marg_v), float(log_marg_j)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise DomainError("log marginal likelihoods must be finite")
    return (a - b) / math.log(10.0)


def lbf_matrix(names, log_marginals) -> pd.DataFrame:
    """Pairwise log10 Bayes factors; entry ``(v, j)`` favours row ``v``."""
    lm = np.asarray(log_marginals, dtype=float)
    mat = (lm[:, None] - lm[None, :]) / math.log(10.0)
    return pd.DataFrame(mat, index=list(names), columns=list(names))


def comparison_table(names, results, prior_probs=None) -> pd.DataFrame:
    """Model name, log marginal, SE and posterior model probability."""
    lm = [float(r.logml) if isinstance(r, BridgeResult) else float(r) for r in results]
    se = [r.se if isinstance(r, BridgeResult) else np.nan for r in results]
    return pd.DataFrame({"model": list(names), "log_marginal": lm, "se": se,
                         "pmp": posterior_model_probs(lm, prior_probs)})
