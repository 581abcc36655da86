"""Log posterior, its gradient and the random-effects marginal likelihood.

The sampler works on the augmented posterior (parameters and random
effects together). :func:`marginal_loglik_ghq` integrates the random
effects out numerically and serves as a verification oracle.
"""

from __future__ import annotations

import math
import warnings

import jax
import jax.numpy as jnp
import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from .errors import DomainError, NumericalError, ShapeError
from .longitudinal import re_log_density
from .model import JointModel
from .priors import from_unconstrained


def log_posterior(flat, model: JointModel) -> float:
    """Unnormalised log posterior at an unconstrained vector (exact summation)."""
    return model.log_posterior(flat)


def grad_log_posterior(flat, model: JointModel) -> np.ndarray:
    """Gradient of :func:`log_posterior` by reverse-mode autodiff."""
    return model.grad_log_posterior(flat)


def _integrand(model: JointModel, P, B):
    """Per-subject log integrand ``log f_L + log f_S + log phi(b)`` at the
    ``(n, 2)`` random-effects array ``B``."""
    return model.subject_loglik(P, B) + re_log_density(B, P["sigma1sq"], P["sigma2sq"], P["rho"])


def _grad_hess(f, B):
    """Per-subject gradient and 2x2 Hessian of a separable ``f``."""
    g_fn = jax.grad(lambda x: jnp.sum(f(x)))
    g = g_fn(B)
    e0 = jnp.zeros_like(B).at[:, 0].set(1.0)
    e1 = jnp.zeros_like(B).at[:, 1].set(1.0)
    h0 = jax.jvp(g_fn, (B,), (e0,))[1]
    h1 = jax.jvp(g_fn, (B,), (e1,))[1]
    H = jnp.stack([h0, h1], axis=-1)  # H[i, :, j] = d g_i / d b_j
    return g, 0.5 * (H + jnp.swapaxes(H, -1, -2))


def _kernels(model: JointModel):
    """Jitted integrand, gradient/Hessian and node-batched integrand,
    compiled once per model."""
    cache = model.__dict__.get("_ghq_kernels")
    if cache is None:
        f = jax.jit(lambda P, B: _integrand(model, P, B))
        gh = jax.jit(lambda P, B: _grad_hess(lambda x: _integrand(model, P, x), B))
        fv = jax.jit(jax.vmap(lambda P, B: _integrand(model, P, B), in_axes=(None, 0)))
        cache = model.__dict__["_ghq_kernels"] = (f, gh, fv)
    return cache


def find_modes(model: JointModel, P, max_iter: int = 100, tol: float = 1e-10):
    """Per-subject modes of the log integrand by damped Newton.

    Returns ``(modes, hessians, ok)`` where ``ok`` flags subjects whose
    negative Hessian at the returned point is positive definite.
    """
    f_p, gh_p, _ = _kernels(model)

    def f(B):
        return f_p(P, B)

    def gh(B):
        return gh_p(P, B)

    n = model.n
    B = jnp.zeros((n, 2))
    fb = f(B)
    for _ in range(max_iter):
        g, H = gh(B)
        g, H = np.asarray(g), np.asarray(H)
        negH = -H
        det = negH[:, 0, 0] * negH[:, 1, 1] - negH[:, 0, 1] ** 2
        pd_ok = (negH[:, 0, 0] > 0) & (det > 0)
        safe_det = np.where(pd_ok, det, 1.0)
        newton = np.stack([negH[:, 1, 1] * g[:, 0] - negH[:, 0, 1] * g[:, 1],
                           negH[:, 0, 0] * g[:, 1] - negH[:, 0, 1] * g[:, 0]], axis=1) / safe_det[:, None]
        step = np.where(pd_ok[:, None], newton, 0.1 * g)
        if np.max(np.abs(g)) < tol:
            break
        t = np.ones(n)
        accepted = np.zeros(n, bool)
        for _ in range(40):
            cand = np.asarray(B) + t[:, None] * step
            fc = np.asarray(f(jnp.asarray(cand)))
            good = np.isfinite(fc) & (fc >= np.asarray(fb) - 1e-12)
            newly = good & ~accepted
            B = jnp.where(jnp.asarray(newly)[:, None], cand, B)
            fb = jnp.where(jnp.asarray(newly), fc, fb)
            accepted |= good
            if accepted.all():
                break
            t = np.where(accepted, t, 0.5 * t)
        moved = np.where(accepted[:, None], t[:, None] * step, 0.0)
        if np.max(np.abs(moved)) < 1e-14:
            break
    g, H = gh(B)
    negH = -np.asarray(H)
    det = negH[:, 0, 0] * negH[:, 1, 1] - negH[:, 0, 1] ** 2
    ok = (negH[:, 0, 0] > 0) & (det > 0) & np.isfinite(det)
    return np.asarray(B), np.asarray(H), ok


def marginal_loglik_ghq(params: dict, model: JointModel, nodes: int = 25, per_subject: bool = False):
    """Log marginal likelihood with the random effects integrated out.

    Each subject's two-dimensional integral is computed by adaptive
    Gauss-Hermite quadrature: nodes are recentred at the mode of the
    integrand and scaled by the Cholesky factor of the inverse negative
    Hessian. Subjects with a non positive-definite Hessian fall back to
    quadrature centred on the random-effects prior (with a warning).

    Parameters
    ----------
    params : dict
        Constrained parameter values keyed by block name (random effects
        are ignored).
    model : JointModel
    nodes : int
        Nodes per dimension, at least 5.
    per_subject : bool
        Return the vector of per-subject contributions instead of the sum.
    """
    if int(nodes) != nodes or nodes < 5:
        raise DomainError("Gauss-Hermite quadrature needs at least 5 nodes per dimension")
    P = model.params_dict(params)
    n = model.n
    P = {k: jnp.asarray(v, dtype=float) for k, v in P.items()}
    if n == 0:
        return np.zeros(0) if per_subject else 0.0
    modes, H, ok = find_modes(model, P)
    sigma = np.asarray([[P["sigma1sq"], P["rho"] * jnp.sqrt(P["sigma1sq"] * P["sigma2sq"])],
                        [P["rho"] * jnp.sqrt(P["sigma1sq"] * P["sigma2sq"]), P["sigma2sq"]]], dtype=float)
    L = np.empty((n, 2, 2))
    centre = modes.copy()
    for i in range(n):
        if ok[i]:
            L[i] = np.linalg.cholesky(np.linalg.inv(-H[i]))
        else:
            L[i] = np.linalg.cholesky(sigma)
            centre[i] = 0.0
    if not ok.all():
        bad = [model.subject_ids[i] for i in np.flatnonzero(~ok)]
        warnings.warn(f"Hessian not positive definite for subjects {bad[:5]}; "
                      "using prior-centred quadrature for them", stacklevel=2)
    x, w = hermgauss(int(nodes))
    X = np.array(np.meshgrid(x, x, indexing="ij")).reshape(2, -1).T  # (m, 2)
    logw = (np.log(w)[:, None] + np.log(w)[None, :]).ravel() + np.sum(X ** 2, axis=1)
    B = centre[None, :, :] + np.sqrt(2.0) * np.einsum("nij,mj->mni", L, X)
    vals = np.asarray(_kernels(model)[2](P, jnp.asarray(B)))  # (m, n)
    if not np.all(np.isfinite(vals)):
        i = int(np.flatnonzero(~np.isfinite(vals).all(axis=0))[0])
        raise NumericalError(f"non-finite integrand for subject {model.subject_ids[i]}")
    log_det = np.log(L[:, 0, 0]) + np.log(L[:, 1, 1])
    out = math.log(2.0) + log_det + logsumexp(vals + logw[:, None], axis=0)
    return out if per_subject else math.fsum(out)


def parameter_blocks(model: JointModel) -> list:
    """Layout blocks other than the random effects."""
    return [b for b in model.layout.blocks if b.name != "z"]


def split_draws(draws, model: JointModel) -> np.ndarray:
    """Columns of unconstrained draws that are not random effects."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    idx = np.concatenate([np.arange(model.dim)[model.layout.slices[b.name]] for b in parameter_blocks(model)])
    return draws[:, idx]


def marginal_log_posterior(theta, model: JointModel, nodes: int = 9) -> float:
    """Log posterior of the parameters with the random effects integrated out.

    ``theta`` is the unconstrained parameter vector without random effects
    (as returned by :func:`split_draws`); the value includes the prior,
    the log-Jacobian and the adaptive Gauss-Hermite marginal likelihood.
    """
    theta = np.asarray(theta, dtype=float)
    values, logj, start = {}, 0.0, 0
    for blk in parameter_blocks(model):
        u = theta[start:start + blk.size]
        x, lj = from_unconstrained(jnp.asarray(u), blk.kind)
        values[blk.name] = np.asarray(x)
        logj += float(jnp.sum(lj))
        start += blk.size
    if start != theta.size:
        raise ShapeError(f"parameter vector has length {theta.size}, expected {start}")
    P = model.params_dict(values)
    P = {k: jnp.asarray(v, dtype=float) for k, v in P.items()}
    prior = math.fsum(np.asarray(model.prior_terms(P)).ravel())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lik = marginal_loglik_ghq(values, model, nodes)
    return lik + prior + logj
