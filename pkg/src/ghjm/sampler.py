"""Hamiltonian Monte Carlo with warm-up adaptation, and chain diagnostics.

Each transition draws a trajectory of ``L`` leapfrog steps, with ``L``
jittered uniformly around ``integration_time / step_size``. The step size
is tuned by dual averaging towards a target acceptance statistic and a
diagonal inverse mass matrix is estimated from the warm-up draws in
windows of doubling length (75-step initial buffer, 50-step terminal
buffer). A transition whose energy error exceeds 1000 counts as divergent.

Diagnostics follow the usual rank-free definitions: split-R-hat from
within- and between-half-chain variances, and effective sample size from
the combined autocorrelation, truncated at the first negative sum of an
adjacent pair.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd

from .errors import NumericalError, ValidationError

DIVERGENCE_THRESHOLD = 1000.0


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings.

    ``iterations`` counts all iterations including ``burn_in``; retained
    draws are every ``thin``-th post burn-in iteration.
    """

    iterations: int = 2000
    burn_in: int = 1000
    thin: int = 5
    chains: int = 2
    target_accept: float = 0.8
    max_leapfrog: int = 256
    integration_time: float = 1.5
    seed: int = 0
    init_jitter: float = 0.1
    divergence_warn: float = 0.01

    def __post_init__(self):
        if not (0 <= self.burn_in < self.iterations):
            raise ValidationError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.chains < 1:
            raise ValidationError("chains must be >= 1")
        if not 0 < self.target_accept < 1:
            raise ValidationError("target acceptance must lie in (0, 1)")
        if self.max_leapfrog < 1 or not self.integration_time > 0:
            raise ValidationError("max_leapfrog and integration_time must be positive")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))

    @classmethod
    def from_dict(cls, d: dict | None) -> "SamplerConfig":
        d = dict(d or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown sampler keys: {unknown}")
        return cls(**d)


@dataclass
class Target:
    """A log density on R^dim.

    ``logdensity`` must be jax-traceable. ``initial_point(rng)`` and
    ``constrain(draws) -> DataFrame`` are optional.
    """

    logdensity: Callable
    dim: int
    initial_point: Callable | None = None
    constrain: Callable | None = None
    names: list | None = None


def as_target(obj, init_jitter: float = 0.1) -> Target:
    if isinstance(obj, Target):
        return obj
    # JointModel
    return Target(
        logdensity=obj._log_density_impl,
        dim=obj.dim,
        initial_point=lambda rng: obj.initial_point(rng, jitter_var=init_jitter),
        constrain=obj.constrain,
        names=obj.layout.names,
    )


@dataclass
class PosteriorChain:
    draws: np.ndarray
    constrained: pd.DataFrame | None
    accept_stat: np.ndarray
    n_leapfrog: np.ndarray
    divergent: np.ndarray
    step_size: float
    inv_mass: np.ndarray
    seed: int
    chain: int
    names: list | None = None
    adaptation: dict = field(default_factory=dict)

    @property
    def n_divergent(self) -> int:
        return int(self.divergent.sum())

    @property
    def mean_accept(self) -> float:
        return float(np.mean(self.accept_stat))

    def frame(self) -> pd.DataFrame:
        """Constrained draws if available, otherwise unconstrained."""
        if self.constrained is not None:
            return self.constrained
        return pd.DataFrame(self.draws, columns=self.names or [f"x{j}" for j in range(self.draws.shape[1])])


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------

def leapfrog(value_and_grad, q, p, grad, eps, inv_mass, n_steps):
    """``n_steps`` leapfrog steps; returns ``(q, p, logp, grad)``.

    Exactly time reversible: negating ``p`` and integrating again
    retraces the trajectory.
    """

    def body(_, state):
        q, p, _, g = state
        p = p + 0.5 * eps * g
        q = q + eps * inv_mass * p
        lp, g = value_and_grad(q)
        p = p + 0.5 * eps * g
        return q, p, lp, g

    return jax.lax.fori_loop(0, n_steps, body, (q, p, jnp.nan, grad))


def _tracked_leapfrog(value_and_grad, q, p, grad, eps, inv_mass, n_steps, lp0):
    """Leapfrog that also reports the first NaN gradient met at a point whose
    log density is within the divergence threshold of the start."""

    def body(_, state):
        q, p, _, g, flag, coord = state
        p = p + 0.5 * eps * g
        q = q + eps * inv_mass * p
        lp, g = value_and_grad(q)
        p = p + 0.5 * eps * g
        nan = jnp.isnan(g)
        hit = ~flag & jnp.any(nan) & jnp.isfinite(lp) & (lp > lp0 - DIVERGENCE_THRESHOLD)
        coord = jnp.where(hit, jnp.argmax(nan), coord)
        return q, p, lp, g, flag | hit, coord

    init = (q, p, jnp.nan, grad, jnp.array(False), jnp.array(0))
    return jax.lax.fori_loop(0, n_steps, body, init)


def _make_kernels(logdensity):
    vg = jax.value_and_grad(logdensity)

    @jax.jit
    def transition(key, q, lp, g, eps, inv_mass, n_steps):
        p = jax.random.normal(key, q.shape) / jnp.sqrt(inv_mass)
        k0 = 0.5 * jnp.sum(inv_mass * p * p)
        q1, p1, lp1, g1, nan_grad, bad = _tracked_leapfrog(vg, q, p, g, eps, inv_mass, n_steps, lp)
        k1 = 0.5 * jnp.sum(inv_mass * p1 * p1)
        delta = (lp1 - k1) - (lp - k0)
        finite = jnp.isfinite(delta) & ~jnp.any(jnp.isnan(g1))
        # NaN gradients far out on a divergent trajectory (e.g. overflow of a
        # prior at an absurd proposal) are rejected like any divergence
        accept_prob = jnp.where(finite, jnp.minimum(1.0, jnp.exp(jnp.minimum(delta, 0.0))), 0.0)
        divergent = ~finite | (-delta > DIVERGENCE_THRESHOLD)
        u = jax.random.uniform(jax.random.fold_in(key, 1))
        accept = u < accept_prob
        q_new = jnp.where(accept, q1, q)
        lp_new = jnp.where(accept, lp1, lp)
        g_new = jnp.where(accept, g1, g)
        return q_new, lp_new, g_new, accept_prob, divergent, nan_grad, bad

    return jax.jit(vg), transition


def _check_grad(lp, g, names):
    g = np.asarray(g)
    if not np.isfinite(lp):
        raise NumericalError(f"log density is not finite at the initial point ({lp})")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        j = int(bad[0])
        raise NumericalError(f"non-finite gradient at coordinate {j}" + (f" ({names[j]})" if names else ""))


def _initial_step(vg, transition, key, q, lp, g, inv_mass):
    """Double or halve ``eps`` until one-step acceptance crosses 0.5."""
    eps = 1.0
    direction = None
    for i in range(60):
        k = jax.random.fold_in(key, i)
        *_, a, _, _, _ = transition(k, q, lp, g, eps, inv_mass, 1)
        a = float(a)
        d = 1 if a > 0.5 else -1
        if direction is None:
            direction = d
        elif d != direction:
            break
        eps = eps * 2.0 if d > 0 else eps * 0.5
    return eps


class DualAveraging:
    """Step-size adaptation (gamma=0.05, t0=10, kappa=0.75)."""

    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(eps0)

    def restart(self, eps0):
        self.mu = math.log(10.0 * eps0)
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.m = 0
        self.log_eps = math.log(eps0)

    def update(self, accept_stat):
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** (-self.kappa)
        self.log_eps_bar = eta * self.log_eps + (1 - eta) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final(self):
        return math.exp(self.log_eps_bar)


def warmup_windows(burn_in: int, init_buffer=75, term_buffer=50, base_window=25) -> list[tuple[int, int]]:
    """``(start, end)`` iterations of the mass-matrix estimation windows.

    Window lengths double; the last window is stretched to end where the
    terminal buffer starts. Short burn-ins scale the buffers down.
    """
    if burn_in < 20:
        return []
    if init_buffer + term_buffer + base_window > burn_in:
        init_buffer = int(0.15 * burn_in)
        term_buffer = int(0.1 * burn_in)
        base_window = burn_in - init_buffer - term_buffer
    out = []
    start, size = init_buffer, base_window
    last = burn_in - term_buffer
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        out.append((start, end))
        start, size = end, 2 * size
    return out


def _run_chain(target: Target, cfg: SamplerConfig, chain: int, kernels, init=None) -> PosteriorChain:
    vg, transition = kernels
    key = jax.random.fold_in(jax.random.PRNGKey(cfg.seed), chain)
    if init is not None:
        q = jnp.asarray(init, dtype=float)
    elif target.initial_point is not None:
        q = jnp.asarray(target.initial_point(np.random.default_rng([cfg.seed, chain])), dtype=float)
    else:
        q = jax.random.uniform(jax.random.fold_in(key, 10**6), (target.dim,), minval=-2.0, maxval=2.0)
    lp, g = vg(q)
    _check_grad(float(lp), g, target.names)
    inv_mass = jnp.ones(target.dim)
    eps = _initial_step(vg, transition, jax.random.fold_in(key, 10**6 + 1), q, lp, g, inv_mass)
    da = DualAveraging(eps, cfg.target_accept)
    windows = warmup_windows(cfg.burn_in)
    window_ends = {end for _, end in windows}
    slow_start = windows[0][0] if windows else cfg.burn_in
    slow_end = windows[-1][1] if windows else cfg.burn_in
    jitter_rng = np.random.default_rng([cfg.seed, chain, 1])
    window_draws = []
    keep = []
    stats = []
    n_div_all = 0
    for it in range(cfg.iterations):
        n_mean = cfg.integration_time / eps
        lo, hi = max(1, int(round(0.5 * n_mean))), max(1, int(round(1.5 * n_mean)))
        n_steps = int(min(cfg.max_leapfrog, jitter_rng.integers(lo, hi + 1)))
        q, lp, g, a, div, nan_grad, bad = transition(jax.random.fold_in(key, it), q, lp, g, eps, inv_mass, n_steps)
        if bool(nan_grad):
            j = int(bad)
            name = f" ({target.names[j]})" if target.names else ""
            raise NumericalError(f"chain {chain}, iteration {it}: NaN gradient at coordinate {j}{name}")
        a = float(a)
        if it < cfg.burn_in:
            eps = da.update(a)
            if slow_start <= it < slow_end:
                window_draws.append(np.asarray(q))
                if it + 1 in window_ends:
                    x = np.asarray(window_draws)
                    nw = len(x)
                    var = x.var(axis=0, ddof=1) if nw > 1 else np.ones(target.dim)
                    var = (nw / (nw + 5.0)) * var + 1e-3 * (5.0 / (nw + 5.0))
                    inv_mass = jnp.asarray(var)
                    window_draws = []
                    eps = _initial_step(vg, transition, jax.random.fold_in(key, 10**7 + it), q, lp, g, inv_mass)
                    da.restart(eps)
            if it == cfg.burn_in - 1:
                eps = da.final
        else:
            n_div_all += bool(div)
            if (it - cfg.burn_in) % cfg.thin == 0:
                keep.append(np.asarray(q))
                stats.append((a, n_steps, bool(div)))
    draws = np.asarray(keep)
    st = np.asarray(stats, dtype=float).reshape(-1, 3)
    constrained = target.constrain(draws) if target.constrain is not None and len(draws) else None
    return PosteriorChain(draws=draws, constrained=constrained, accept_stat=st[:, 0],
                          n_leapfrog=st[:, 1].astype(int), divergent=st[:, 2].astype(bool),
                          step_size=float(eps), inv_mass=np.asarray(inv_mass), seed=cfg.seed, chain=chain,
                          names=target.names,
                          adaptation={"windows": windows, "divergent_after_burn_in": n_div_all})


def run_hmc(model, cfg: SamplerConfig | None = None, inits=None) -> list[PosteriorChain]:
    """Run ``cfg.chains`` independent chains.

    ``model`` is a :class:`~ghjm.model.JointModel` or a :class:`Target`.
    Chain ``c`` uses the random stream derived from ``(cfg.seed, c)``.
    ``inits`` optionally gives one unconstrained starting vector per chain.
    """
    cfg = cfg or SamplerConfig()
    target = as_target(model, cfg.init_jitter)
    kernels = _make_kernels(target.logdensity)
    chains = [_run_chain(target, cfg, c, kernels, None if inits is None else inits[c])
              for c in range(cfg.chains)]
    n_div = sum(ch.adaptation["divergent_after_burn_in"] for ch in chains)
    n_tot = cfg.chains * (cfg.iterations - cfg.burn_in)
    if n_tot and n_div / n_tot > cfg.divergence_warn:
        warnings.warn(f"{n_div} of {n_tot} post burn-in transitions were divergent", stacklevel=2)
    return chains


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _autocov(x):
    """Autocovariance of each column via FFT (biased, lag 0..n-1)."""
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, n=m, axis=0)
    ac = np.fft.irfft(f * np.conj(f), n=m, axis=0)[:n]
    return ac / n


def _split(chains):
    arrs = [np.asarray(c, dtype=float) for c in chains]
    if arrs[0].ndim == 1:
        arrs = [a[:, None] for a in arrs]
    n = min(a.shape[0] for a in arrs)
    half = n // 2
    out = []
    for a in arrs:
        out += [a[:half], a[n - half:n]] if half >= 2 else [a[:n]]
    return np.stack(out)  # (m, half, p)


def split_rhat(chains) -> np.ndarray:
    x = _split(chains)
    m, n, _ = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = n * means.var(axis=0, ddof=1) if m > 1 else np.zeros(x.shape[2])
    var_plus = (n - 1) / n * W + B / n
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(var_plus / W)


def ess(chains) -> np.ndarray:
    """Effective sample size over split chains (Geyer initial positive sequence)."""
    x = _split(chains)
    m, n, p = x.shape
    acov = np.stack([_autocov(c) for c in x])  # (m, n, p)
    means = x.mean(axis=1)
    W = acov[:, 0, :].mean(axis=0) * n / (n - 1)
    B = n * means.var(axis=0, ddof=1) if m > 1 else np.zeros(p)
    var_plus = (n - 1) / n * W + B / n
    out = np.full(p, np.nan)
    for j in range(p):
        if not var_plus[j] > 0:
            continue
        rho = 1.0 - (W[j] - acov[:, :, j].mean(axis=0)) / var_plus[j]
        rho[0] = 1.0
        tau_sum = 0.0
        prev = np.inf
        for k in range(0, n - 1, 2):
            pair = rho[k] + rho[k + 1]
            if pair < 0:
                break
            pair = min(pair, prev)  # monotone sequence
            tau_sum += pair
            prev = pair
        tau = max(-1.0 + 2.0 * tau_sum, 1.0 / math.log10(max(m * n, 10)))
        out[j] = m * n / tau
    return out


def diagnostics(chains, names=None) -> pd.DataFrame:
    """Per-parameter split-R-hat, ESS and Monte Carlo standard error.

    ``chains`` is a list of :class:`PosteriorChain` (constrained draws are
    used when available) or of ``(draws, p)`` arrays. A single chain is
    split in halves. Parameters with zero variance are flagged
    ``degenerate`` with NaN R-hat and ESS.
    """
    if not len(chains):
        raise ValidationError("no chains supplied")
    if isinstance(chains[0], PosteriorChain):
        frames = [c.frame() for c in chains]
        names = names or list(frames[0].columns)
        arrs = [f.to_numpy() for f in frames]
    else:
        arrs = [np.asarray(c, dtype=float).reshape(len(c), -1) for c in chains]
        names = names or [f"x{j}" for j in range(arrs[0].shape[1])]
    if min(a.shape[0] for a in arrs) < 10:
        raise ValidationError("at least 10 retained draws per chain are needed for diagnostics")
    allx = np.concatenate(arrs)
    sd = allx.std(axis=0, ddof=1)
    degenerate = ~(sd > 0)
    r = split_rhat(arrs)
    e = ess(arrs)
    r[degenerate] = np.nan
    e[degenerate] = np.nan
    with np.errstate(invalid="ignore", divide="ignore"):
        mcse = sd / np.sqrt(e)
    return pd.DataFrame({"mean": allx.mean(axis=0), "sd": sd, "rhat": r, "ess": e, "mcse": mcse,
                         "degenerate": degenerate}, index=pd.Index(names, name="parameter"))
