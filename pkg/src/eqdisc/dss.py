"""Gibbs sampler for Dirac spike-and-slab priors (independent and g-prior slabs).

Model, with ``r`` active columns ``D_r`` selected by the indicators ``z``::

    y | theta, sigma2        ~ N(D_r theta_r, sigma2 I)
    theta_r | z, sigma2, v_s ~ N(0, sigma2 v_s A_r),  A_r = I  or  N (D_r'D_r)^-1
    theta_i = 0 for z_i = 0
    v_s ~ IG(a_v, b_v),  z_i | p0 ~ Bern(p0),  p0 ~ Beta(a_p, b_p),  sigma2 ~ IG(a_sigma, b_sigma)

The z-updates use the marginal likelihood ``p(y | z, v_s)`` with theta and
sigma2 integrated out; that inner loop lives in :mod:`eqdisc._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from . import _kernels
from .errors import ConditioningError, ConfigError, NumericalError
from .linalg import cholesky, logdet_from_cholesky
from .trace import _TraceRecorder

INDEPENDENT = "independent"
GPRIOR = "gprior"

MAX_CONSECUTIVE_FAILURES = 10


@dataclass(frozen=True)
class DssPriorConfig:
    slab: str = INDEPENDENT
    a_v: float = 0.5
    b_v: float = 0.5
    a_p: float = 0.1
    b_p: float = 1.0
    a_sigma: float = 1e-4
    b_sigma: float = 1e-4

    def __post_init__(self):
        if self.slab not in (INDEPENDENT, GPRIOR):
            raise ConfigError(f"slab must be {INDEPENDENT!r} or {GPRIOR!r}, got {self.slab!r}")
        for name in ("a_v", "b_v", "a_p", "b_p", "a_sigma", "b_sigma"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"hyperparameter {name} must be positive, got {getattr(self, name)}")

    @property
    def gprior(self):
        return self.slab == GPRIOR


@dataclass
class GibbsState:
    theta: np.ndarray
    z: np.ndarray
    sigma2: float
    v_s: float
    p0: float

    def copy(self):
        return replace(self, theta=self.theta.copy(), z=self.z.copy())


class Gram:
    """Sufficient statistics ``D'D``, ``D'y`` and ``y'y`` of a design."""

    def __init__(self, D, y):
        self.D = np.asarray(D, dtype=float)
        self.G = self.D.T @ self.D
        self.n, self.p = self.D.shape
        self.set_target(y)

    def set_target(self, y):
        self.y = np.asarray(y, dtype=float)
        self.b = self.D.T @ self.y
        self.yy = float(self.y @ self.y)


def slab_precision(G_r, n, slab):
    """Inverse slab structure matrix ``A_r^-1``: identity or ``D_r'D_r / N``."""
    if slab == GPRIOR:
        return G_r / n
    return np.eye(G_r.shape[0])


def _slab_posterior(G_r, b_r, A_inv, v_s):
    """Cholesky factor of ``D_r'D_r + A^-1/v_s``, posterior mean and ``b_r'mu``."""
    L = cholesky(G_r + A_inv / v_s)
    w = solve_triangular(L, b_r, lower=True)
    mu = solve_triangular(L.T, w, lower=False)
    return L, mu, float(w @ w)


def _inv_gamma(rng, shape, scale):
    return scale / rng.standard_gamma(shape)


def _log_ml_constant(n, priors):
    a, b = priors.a_sigma, priors.b_sigma
    return float(gammaln(a + 0.5 * n) - 0.5 * n * math.log(2.0 * math.pi) + a * math.log(b) - gammaln(a))


def sample_theta_slab(y, D_r, v_s, sigma2, A0r_inverse, rng):
    """Draw the active weights from ``N(mu, sigma2 * Sigma)``.

    ``Sigma = (D_r'D_r + A0r_inverse/v_s)^-1`` and ``mu = Sigma D_r'y``.
    An empty active set returns an empty vector.
    """
    D_r = np.asarray(D_r, dtype=float)
    r = D_r.shape[1]
    if r == 0:
        return np.zeros(0)
    L, mu, _ = _slab_posterior(D_r.T @ D_r, D_r.T @ y, A0r_inverse, v_s)
    eps = rng.standard_normal(r)
    return mu + math.sqrt(sigma2) * solve_triangular(L.T, eps, lower=False)


def sigma2_posterior_scale(yy, quad, priors):
    scale = priors.b_sigma + 0.5 * (yy - quad)
    if not scale > 0:
        raise NumericalError(f"non-positive inverse-gamma scale {scale}: slab system is ill-conditioned")
    return scale


def sample_sigma2(y, D_r, v_s, A0r_inverse, priors, rng):
    """Draw the noise variance with the weights integrated out."""
    y = np.asarray(y, dtype=float)
    D_r = np.asarray(D_r, dtype=float)
    quad = 0.0
    if D_r.shape[1] > 0:
        _, _, quad = _slab_posterior(D_r.T @ D_r, D_r.T @ y, A0r_inverse, v_s)
    scale = sigma2_posterior_scale(float(y @ y), quad, priors)
    return _inv_gamma(rng, priors.a_sigma + 0.5 * y.size, scale)


def sample_vs(theta_r, A0r_inverse, sigma2, s_z, priors, rng):
    """Draw the common slab variance given the active weights."""
    theta_r = np.asarray(theta_r, dtype=float)
    quad = float(theta_r @ A0r_inverse @ theta_r) if theta_r.size else 0.0
    return _inv_gamma(rng, priors.a_v + 0.5 * s_z, priors.b_v + quad / (2.0 * sigma2))


def sample_p0(z, priors, rng):
    z = np.asarray(z)
    s_z = int(z.sum())
    return float(rng.beta(priors.a_p + s_z, priors.b_p + z.size - s_z))


def log_marginal_likelihood(y, z, v_s, priors, D):
    """``log p(y | z, v_s)`` with theta and sigma2 integrated out.

    Reference implementation on the full data; the sampler evaluates the
    same expression through Gram statistics in a compiled kernel.
    """
    y = np.asarray(y, dtype=float)
    D = np.asarray(D, dtype=float)
    z = np.asarray(z).astype(bool)
    n = y.size
    shape = priors.a_sigma + 0.5 * n
    const = _log_ml_constant(n, priors)
    yy = float(y @ y)
    r = int(z.sum())
    if r == 0:
        return const - shape * math.log(priors.b_sigma + 0.5 * yy)
    D_r = D[:, z]
    G_r = D_r.T @ D_r
    A_inv = slab_precision(G_r, n, priors.slab)
    try:
        L, _, quad = _slab_posterior(G_r, D_r.T @ y, A_inv, v_s)
        logdet_ainv = 0.0 if priors.slab == INDEPENDENT else logdet_from_cholesky(cholesky(A_inv))
    except ConditioningError as exc:
        raise ConditioningError(f"singular slab system for z = {np.flatnonzero(z).tolist()}: {exc}") from None
    scale = sigma2_posterior_scale(yy, quad, priors)
    return const - 0.5 * r * math.log(v_s) + 0.5 * logdet_ainv - 0.5 * logdet_from_cholesky(L) - shape * math.log(scale)


def _kernel_log_ml(gram, z, v_s, priors, const):
    value, status = _kernels.log_ml(
        gram.G, gram.b, gram.yy, z, float(v_s), priors.gprior, float(gram.n),
        priors.a_sigma, priors.b_sigma, const,
    )
    if status != _kernels.OK:
        raise ConditioningError(f"singular slab system for z = {np.flatnonzero(z).tolist()}")
    return value


def _sweep_z(gram, z, v_s, p0, priors, rng, const):
    """Random-order indicator sweep; returns the updated copy of ``z``."""
    z = np.array(z, dtype=np.int8)
    current = _kernel_log_ml(gram, z, v_s, priors, const)
    perm = rng.permutation(z.size)
    unif = rng.random(z.size)
    _, status, bad = _kernels.z_sweep(
        gram.G, gram.b, gram.yy, z, current, perm, unif, float(p0), float(v_s), priors.gprior,
        float(gram.n), priors.a_sigma, priors.b_sigma, const,
    )
    if status != _kernels.OK:
        raise ConditioningError(f"singular slab system while flipping indicator {bad} (z = {np.flatnonzero(z).tolist()})")
    return z


def sample_z(y, z, v_s, p0, priors, D, rng):
    """One sweep over the indicators in a fresh random order."""
    gram = Gram(D, y)
    return _sweep_z(gram, z, v_s, p0, priors, rng, _log_ml_constant(gram.n, priors))


def gibbs_sweep(state, gram, priors, rng, const=None):
    """One full Gibbs iteration; returns a new :class:`GibbsState`.

    Order: z (theta and sigma2 integrated out), sigma2 (theta integrated
    out), theta, v_s, p0.  The z, sigma2, theta steps together form one
    blocked draw, so the returned theta is always consistent with the
    returned z.
    """
    if const is None:
        const = _log_ml_constant(gram.n, priors)
    z = _sweep_z(gram, state.z, state.v_s, state.p0, priors, rng, const)
    active = np.flatnonzero(z)
    r = active.size
    theta = np.zeros(gram.p)
    if r:
        G_r = gram.G[np.ix_(active, active)]
        A_inv = slab_precision(G_r, gram.n, priors.slab)
        L, mu, quad = _slab_posterior(G_r, gram.b[active], A_inv, state.v_s)
    else:
        A_inv, quad = None, 0.0
    sigma2 = _inv_gamma(rng, priors.a_sigma + 0.5 * gram.n, sigma2_posterior_scale(gram.yy, quad, priors))
    if r:
        theta_r = mu + math.sqrt(sigma2) * solve_triangular(L.T, rng.standard_normal(r), lower=False)
        theta[active] = theta_r
    else:
        theta_r = np.zeros(0)
    v_s = sample_vs(theta_r, A_inv, sigma2, r, priors, rng)
    p0 = sample_p0(z, priors, rng)
    return GibbsState(theta=theta, z=z, sigma2=sigma2, v_s=v_s, p0=p0)


def greedy_forward_selection(D, y, k):
    """Indices of ``k`` columns chosen greedily by least-squares residual."""
    G = D.T @ D
    b = D.T @ y
    yy = float(y @ y)
    p = D.shape[1]
    chosen = []
    for _ in range(min(k, p)):
        best, best_rss = None, np.inf
        for j in range(p):
            if j in chosen:
                continue
            S = chosen + [j]
            try:
                coef = np.linalg.solve(G[np.ix_(S, S)], b[S])
            except np.linalg.LinAlgError:
                continue
            rss = yy - float(b[S] @ coef)
            if rss < best_rss - 1e-12 * max(yy, 1.0):
                best, best_rss = j, rss
        if best is None:
            break
        chosen.append(best)
    return chosen


def ols_residual_variance(D, y):
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    resid = y - D @ coef
    dof = D.shape[0] - D.shape[1]
    return float(resid @ resid) / (dof if dof > 0 else D.shape[0])


def jitter_hyperparameters(p0, v_s, sigma2, rng, scale=0.1):
    """Multiplicative log-normal perturbation of initial hyperparameters."""
    f = np.exp(scale * rng.standard_normal(3))
    return float(np.clip(p0 * f[0], 0.01, 0.5)), float(v_s * f[1]), float(sigma2 * f[2])


def n_initial_active(p0, p):
    return int(math.floor(p0 * p + 0.5))


def init_state(design, priors, p0_init=0.1, vs_init=10.0, seed=None, jitter=False):
    """Starting state: greedy z, OLS noise variance, theta drawn from its conditional."""
    rng = np.random.default_rng(seed)
    D, y = design.D, design.y
    p = D.shape[1]
    sigma2 = ols_residual_variance(D, y)
    p0, v_s = float(p0_init), float(vs_init)
    if jitter:
        p0, v_s, sigma2 = jitter_hyperparameters(p0, v_s, sigma2, rng)
    z = np.zeros(p, dtype=np.int8)
    z[greedy_forward_selection(D, y, n_initial_active(p0, p))] = 1
    theta = np.zeros(p)
    active = np.flatnonzero(z)
    if active.size:
        D_r = D[:, active]
        A_inv = slab_precision(D_r.T @ D_r, D.shape[0], priors.slab)
        theta[active] = sample_theta_slab(y, D_r, v_s, sigma2, A_inv, rng)
    return GibbsState(theta=theta, z=z, sigma2=sigma2, v_s=v_s, p0=p0)


def run_chain(design, priors, init, n_iter, n_burn, seed=None, chain_id=0):
    """Run one chain and keep the states after burn-in.

    An iteration that hits a conditioning failure is discarded and retried
    from the previous state; more than ``MAX_CONSECUTIVE_FAILURES`` in a
    row abort the chain.
    """
    rng = np.random.default_rng(seed)
    gram = design if isinstance(design, Gram) else Gram(design.D, design.y)
    recorder = _TraceRecorder(n_iter, n_burn, gram.p)
    const = _log_ml_constant(gram.n, priors)
    state = init.copy()
    state.z = np.asarray(state.z, dtype=np.int8)
    failures = consecutive = 0
    it = 0
    while it < n_iter:
        try:
            state = gibbs_sweep(state, gram, priors, rng, const)
        except NumericalError as exc:
            failures += 1
            consecutive += 1
            if consecutive > MAX_CONSECUTIVE_FAILURES:
                raise ConditioningError(
                    f"chain {chain_id} aborted at iteration {it}: {consecutive} consecutive conditioning failures ({exc})"
                ) from exc
            continue
        consecutive = 0
        recorder.record(it, state)
        it += 1
    sampler = "dss_g" if priors.gprior else "dss_i"
    return recorder.finish(chain_id=chain_id, seed=_seed_repr(seed), sampler=sampler, conditioning_failures=failures)


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed
