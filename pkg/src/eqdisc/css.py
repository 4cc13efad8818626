"""Gibbs sampler for the continuous spike-and-slab prior.

Each weight has its own slab variance ``v_s[i]``; the indicator scales the
prior variance by ``v0`` (spike) or ``v1`` (slab)::

    theta_i | z_i, v_s[i], sigma2 ~ N(0, sigma2 * v_s[i] * (v0 (1 - z_i) + v1 z_i))

All conditionals are full conditionals, so the weights are never exactly
zero and selection is carried by ``z`` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .dss import (
    Gram,
    _seed_repr,
    greedy_forward_selection,
    jitter_hyperparameters,
    n_initial_active,
    ols_residual_variance,
)
from .errors import ConditioningError, ConfigError, NumericalError
from .linalg import cholesky
from .trace import _TraceRecorder

MAX_CONSECUTIVE_FAILURES = 10


@dataclass(frozen=True)
class CssPriorConfig:
    """Hyperparameters of the continuous prior.

    ``v0=None`` means ``1/N`` for the training size at hand; ``v1`` is then
    ``v1_ratio * v0``.  ``basad_scale_convention`` selects the slab-variance
    update scale ``theta_i^2 / (2 sigma2 c_i)``; the default uses
    ``0.5 theta_i^2 / (2 sigma2 c_i)``.
    """

    v0: float | None = None
    v1_ratio: float = 100.0
    a_v: float = 0.5
    b_v: float = 0.5
    a_p: float = 0.1
    b_p: float = 1.0
    a_sigma: float = 1e-4
    b_sigma: float = 1e-4
    vs_init: float = 10.0
    basad_scale_convention: bool = False

    def __post_init__(self):
        for name in ("a_v", "b_v", "a_p", "b_p", "a_sigma", "b_sigma", "vs_init"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"hyperparameter {name} must be positive, got {getattr(self, name)}")
        if self.v0 is not None and not self.v0 > 0:
            raise ConfigError(f"v0 must be positive, got {self.v0}")
        if not self.v1_ratio >= 10:
            raise ConfigError(f"v1/v0 must be at least 10 to separate spike and slab, got {self.v1_ratio}")

    def resolve(self, n):
        """Concrete ``(v0, v1)`` for training size ``n``."""
        v0 = 1.0 / n if self.v0 is None else self.v0
        return v0, self.v1_ratio * v0

    @property
    def vs_scale_factor(self):
        return 1.0 if self.basad_scale_convention else 0.5


@dataclass
class CssState:
    theta: np.ndarray
    z: np.ndarray
    sigma2: float
    v_s: np.ndarray
    p0: float

    def copy(self):
        return replace(self, theta=self.theta.copy(), z=self.z.copy(), v_s=self.v_s.copy())


def component_scale(z, v0, v1):
    z = np.asarray(z, dtype=float)
    return v0 * (1.0 - z) + v1 * z


def prior_variances(z, v_s, v0, v1):
    """Diagonal of V: ``v_s[i] * (v0 (1 - z_i) + v1 z_i)``."""
    return np.asarray(v_s, dtype=float) * component_scale(z, v0, v1)


def _theta_posterior(G, b, V):
    L = cholesky(G + np.diag(1.0 / V))
    mu = solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)
    return L, mu


def sample_theta_full(y, D, V, sigma2, rng):
    """Draw all weights from ``N(mu, sigma2 (D'D + V^-1)^-1)``."""
    D = np.asarray(D, dtype=float)
    V = np.asarray(V, dtype=float)
    if np.any(~(V > 0)):
        raise ConfigError("prior variances must be positive")
    L, mu = _theta_posterior(D.T @ D, D.T @ np.asarray(y, dtype=float), V)
    return mu + math.sqrt(sigma2) * solve_triangular(L.T, rng.standard_normal(V.size), lower=False)


def sigma2_scale_css(y, D, theta, V, priors):
    resid = np.asarray(y, dtype=float) - np.asarray(D, dtype=float) @ theta
    return priors.b_sigma + 0.5 * (float(resid @ resid) + float(np.sum(theta**2 / V)))


def sample_sigma2_css(y, D, theta, V, priors, rng):
    """Draw the noise variance given the weights (shape ``a + N/2 + P/2``)."""
    n, p = np.shape(D)
    return sigma2_scale_css(y, D, theta, V, priors) / rng.standard_gamma(priors.a_sigma + 0.5 * n + 0.5 * p)


def vs_scale_css(theta, z, sigma2, priors, v0, v1):
    theta = np.asarray(theta, dtype=float)
    return priors.b_v + priors.vs_scale_factor * theta**2 / (2.0 * sigma2 * component_scale(z, v0, v1))


def sample_vs_css(theta, z, sigma2, priors, v0, v1, rng):
    """Componentwise inverse-gamma draws of the weight-specific slab variances."""
    scale = vs_scale_css(theta, z, sigma2, priors, v0, v1)
    return scale / rng.standard_gamma(priors.a_v + 0.5, size=np.shape(scale))


def inclusion_probability(theta, v_s, sigma2, p0, v0, v1):
    """``P(z_i = 1 | theta_i, v_s[i], sigma2, p0)`` evaluated in log space."""
    theta = np.asarray(theta, dtype=float)
    v_s = np.asarray(v_s, dtype=float)
    t2 = theta**2 / (2.0 * sigma2 * v_s)
    # log N(theta; 0, s2 v v1) - log N(theta; 0, s2 v v0)
    log_ratio = 0.5 * math.log(v0 / v1) + t2 * (1.0 / v0 - 1.0 / v1)
    with np.errstate(divide="ignore"):
        log_prior_odds = np.log(p0) - np.log1p(-p0)
    return expit(log_prior_odds + log_ratio)


def sample_z_css(theta, v_s, sigma2, p0, v0, v1, rng):
    """Bernoulli draws of all indicators.

    The indicators are conditionally independent given the weights, so a
    single vectorised draw is equivalent to any sequential visiting order.
    """
    xi = inclusion_probability(theta, v_s, sigma2, p0, v0, v1)
    return (rng.random(np.shape(xi)) < xi).astype(np.int8)


def gibbs_sweep_css(state, gram, priors, rng, v0, v1):
    """theta, sigma2, v_s, p0, z in turn; returns a new state."""
    V = prior_variances(state.z, state.v_s, v0, v1)
    L, mu = _theta_posterior(gram.G, gram.b, V)
    theta = mu + math.sqrt(state.sigma2) * solve_triangular(L.T, rng.standard_normal(gram.p), lower=False)
    resid_ss = gram.yy - 2.0 * float(theta @ gram.b) + float(theta @ gram.G @ theta)
    scale = priors.b_sigma + 0.5 * (resid_ss + float(np.sum(theta**2 / V)))
    if not scale > 0:
        raise NumericalError(f"non-positive inverse-gamma scale {scale}")
    sigma2 = scale / rng.standard_gamma(priors.a_sigma + 0.5 * gram.n + 0.5 * gram.p)
    v_s = sample_vs_css(theta, state.z, sigma2, priors, v0, v1, rng)
    s_z = int(state.z.sum())
    p0 = float(rng.beta(priors.a_p + s_z, priors.b_p + gram.p - s_z))
    z = sample_z_css(theta, v_s, sigma2, p0, v0, v1, rng)
    return CssState(theta=theta, z=z, sigma2=sigma2, v_s=v_s, p0=p0)


def init_state_css(design, priors, p0_init=0.1, seed=None, jitter=False):
    rng = np.random.default_rng(seed)
    D, y = design.D, design.y
    n, p = D.shape
    v0, v1 = priors.resolve(n)
    sigma2 = ols_residual_variance(D, y)
    p0, vs = float(p0_init), float(priors.vs_init)
    if jitter:
        p0, vs, sigma2 = jitter_hyperparameters(p0, vs, sigma2, rng)
    z = np.zeros(p, dtype=np.int8)
    z[greedy_forward_selection(D, y, n_initial_active(p0, p))] = 1
    v_s = np.full(p, vs)
    theta = sample_theta_full(y, D, prior_variances(z, v_s, v0, v1), sigma2, rng)
    return CssState(theta=theta, z=z, sigma2=sigma2, v_s=v_s, p0=p0)


def run_chain_css(design, priors, init, n_iter, n_burn, seed=None, chain_id=0):
    rng = np.random.default_rng(seed)
    gram = design if isinstance(design, Gram) else Gram(design.D, design.y)
    v0, v1 = priors.resolve(gram.n)
    recorder = _TraceRecorder(n_iter, n_burn, gram.p, per_weight_vs=True)
    state = init.copy()
    failures = consecutive = 0
    it = 0
    while it < n_iter:
        try:
            state = gibbs_sweep_css(state, gram, priors, rng, v0, v1)
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
    return recorder.finish(chain_id=chain_id, seed=_seed_repr(seed), sampler="css", conditioning_failures=failures)
