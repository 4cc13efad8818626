"""Multi-chain convergence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import ConfigError

MIN_SAMPLES = 10


@dataclass
class ConvergenceReport:
    r_hat_multivariate: float
    r_hat_univariate: np.ndarray
    n_chains: int
    n_samples: int
    threshold: float = 1.1
    used_columns: tuple = ()
    notes: list = field(default_factory=list)

    @property
    def computable(self):
        return bool(np.isfinite(self.r_hat_multivariate))

    @property
    def converged(self):
        return self.computable and self.r_hat_multivariate < self.threshold

    def to_dict(self):
        return {
            "r_hat_multivariate": self.r_hat_multivariate if self.computable else None,
            "r_hat_univariate": [float(r) if np.isfinite(r) else None for r in self.r_hat_univariate],
            "n_chains": self.n_chains,
            "n_samples": self.n_samples,
            "threshold": self.threshold,
            "used_columns": list(self.used_columns),
            "converged": self.converged,
            "notes": list(self.notes),
        }


def _as_chains(chains, split):
    arrs = [np.asarray(getattr(c, "theta", c), dtype=float) for c in chains]
    arrs = [a[:, None] if a.ndim == 1 else a for a in arrs]
    if len(arrs) < 2 and not split:
        raise ConfigError("at least two chains are required")
    lengths = {a.shape[0] for a in arrs}
    if len(lengths) != 1:
        raise ConfigError(f"chains must have equal lengths, got {sorted(lengths)}")
    if len({a.shape[1] for a in arrs}) != 1:
        raise ConfigError("chains must have the same number of parameters")
    if split:
        h = arrs[0].shape[0] // 2
        arrs = [half for a in arrs for half in (a[:h], a[a.shape[0] - h:])]
    if arrs[0].shape[0] < MIN_SAMPLES:
        raise ConfigError(f"each chain needs at least {MIN_SAMPLES} samples, got {arrs[0].shape[0]}")
    return np.stack(arrs)  # (m, n, p)


def _within_between(x):
    m, n, _ = x.shape
    means = x.mean(axis=1)
    dev = x - means[:, None, :]
    W = np.einsum("cni,cnj->ij", dev, dev) / (m * (n - 1))
    B_n = np.atleast_2d(np.cov(means, rowvar=False, ddof=1))
    return W, B_n


def univariate_psrf(chains, split=False):
    """Per-parameter ``((n-1)/n W + (m+1)/m B/n) / W``; NaN where W = 0."""
    x = _as_chains(chains, split)
    m, n, _ = x.shape
    W, B_n = _within_between(x)
    w, b = np.diag(W), np.diag(B_n)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ((n - 1) / n * w + (m + 1) / m * b) / w
    return np.where(w > 0, r, np.nan)


def multivariate_psrf(chains, threshold=1.1, split=False, rel_tol=1e-12):
    """Brooks-Gelman multivariate potential scale reduction factor.

    ``chains`` is a list of ``(n, p)`` sample arrays (or traces with a
    ``theta`` attribute).  Columns that never move in any chain are dropped.
    If the pooled within-chain covariance is still singular the statistic is
    computed in the span of its non-negligible eigenvectors.
    """
    x = _as_chains(chains, split)
    m, n, p = x.shape
    notes = []
    r_uni = univariate_psrf(list(x), split=False)
    W_full, _ = _within_between(x)
    keep = np.flatnonzero(np.diag(W_full) > 0)
    if keep.size < p:
        notes.append(f"excluded {p - keep.size} constant columns")
    if keep.size == 0:
        notes.append("no parameter varies; statistic not computable")
        return ConvergenceReport(np.nan, r_uni, m, n, threshold, (), notes)
    W, B_n = _within_between(x[:, :, keep])
    evals, evecs = np.linalg.eigh(W)
    good = evals > rel_tol * evals.max()
    if not np.all(good):
        notes.append(f"within-chain covariance singular; reduced to rank {int(good.sum())}")
        T = evecs[:, good]
        W, B_n = T.T @ W @ T, T.T @ B_n @ T
    lam = float(eigh(B_n, W, eigvals_only=True)[-1])
    r_hat = (n - 1) / n + (m + 1) / m * max(lam, 0.0)
    return ConvergenceReport(float(r_hat), r_uni, m, n, threshold, tuple(int(k) for k in keep), notes)
