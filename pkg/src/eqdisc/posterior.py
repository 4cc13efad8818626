"""Inclusion probabilities, median-probability model, weight summaries and prediction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import dictionary as dic
from .errors import ConfigError, DataError


def _stack(traces, attr):
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
    if not traces:
        raise DataError("no traces supplied")
    arr = np.concatenate([np.asarray(getattr(t, attr)) if not isinstance(t, np.ndarray) else t for t in traces])
    if arr.shape[0] == 0:
        raise DataError("traces hold no samples")
    return arr


def compute_pip(traces):
    """Fraction of post-burn-in samples, across all chains, with ``z_i = 1``.

    Accepts a trace, a list of traces, or an integer array of z samples.
    """
    if isinstance(traces, np.ndarray):
        z = traces
        if z.shape[0] == 0:
            raise DataError("traces hold no samples")
    else:
        z = _stack(traces, "z")
    return z.astype(float).mean(axis=0)


def select_model(pip, threshold=0.5):
    """Median probability model: columns with PIP strictly above ``threshold``."""
    return np.asarray(pip, dtype=float) > threshold


def _masked_moments(theta, mask):
    theta = np.where(mask, theta, 0.0)
    mu = theta.mean(axis=0)
    if theta.shape[0] > 1:
        Sigma = np.cov(theta, rowvar=False, ddof=1).reshape(mu.size, mu.size)
    else:
        Sigma = np.zeros((mu.size, mu.size))
    return mu, Sigma


def summarize_weights(traces, mask, scaling):
    """Sample mean and covariance of the selected weights, scaled and physical.

    Returns ``(mu_s, Sigma_s, mu, Sigma)``; unselected entries are zero.
    """
    theta = theta_samples(traces)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (theta.shape[1],):
        raise ConfigError(f"mask length {mask.shape} does not match {theta.shape[1]} weights")
    mu_s, Sigma_s = _masked_moments(theta, mask)
    mu, Sigma = dic.unscale_weights(mu_s, Sigma_s, scaling)
    return mu_s, Sigma_s, mu, Sigma


def theta_samples(traces):
    return _stack(traces, "theta")


@dataclass
class PosteriorSummary:
    names: tuple
    pip: np.ndarray
    selected: np.ndarray
    mu_theta_scaled: np.ndarray
    Sigma_theta_scaled: np.ndarray
    mu_theta: np.ndarray
    Sigma_theta: np.ndarray
    mu_sigma2: float
    J: int
    scaling: dic.Scaling
    basis_config: dic.BasisConfig = field(default_factory=dic.BasisConfig)
    threshold: float = 0.5

    @property
    def sd_theta(self):
        return np.sqrt(np.clip(np.diag(self.Sigma_theta), 0.0, None))

    @property
    def cov_percent(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.selected, 100.0 * self.sd_theta / np.abs(self.mu_theta), np.nan)

    def equation(self, digits=4):
        return render_equation(self.names, self.mu_theta, self.selected, digits)

    def to_dict(self):
        terms = []
        for i, name in enumerate(self.names):
            entry = {
                "name": name,
                "pip": float(self.pip[i]),
                "selected": bool(self.selected[i]),
                "mean": float(self.mu_theta[i]),
                "sd": float(self.sd_theta[i]),
                "cov_percent": None if not self.selected[i] else _finite_or_none(self.cov_percent[i]),
            }
            if self.selected[i]:
                label, value = physical_term(name, self.mu_theta[i])
                entry["physical_label"] = label
                entry["physical_value"] = value
            terms.append(entry)
        return {
            "J": int(self.J),
            "threshold": self.threshold,
            "mu_sigma2": float(self.mu_sigma2),
            "equation": self.equation(),
            "cov_basis": "unscaled",
            "terms": terms,
            "scaling": self.scaling.to_dict(),
            "basis_config": self.basis_config.to_dict(),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _finite_or_none(x):
    return float(x) if np.isfinite(x) else None


def physical_term(name, weight):
    """Label and value in the moved-to-the-left convention (``-x1`` style).

    State terms carry the negated regression weight, the input term keeps
    its sign.
    """
    if name == "u":
        return "u", float(weight)
    return f"-{name}", float(-weight)


def render_equation(names, weights, mask, digits=4):
    """``x2dot = -997.9*x1 - 2.018*x2 + 0.9947*u`` from the selected weights."""
    parts = []
    for name, w, keep in zip(names, weights, mask):
        if not keep:
            continue
        mag = f"{abs(w):.{digits}g}*{name}"
        if not parts:
            parts.append(f"-{mag}" if w < 0 else mag)
        else:
            parts.append(f"- {mag}" if w < 0 else f"+ {mag}")
    return "x2dot = " + (" ".join(parts) if parts else "0")


def summarize(traces, design, threshold=0.5, basis_config=None):
    """Full posterior summary from the traces of one run."""
    pip = compute_pip(traces)
    mask = select_model(pip, threshold)
    mu_s, Sigma_s, mu, Sigma = summarize_weights(traces, mask, design.scaling)
    sigma2 = _stack(traces, "sigma2")
    return PosteriorSummary(
        names=tuple(design.names),
        pip=pip,
        selected=mask,
        mu_theta_scaled=mu_s,
        Sigma_theta_scaled=Sigma_s,
        mu_theta=mu,
        Sigma_theta=Sigma,
        mu_sigma2=float(sigma2.mean()),
        J=int(sigma2.size),
        scaling=design.scaling,
        basis_config=basis_config or dic.BasisConfig(),
        threshold=threshold,
    )


@dataclass
class PredictiveDistribution:
    mean: np.ndarray
    covariance: np.ndarray | None = None
    variance: np.ndarray | None = None

    def __post_init__(self):
        if self.variance is None and self.covariance is not None:
            self.variance = np.diag(self.covariance).copy()


def predict(summary, test_data, diagonal=False, basis_config=None):
    """Predictive mean and covariance on a test dataset.

    The mean inverts the training standardisation exactly,
    ``mu_y + (D* - mu_D) theta``, so a constant offset in the training
    target is carried over.  ``diagonal=True`` returns variances only.
    """
    if basis_config is not None and basis_config != summary.basis_config:
        raise ConfigError("test basis config differs from the one used for training")
    if isinstance(test_data, dic.Dictionary):
        if test_data.config != summary.basis_config or test_data.names != tuple(summary.names):
            raise ConfigError("test dictionary does not match the training basis set")
        D = test_data.D
    else:
        D = dic.build(test_data, summary.basis_config, check_constant=False).D
    if D.shape[1] != len(summary.names):
        raise ConfigError(f"test dictionary has {D.shape[1]} columns, summary has {len(summary.names)}")
    theta = summary.mu_theta
    mean = summary.scaling.mu_y + (D - summary.scaling.mu_D) @ theta
    Sig = summary.Sigma_theta
    sel = np.flatnonzero(summary.selected)
    if diagonal:
        Ds = D[:, sel]
        var = np.einsum("ij,jk,ik->i", Ds, Sig[np.ix_(sel, sel)], Ds) + summary.mu_sigma2
        return PredictiveDistribution(mean=mean, variance=var)
    Ds = D[:, sel]
    cov = Ds @ Sig[np.ix_(sel, sel)] @ Ds.T
    cov = 0.5 * (cov + cov.T)
    cov[np.diag_indices_from(cov)] += summary.mu_sigma2
    return PredictiveDistribution(mean=mean, covariance=cov)
