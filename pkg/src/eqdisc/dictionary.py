"""Candidate-basis dictionary, column standardisation and weight back-transform."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

__all__ = [
    "BasisConfig",
    "BasisDescriptor",
    "Dictionary",
    "Scaling",
    "ScaledDesign",
    "ConditionReport",
    "basis_descriptors",
    "build",
    "normalize",
    "unscale_weights",
    "condition_report",
]


@dataclass(frozen=True)
class BasisConfig:
    max_degree: int = 6
    signum: bool = True
    absolute: bool = True
    state_times_abs: bool = True
    input: bool = True

    def __post_init__(self):
        if not 1 <= self.max_degree <= 6:
            raise ConfigError(f"max_degree must lie in [1, 6], got {self.max_degree}")

    def to_dict(self):
        return {
            "max_degree": self.max_degree,
            "signum": self.signum,
            "absolute": self.absolute,
            "state_times_abs": self.state_times_abs,
            "input": self.input,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ConfigError(f"unknown basis config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class BasisDescriptor:
    """One dictionary column.

    ``kind`` is one of ``poly``, ``sgn``, ``abs``, ``state_abs`` or ``input``.
    ``args`` holds the powers ``(p1, p2)`` for ``poly``, the state index for
    ``sgn``/``abs`` and the ``(i, j)`` pair for ``x_i*|x_j|``.
    """

    name: str
    kind: str
    args: tuple = ()

    def evaluate(self, x1, x2, u):
        states = (x1, x2)
        if self.kind == "poly":
            p1, p2 = self.args
            return x1**p1 * x2**p2
        if self.kind == "sgn":
            return np.sign(states[self.args[0]])
        if self.kind == "abs":
            return np.abs(states[self.args[0]])
        if self.kind == "state_abs":
            i, j = self.args
            return states[i] * np.abs(states[j])
        if self.kind == "input":
            return np.asarray(u, dtype=float)
        raise ConfigError(f"unknown basis kind {self.kind!r}")


def _monomial_name(p1, p2):
    parts = []
    for var, p in (("x1", p1), ("x2", p2)):
        if p == 1:
            parts.append(var)
        elif p > 1:
            parts.append(f"{var}^{p}")
    return "*".join(parts)


def basis_descriptors(config=BasisConfig()):
    """Ordered column descriptors for a basis configuration.

    Monomials come first by total degree, and within a degree by descending
    power of x1; then sgn, abs and state-times-abs families; then the input.
    """
    bases = []
    for degree in range(1, config.max_degree + 1):
        for p1 in range(degree, -1, -1):
            p2 = degree - p1
            bases.append(BasisDescriptor(_monomial_name(p1, p2), "poly", (p1, p2)))
    if config.signum:
        bases += [BasisDescriptor(f"sgn(x{i + 1})", "sgn", (i,)) for i in range(2)]
    if config.absolute:
        bases += [BasisDescriptor(f"|x{i + 1}|", "abs", (i,)) for i in range(2)]
    if config.state_times_abs:
        bases += [
            BasisDescriptor(f"x{i + 1}*|x{j + 1}|", "state_abs", (i, j)) for i in range(2) for j in range(2)
        ]
    if config.input:
        bases.append(BasisDescriptor("u", "input"))
    return tuple(bases)


@dataclass(frozen=True)
class Scaling:
    mu_D: np.ndarray
    S_D: np.ndarray
    mu_y: float

    def to_dict(self):
        return {"mu_D": self.mu_D.tolist(), "S_D": self.S_D.tolist(), "mu_y": float(self.mu_y)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mu_D"], float), np.asarray(d["S_D"], float), float(d["mu_y"]))


@dataclass(frozen=True)
class ScaledDesign:
    """Standardised dictionary and centred target handed to the samplers."""

    D: np.ndarray
    y: np.ndarray
    scaling: Scaling
    names: tuple = ()

    @property
    def n(self):
        return self.D.shape[0]

    @property
    def p(self):
        return self.D.shape[1]


@dataclass(frozen=True)
class Dictionary:
    D: np.ndarray
    bases: tuple
    y: np.ndarray
    config: BasisConfig = field(default_factory=BasisConfig)
    scaling: Scaling | None = None

    @property
    def names(self):
        return tuple(b.name for b in self.bases)

    def index(self, name):
        return self.names.index(name)

    def to_csv(self, path):
        from .io import write_rows

        write_rows(path, self.names, list(self.D.T))


def build(data, config=BasisConfig(), check_constant=True):
    """Evaluate every basis on the dataset; the target is the acceleration.

    ``check_constant=False`` skips the constant-column check, which only
    matters for training dictionaries that will be standardised.
    """
    for ch in ("x1", "x2", "x2dot", "u"):
        if not np.all(np.isfinite(getattr(data, ch))):
            raise DataError(f"channel {ch} contains non-finite values")
    bases = basis_descriptors(config)
    D = np.column_stack([b.evaluate(data.x1, data.x2, data.u) for b in bases]).astype(float)
    n, p = D.shape
    if n < p:
        log.warning("dictionary has fewer rows (%d) than columns (%d)", n, p)
    if check_constant:
        for j, b in enumerate(bases):
            col = D[:, j]
            if np.all(col == col[0]):
                raise DataError(f"dictionary column {b.name!r} is constant")
    return Dictionary(D=D, bases=bases, y=np.array(data.x2dot, dtype=float), config=config)


def normalize(dictionary, target=None):
    """Standardise columns (sample std, ddof=1) and centre the target."""
    D = dictionary.D
    y = dictionary.y if target is None else np.asarray(target, dtype=float)
    if y.shape != (D.shape[0],):
        raise ConfigError(f"target length {y.shape} does not match dictionary rows {D.shape[0]}")
    mu_D = D.mean(axis=0)
    S_D = D.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(S_D > 0))
    if bad.size:
        names = [dictionary.bases[j].name for j in bad]
        raise DataError(f"dictionary columns with zero standard deviation: {names}")
    mu_y = float(y.mean())
    scaling = Scaling(mu_D=mu_D, S_D=S_D, mu_y=mu_y)
    return ScaledDesign(D=(D - mu_D) / S_D, y=y - mu_y, scaling=scaling, names=dictionary.names)


def unscale_weights(mu_s, Sigma_s, scaling):
    """Map scaled-space weight mean/covariance to physical units."""
    S = np.asarray(scaling.S_D if isinstance(scaling, Scaling) else scaling, dtype=float)
    mu_s = np.asarray(mu_s, dtype=float)
    Sigma_s = np.asarray(Sigma_s, dtype=float)
    p = S.size
    if mu_s.shape != (p,) or Sigma_s.shape != (p, p):
        raise ConfigError(f"dimension mismatch: scaling has {p} columns, got mu {mu_s.shape}, Sigma {Sigma_s.shape}")
    inv = 1.0 / S
    return mu_s * inv, Sigma_s * np.outer(inv, inv)


@dataclass
class ConditionReport:
    condition_number: float
    correlated_pairs: list

    def to_dict(self):
        return {
            "condition_number": self.condition_number,
            "correlated_pairs": [[a, b, c] for a, b, c in self.correlated_pairs],
        }


def condition_report(design, threshold=0.9):
    """Condition number of a standardised design and its highly correlated column pairs."""
    D = design.D
    names = design.names or tuple(f"c{j}" for j in range(D.shape[1]))
    cond = float(np.linalg.cond(D))
    Dc = D - D.mean(axis=0)
    norms = np.linalg.norm(Dc, axis=0)
    corr = (Dc.T @ Dc) / np.outer(norms, norms)
    pairs = []
    p = D.shape[1]
    for i in range(p):
        for j in range(i + 1, p):
            if abs(corr[i, j]) > threshold:
                pairs.append((names[i], names[j], float(corr[i, j])))
    return ConditionReport(condition_number=cond, correlated_pairs=pairs)
