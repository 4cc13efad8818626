"""Post-burn-in chain storage shared by the DSS and CSS samplers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .io import write_rows


@dataclass
class ChainTrace:
    theta: np.ndarray  # (J, P)
    z: np.ndarray  # (J, P) int8
    sigma2: np.ndarray  # (J,)
    v_s: np.ndarray  # (J,) for DSS, (J, P) for CSS
    p0: np.ndarray  # (J,)
    chain_id: int = 0
    seed: object = None
    n_iter: int = 0
    n_burn: int = 0
    sampler: str = ""
    conditioning_failures: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.theta.shape[0] != self.n_iter - self.n_burn:
            raise ConfigError(
                f"trace holds {self.theta.shape[0]} states, expected n_iter - n_burn = {self.n_iter - self.n_burn}"
            )

    def __len__(self):
        return self.theta.shape[0]

    @property
    def p(self):
        return self.theta.shape[1]

    def to_csv(self, path):
        J, P = self.theta.shape
        header = ["iteration"] + [f"theta_{i + 1}" for i in range(P)] + [f"z_{i + 1}" for i in range(P)]
        columns = [np.arange(self.n_burn + 1, self.n_iter + 1)] + list(self.theta.T) + list(self.z.T)
        columns.append(self.sigma2)
        header.append("sigma2")
        if self.v_s.ndim == 2:
            header += [f"v_s_{i + 1}" for i in range(P)]
            columns += list(self.v_s.T)
        else:
            header.append("v_s")
            columns.append(self.v_s)
        header.append("p0")
        columns.append(self.p0)
        write_rows(path, header, columns)

    def manifest(self):
        return {
            "chain_id": self.chain_id,
            "seed": self.seed,
            "sampler": self.sampler,
            "n_iter": self.n_iter,
            "n_burn": self.n_burn,
            "stored": len(self),
            "conditioning_failures": self.conditioning_failures,
        }


class _TraceRecorder:
    def __init__(self, n_iter, n_burn, p, per_weight_vs=False):
        if n_iter <= n_burn:
            raise ConfigError(f"n_iter ({n_iter}) must exceed n_burn ({n_burn})")
        if n_burn < 0:
            raise ConfigError("n_burn must be non-negative")
        j = n_iter - n_burn
        self.n_iter, self.n_burn = n_iter, n_burn
        self.theta = np.zeros((j, p))
        self.z = np.zeros((j, p), dtype=np.int8)
        self.sigma2 = np.zeros(j)
        self.v_s = np.zeros((j, p)) if per_weight_vs else np.zeros(j)
        self.p0 = np.zeros(j)

    def record(self, it, state):
        k = it - self.n_burn
        if k < 0:
            return
        self.theta[k] = state.theta
        self.z[k] = state.z
        self.sigma2[k] = state.sigma2
        self.v_s[k] = state.v_s
        self.p0[k] = state.p0

    def finish(self, **kw):
        return ChainTrace(
            theta=self.theta, z=self.z, sigma2=self.sigma2, v_s=self.v_s, p0=self.p0,
            n_iter=self.n_iter, n_burn=self.n_burn, **kw,
        )
