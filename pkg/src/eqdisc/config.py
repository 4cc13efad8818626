"""Declarative run configuration with JSON round-trip.

Every field has a default so a minimal config names only the mode and the
system; unknown keys are rejected to catch typos early.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from . import css, dss
from .dictionary import BasisConfig
from .errors import ConfigError
from .sampling import SAMPLERS
from .simulate import SYSTEMS, ExcitationSpec, SystemSpec

MODES = ("simulate", "discover", "benchmark")


def _from_dict(cls, d, what):
    if d is None:
        return cls()
    if isinstance(d, cls):
        return d
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {what} fields: {sorted(unknown)}; allowed: {sorted(names)}")
    return cls(**d)


@dataclass(frozen=True)
class ChainConfig:
    n_chains: int = 4
    n_iter: int = 5000
    n_burn: int = 1000
    workers: int | None = None

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigError("n_chains must be at least 1")
        if not 0 <= self.n_burn < self.n_iter:
            raise ConfigError(f"need 0 <= n_burn < n_iter, got n_burn={self.n_burn}, n_iter={self.n_iter}")


@dataclass(frozen=True)
class PriorConfig:
    p0_init: float = 0.1
    vs_init: float = 10.0
    a_p: float = 0.1
    b_p: float = 1.0
    a_v: float = 0.5
    b_v: float = 0.5
    a_sigma: float = 1e-4
    b_sigma: float = 1e-4
    v0: float | None = None
    v1_ratio: float = 100.0
    basad_scale_convention: bool = False

    def __post_init__(self):
        if not 0 <= self.p0_init <= 1:
            raise ConfigError(f"p0_init must lie in [0, 1], got {self.p0_init}")
        # validates the shared hyperparameters
        self.for_sampler("css")

    def for_sampler(self, sampler):
        shared = dict(a_p=self.a_p, b_p=self.b_p, a_v=self.a_v, b_v=self.b_v,
                      a_sigma=self.a_sigma, b_sigma=self.b_sigma)
        if sampler == "css":
            return css.CssPriorConfig(v0=self.v0, v1_ratio=self.v1_ratio, vs_init=self.vs_init,
                                      basad_scale_convention=self.basad_scale_convention, **shared)
        if sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {sampler!r}; choose one of {', '.join(SAMPLERS)}")
        return dss.DssPriorConfig(slab=dss.GPRIOR if sampler == "dss_g" else dss.INDEPENDENT, **shared)


@dataclass(frozen=True)
class SimulationConfig:
    n_samples: int = 4000
    fs: float = 1000.0
    noise_fraction: float = 0.05
    x0: tuple = (0.0, 0.0)
    discard: int = 0
    passband_hz: tuple = (0.0, 100.0)
    excitation_std: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "passband_hz", tuple(float(v) for v in self.passband_hz))
        if self.n_samples < 2:
            raise ConfigError("n_samples must be at least 2")
        if not self.noise_fraction >= 0:
            raise ConfigError("noise_fraction must be non-negative")
        if self.discard < 0:
            raise ConfigError("discard must be non-negative")
        self.excitation(0).validate(self.fs)

    def excitation(self, seed):
        return ExcitationSpec(passband_hz=self.passband_hz, std=self.excitation_std, seed=int(seed))


def resolve_system(system):
    if isinstance(system, SystemSpec):
        return system
    if isinstance(system, str):
        if system not in SYSTEMS:
            raise ConfigError(f"unknown system {system!r}; legal values: {', '.join(SYSTEMS)}")
        return SYSTEMS[system]
    if isinstance(system, dict):
        return SystemSpec.from_dict(system)
    raise ConfigError("system must be a preset name or an object of SystemSpec fields")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "discover"
    system: object = "linear"
    dataset: str | None = None
    test_dataset: str | None = None
    n_train: int | None = 2000
    n_test: int | None = 2000
    reconstruct: bool = False
    sampler: str = "dss_g"
    seed: int = 0
    out: str = "out"
    threshold: float = 0.5
    rhat_threshold: float = 1.1
    chains: ChainConfig = field(default_factory=ChainConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    benchmark: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose one of {', '.join(MODES)}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"unknown sampler {self.sampler!r}; choose one of {', '.join(SAMPLERS)}")
        if isinstance(self.system, SystemSpec):
            object.__setattr__(self, "system", self.system.to_dict())
        resolve_system(self.system)
        if not 0 <= self.threshold < 1:
            raise ConfigError("threshold must lie in [0, 1)")

    @property
    def system_spec(self):
        return resolve_system(self.system)

    def to_dict(self):
        d = asdict(self)
        d["basis"] = self.basis.to_dict()
        d["simulation"]["x0"] = list(self.simulation.x0)
        d["simulation"]["passband_hz"] = list(self.simulation.passband_hz)
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}; allowed: {sorted(names)}")
        d["chains"] = _from_dict(ChainConfig, d.get("chains"), "chains")
        d["priors"] = _from_dict(PriorConfig, d.get("priors"), "priors")
        d["simulation"] = _from_dict(SimulationConfig, d.get("simulation"), "simulation")
        basis = d.get("basis")
        d["basis"] = basis if isinstance(basis, BasisConfig) else BasisConfig.from_dict(basis or {})
        if d.get("benchmark") is None:
            d["benchmark"] = {}
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return RunConfig.from_dict(d)
