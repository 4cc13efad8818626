"""Monte Carlo benchmark over perturbed reference oscillators.

Each replication draws one perturbation factor, simulates a fresh record
(train followed by test), and runs every configured sampler on the same
noisy training data.  The seed schedule is a pure function of
``(seed, system index, replication)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import dictionary as dic
from .config import ChainConfig, PriorConfig, SimulationConfig, resolve_system
from .errors import ConfigError, EqDiscError
from .pipeline import fit, simulate_record
from .sampling import SAMPLERS
from .simulate import SYSTEMS, Nonlinearity

log = logging.getLogger(__name__)

NONLINEAR_TERM = {
    Nonlinearity.CUBIC_STIFFNESS: "x1^3",
    Nonlinearity.QUADRATIC_DAMPING: "x2*|x2|",
    Nonlinearity.COULOMB_FRICTION: "sgn(x2)",
}
MAX_RESAMPLES = 100
TABLE_COLUMNS = (
    "system", "sampler", "e_theta_s", "e_theta", "e_p", "fdr", "exact", "superset", "n_ok", "n_failed",
)


class PerturbationError(ConfigError):
    pass


def perturb_system(nominal, kappa, scale=0.1):
    """Scale damping, stiffness and the nonlinear coefficient by ``1 + scale*kappa``.

    The mass is left alone.  Raises :class:`PerturbationError` when the
    factor would make a positive parameter non-positive.
    """
    factor = 1.0 + scale * float(kappa)
    params = {"damping_c": nominal.damping_c, "stiffness_k": nominal.stiffness_k, "coefficient": nominal.coefficient}
    for name, value in params.items():
        if value > 0 and not value * factor > 0:
            raise PerturbationError(f"perturbation factor {factor} makes {name} non-positive")
    return replace(nominal, **{k: v * factor for k, v in params.items()})


def true_weights(system, names):
    """Regression weights of ``system`` for the dictionary columns ``names``.

    The target is acceleration, so state terms enter as ``-param/m`` and the
    input as ``1/m``.
    """
    names = tuple(names)
    w = np.zeros(len(names))
    m = system.mass
    terms = {"x1": -system.stiffness_k / m, "x2": -system.damping_c / m, "u": 1.0 / m}
    if system.nonlinearity is not Nonlinearity.NONE:
        terms[NONLINEAR_TERM[system.nonlinearity]] = -system.coefficient / m
    for name, value in terms.items():
        if name not in names:
            raise ConfigError(f"true term {name!r} is missing from the dictionary")
        w[names.index(name)] = value
    return w


def true_mask(system, names):
    return true_weights(system, names) != 0


def weight_error(theta_hat, theta_true, scaling=None, scaled=False):
    """Relative 2-norm weight error; ``scaled`` multiplies both vectors by S_D."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_true = np.asarray(theta_true, dtype=float)
    if scaled:
        if scaling is None:
            raise ConfigError("scaled weight error needs the column scaling")
        S = scaling.S_D if isinstance(scaling, dic.Scaling) else np.asarray(scaling, dtype=float)
        theta_hat, theta_true = theta_hat * S, theta_true * S
    denom = np.linalg.norm(theta_true)
    if not denom > 0:
        raise ConfigError("true weight vector is zero")
    return float(np.linalg.norm(theta_hat - theta_true) / denom)


def prediction_error(y_star, D_star, theta_hat):
    """``100 * ||y* - D* theta|| / ||y*||`` on the unscaled test dictionary."""
    y_star = np.asarray(y_star, dtype=float)
    denom = np.linalg.norm(y_star)
    if not denom > 0:
        raise ConfigError("test target is zero")
    return float(100.0 * np.linalg.norm(y_star - np.asarray(D_star) @ theta_hat) / denom)


def model_metrics(selected_mask, true_mask):
    sel = np.asarray(selected_mask, dtype=bool)
    tru = np.asarray(true_mask, dtype=bool)
    if sel.shape != tru.shape:
        raise ConfigError(f"mask shapes differ: {sel.shape} vs {tru.shape}")
    n_sel = int(sel.sum())
    false_pos = int(np.sum(sel & ~tru))
    return {
        "fdr": false_pos / n_sel if n_sel else 0.0,
        "exact": bool(np.array_equal(sel, tru)),
        "superset": bool(np.all(sel[tru])),
    }


@dataclass(frozen=True)
class BenchConfig:
    systems: tuple = tuple(SYSTEMS)
    replications: int = 20
    perturbation_scale: float = 0.1
    n_train: int = 2000
    n_test: int = 2000
    noise_fraction: float = 0.05
    samplers: tuple = ("dss_g",)
    seed: int = 0
    chains: ChainConfig = field(default_factory=ChainConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    basis: dic.BasisConfig = field(default_factory=dic.BasisConfig)
    fs: float = 1000.0
    workers: int = 1
    force_kappa: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        object.__setattr__(self, "samplers", tuple(self.samplers))
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        p = len(dic.basis_descriptors(self.basis))
        if self.n_train < p or self.n_test < p:
            raise ConfigError(f"n_train and n_test must be at least the dictionary size {p}")
        for s in self.samplers:
            if s not in SAMPLERS:
                raise ConfigError(f"unknown sampler {s!r}; choose one of {', '.join(SAMPLERS)}")
        for s in self.systems:
            resolve_system(s)
        if not self.noise_fraction >= 0:
            raise ConfigError("noise_fraction must be non-negative")

    @property
    def simulation(self):
        return SimulationConfig(n_samples=self.n_train + self.n_test, fs=self.fs, noise_fraction=self.noise_fraction)

    def to_dict(self):
        d = asdict(self)
        d["systems"] = list(self.systems)
        d["samplers"] = list(self.samplers)
        d["basis"] = self.basis.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown benchmark fields: {sorted(unknown)}; allowed: {sorted(names)}")
        if isinstance(d.get("chains"), dict):
            d["chains"] = ChainConfig(**d["chains"])
        if isinstance(d.get("priors"), dict):
            d["priors"] = PriorConfig(**d["priors"])
        if isinstance(d.get("basis"), dict):
            d["basis"] = dic.BasisConfig.from_dict(d["basis"])
        return cls(**d)


def _system_name(system):
    return system if isinstance(system, str) else resolve_system(system).name


def _replication_seeds(seed, sys_index, rep):
    """Integer seeds for kappa, excitation, noise and the samplers."""
    state = np.random.SeedSequence([seed, sys_index, rep]).generate_state(4, dtype=np.uint32)
    return [int(s) for s in state]


def run_replication(config, sys_index, rep):
    """All sampler records for one (system, replication) work item."""
    nominal = resolve_system(config.systems[sys_index])
    name = _system_name(config.systems[sys_index])
    s_kappa, s_exc, s_noise, s_chain = _replication_seeds(config.seed, sys_index, rep)
    rng = np.random.default_rng(s_kappa)
    resamples = 0
    while True:
        kappa = float(config.force_kappa) if config.force_kappa is not None else float(rng.standard_normal())
        try:
            system = perturb_system(nominal, kappa, config.perturbation_scale)
            break
        except PerturbationError:
            resamples += 1
            if config.force_kappa is not None or resamples > MAX_RESAMPLES:
                raise
    base = {"system": name, "replication": rep, "kappa": kappa, "kappa_resamples": resamples,
            "seeds": {"kappa": s_kappa, "excitation": s_exc, "noise": s_noise, "chains": s_chain}}
    records = []
    try:
        _, noisy = simulate_record(system, config.simulation, s_exc, s_noise)
    except EqDiscError as exc:
        return [dict(base, sampler=s, status="failed", error=f"{type(exc).__name__}: {exc}") for s in config.samplers]
    train = noisy.slice(0, config.n_train)
    test = noisy.slice(config.n_train, config.n_train + config.n_test)
    for sampler in config.samplers:
        rec = dict(base, sampler=sampler)
        try:
            res = fit(train, sampler, config.priors, config.chains, seed=s_chain, basis=config.basis, workers=1)
            names = res.design.names
            theta_true = true_weights(system, names)
            summ = res.summary
            D_test = dic.build(test, config.basis, check_constant=False).D
            rec.update(
                status="ok",
                e_theta_s=weight_error(summ.mu_theta, theta_true, res.design.scaling, scaled=True),
                e_theta=weight_error(summ.mu_theta, theta_true),
                e_p=prediction_error(test.x2dot, D_test, summ.mu_theta),
                r_hat=res.convergence.r_hat_multivariate if res.convergence else None,
                selected=[n for n, s in zip(names, summ.selected) if s],
                **model_metrics(summ.selected, theta_true != 0),
            )
        except EqDiscError as exc:
            rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
    return records


@dataclass
class MetricsReport:
    rows: list
    records: list
    complete: bool = True

    def row(self, system, sampler):
        for r in self.rows:
            if r["system"] == system and r["sampler"] == sampler:
                return r
        raise KeyError((system, sampler))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in TABLE_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "nan" if not np.isfinite(v) else repr(v)
    return str(v)


def aggregate(records, config):
    rows = []
    for sys_entry in config.systems:
        name = _system_name(sys_entry)
        for sampler in config.samplers:
            recs = [r for r in records if r["system"] == name and r["sampler"] == sampler]
            ok = [r for r in recs if r["status"] == "ok"]
            row = {"system": name, "sampler": sampler, "n_ok": len(ok), "n_failed": len(recs) - len(ok)}
            for key in ("e_theta_s", "e_theta", "e_p", "fdr", "exact", "superset"):
                row[key] = float(np.mean([float(r[key]) for r in ok])) if ok else float("nan")
            rows.append(row)
    return rows


def run_benchmark(config, out_dir=None):
    """Run every (system, replication) item and aggregate per (system, sampler).

    With ``out_dir`` the raw records are appended to ``records.jsonl`` as
    they complete, and ``table.csv`` plus ``summary.json`` are written at
    the end.  An interrupted run leaves the partial records and a summary
    flagged ``"complete": false``.
    """
    items = [(i, r) for i in range(len(config.systems)) for r in range(config.replications)]
    records = []
    sink = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        sink = open(os.path.join(out_dir, "records.jsonl"), "w")
    complete = False
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                batches = pool.map(run_replication, [config] * len(items), *zip(*items))
                for batch in batches:
                    _emit(batch, records, sink)
        else:
            for i, r in items:
                _emit(run_replication(config, i, r), records, sink)
        complete = True
    finally:
        report = MetricsReport(rows=aggregate(records, config), records=records, complete=complete)
        if sink is not None:
            sink.close()
            with open(os.path.join(out_dir, "table.csv"), "w") as fh:
                fh.write(report.to_csv())
            with open(os.path.join(out_dir, "summary.json"), "w") as fh:
                json.dump({"complete": complete, "n_records": len(records), "config": config.to_dict(),
                           "rows": report.rows}, fh, indent=2)
                fh.write("\n")
    return report


def _emit(batch, records, sink):
    for rec in batch:
        records.append(rec)
        if rec["status"] != "ok":
            log.warning("replication %s/%s/%s failed: %s", rec["system"], rec["sampler"], rec["replication"], rec["error"])
        if sink is not None:
            sink.write(json.dumps(rec) + "\n")
            sink.flush()
