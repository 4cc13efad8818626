"""End-to-end helpers shared by the CLI and the benchmark harness."""

from __future__ import annotations

from dataclasses import dataclass

from . import dictionary as dic
from .config import ChainConfig, PriorConfig, SimulationConfig
from .diagnostics import multivariate_psrf
from .posterior import summarize
from .sampling import run_chains
from .simulate import add_noise, generate_excitation, simulate


def simulate_record(system, sim=SimulationConfig(), excitation_seed=0, noise_seed=1):
    """Clean and noisy datasets of ``sim.n_samples`` samples for one system."""
    u = generate_excitation(sim.excitation(excitation_seed), sim.n_samples + sim.discard, sim.fs)
    clean = simulate(system, u, sim.fs, x0=sim.x0, discard=sim.discard)
    return clean, add_noise(clean, sim.noise_fraction, noise_seed)


@dataclass
class FitResult:
    dictionary: dic.Dictionary
    design: dic.ScaledDesign
    traces: list
    summary: object
    convergence: object


def fit(train, sampler="dss_g", priors=PriorConfig(), chains=ChainConfig(), seed=0,
        basis=dic.BasisConfig(), threshold=0.5, rhat_threshold=1.1, workers=None):
    """Build and standardise the dictionary, run the chains, summarise."""
    d = dic.build(train, basis)
    design = dic.normalize(d)
    traces = run_chains(
        design, sampler, priors.for_sampler(sampler),
        n_chains=chains.n_chains, n_iter=chains.n_iter, n_burn=chains.n_burn, seed=seed,
        p0_init=priors.p0_init, vs_init=priors.vs_init,
        workers=chains.workers if workers is None else workers,
    )
    summary = summarize(traces, design, threshold=threshold, basis_config=basis)
    convergence = multivariate_psrf(traces, threshold=rhat_threshold) if len(traces) >= 2 else None
    return FitResult(d, design, traces, summary, convergence)
