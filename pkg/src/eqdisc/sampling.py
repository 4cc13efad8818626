"""Multi-chain orchestration shared by the three samplers."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import css, dss
from .errors import ConfigError

SAMPLERS = ("dss_i", "dss_g", "css")


def priors_for(sampler, **hyper):
    """Prior config for a sampler name; unknown hyperparameters are rejected."""
    if sampler not in SAMPLERS:
        raise ConfigError(f"unknown sampler {sampler!r}; choose one of {', '.join(SAMPLERS)}")
    if sampler == "css":
        return css.CssPriorConfig(**hyper)
    hyper = {k: v for k, v in hyper.items() if k != "vs_init"}
    return dss.DssPriorConfig(slab=dss.GPRIOR if sampler == "dss_g" else dss.INDEPENDENT, **hyper)


def chain_seeds(seed, n_chains):
    """Per-chain (init, run) seed sequences derived from the master seed."""
    return [
        (np.random.SeedSequence([seed, c, 0]), np.random.SeedSequence([seed, c, 1]))
        for c in range(n_chains)
    ]


def _run_one(args):
    sampler, design, priors, p0_init, vs_init, n_iter, n_burn, init_seed, run_seed, chain_id = args
    jitter = chain_id > 0
    if sampler == "css":
        init = css.init_state_css(design, priors, p0_init=p0_init, seed=init_seed, jitter=jitter)
        return css.run_chain_css(design, priors, init, n_iter, n_burn, seed=run_seed, chain_id=chain_id)
    init = dss.init_state(design, priors, p0_init=p0_init, vs_init=vs_init, seed=init_seed, jitter=jitter)
    return dss.run_chain(design, priors, init, n_iter, n_burn, seed=run_seed, chain_id=chain_id)


def default_workers(n_chains):
    return max(1, min(n_chains, os.cpu_count() or 1))


def run_chains(design, sampler, priors, n_chains=4, n_iter=5000, n_burn=1000, seed=0,
               p0_init=0.1, vs_init=10.0, workers=None):
    """Run independent chains and return their traces ordered by chain id.

    Chain 0 starts from the nominal hyperparameters; later chains start from
    multiplicatively jittered values.  Results do not depend on ``workers``.
    """
    if n_chains < 1:
        raise ConfigError("n_chains must be at least 1")
    if sampler == "css":
        vs_init = priors.vs_init
    jobs = [
        (sampler, design, priors, p0_init, vs_init, n_iter, n_burn, s_init, s_run, c)
        for c, (s_init, s_run) in enumerate(chain_seeds(seed, n_chains))
    ]
    workers = default_workers(n_chains) if workers is None else workers
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
