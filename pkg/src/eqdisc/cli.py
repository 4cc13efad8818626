"""Command-line entry point: ``eqdisc simulate | discover | benchmark``.

Exit codes: 0 success, 2 configuration or data error, 3 convergence gate
failed, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, run_benchmark
from .config import RunConfig
from .errors import ConfigError, ConvergenceError, NumericalError
from .io import load_dataset, save_dataset, write_rows
from .pipeline import fit, simulate_record
from .posterior import predict
from .sampling import SAMPLERS, chain_seeds

log = logging.getLogger("eqdisc")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_NUMERICAL = 0, 2, 3, 4


def data_seeds(seed):
    """Excitation and noise seeds for a simulated record."""
    exc, noise = np.random.SeedSequence([seed, 999]).generate_state(2, dtype=np.uint32)
    return int(exc), int(noise)


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _manifest(config, **extra):
    return {"version": __version__, "config": config.to_dict(), **extra}


def cmd_simulate(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    system = config.system_spec
    exc_seed, noise_seed = data_seeds(config.seed)
    clean, noisy = simulate_record(system, config.simulation, exc_seed, noise_seed)
    save_dataset(clean, out / "clean.csv")
    save_dataset(noisy, out / "noisy.csv")
    _write_json(out / "manifest.json", _manifest(config, system=system.to_dict(),
                                                 seeds={"excitation": exc_seed, "noise": noise_seed},
                                                 rows=len(clean)))
    print(f"wrote {len(clean)} samples to {out / 'clean.csv'} and {out / 'noisy.csv'}")
    return EXIT_OK


def _discover_data(config):
    if config.dataset:
        data = load_dataset(config.dataset, reconstruct=config.reconstruct)
        source = {"dataset": str(config.dataset), "reconstructed": list(data.reconstructed)}
    else:
        exc_seed, noise_seed = data_seeds(config.seed)
        _, data = simulate_record(config.system_spec, config.simulation, exc_seed, noise_seed)
        source = {"simulated": config.system_spec.to_dict(), "seeds": {"excitation": exc_seed, "noise": noise_seed}}
    test = None
    if config.test_dataset:
        test = load_dataset(config.test_dataset, reconstruct=config.reconstruct)
        train = data if config.n_train is None else data.slice(0, config.n_train)
    elif config.n_train is not None and len(data) >= config.n_train + (config.n_test or 0) and config.n_test:
        train = data.slice(0, config.n_train)
        test = data.slice(config.n_train, config.n_train + config.n_test)
    elif config.n_train is not None and len(data) > config.n_train:
        train = data.slice(0, config.n_train)
    else:
        train = data
    return train, test, source


def cmd_discover(config, allow_unconverged=False):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test, source = _discover_data(config)
    res = fit(train, config.sampler, config.priors, config.chains, seed=config.seed, basis=config.basis,
              threshold=config.threshold, rhat_threshold=config.rhat_threshold)
    for tr in res.traces:
        tr.to_csv(out / "traces" / f"chain_{tr.chain_id}.csv")
    summary = res.summary
    summary.to_json(out / "summary.json")
    write_rows(out / "pip.csv", ["index", "pip"], [np.arange(1, summary.pip.size + 1), summary.pip])
    conv = res.convergence.to_dict() if res.convergence is not None else None
    extra = {}
    if test is not None:
        pred = predict(summary, test, diagonal=True)
        write_rows(out / "predictions.csv", ["t", "y", "mean", "sd"],
                   [test.t, test.x2dot, pred.mean, np.sqrt(pred.variance)])
        extra["test_rmse"] = float(np.sqrt(np.mean((test.x2dot - pred.mean) ** 2)))
    seeds = [{"init": s.entropy, "init_key": list(s.spawn_key), "run_key": list(r.spawn_key)}
             for s, r in chain_seeds(config.seed, config.chains.n_chains)]
    _write_json(out / "manifest.json", _manifest(
        config, source=source, n_train=len(train), n_test=0 if test is None else len(test),
        chains=[tr.manifest() for tr in res.traces], chain_seed_keys=seeds, convergence=conv, **extra))
    print(summary.equation())
    for name, pip, mu, sd in zip(summary.names, summary.pip, summary.mu_theta, summary.sd_theta):
        if pip > config.threshold:
            print(f"  {name:>10s}  PIP {pip:.3f}  mean {mu:.6g}  sd {sd:.3g}")
    if res.convergence is None:
        print("R-hat: not computed (single chain)")
        return EXIT_OK
    rc = res.convergence
    verdict = "converged" if rc.converged else "NOT converged"
    r_txt = f"{rc.r_hat_multivariate:.4f}" if rc.computable else "not computable"
    print(f"R-hat (multivariate): {r_txt} -> {verdict} (threshold {rc.threshold})")
    if not rc.converged and not allow_unconverged:
        raise ConvergenceError(f"multivariate R-hat {r_txt} is not below {rc.threshold}; "
                               "use --allow-unconverged to accept")
    return EXIT_OK


def bench_config_from(config):
    d = {"seed": config.seed, "samplers": [config.sampler], "chains": config.chains,
         "priors": config.priors, "basis": config.basis}
    d.update(config.benchmark)
    return BenchConfig.from_dict(d)


def cmd_benchmark(config):
    bcfg = bench_config_from(config)
    out = Path(config.out)
    try:
        report = run_benchmark(bcfg, out_dir=out)
    except KeyboardInterrupt:
        print(f"interrupted; partial records kept in {out / 'records.jsonl'}", file=sys.stderr)
        raise
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="eqdisc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "discover", "benchmark"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run config; unspecified fields take the defaults")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--out", help="output directory (created if missing)")
        s.add_argument("--sampler", choices=SAMPLERS)
        s.add_argument("--system", help="reference system name (linear, duffing, quadratic_damping, coulomb)")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "discover":
            s.add_argument("--dataset", help="CSV with columns t,x1,x2,x2dot,u (x2/x2dot optional with --reconstruct)")
            s.add_argument("--allow-unconverged", action="store_true", help="do not fail when R-hat >= threshold")
            s.add_argument("--reconstruct", action="store_true", help="differentiate x1 for missing x2/x2dot")
        if name == "benchmark":
            s.add_argument("--replications", type=int)
    return p


def load_config(args):
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {"mode": args.command}
    for key in ("seed", "out", "sampler", "system"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "dataset", None):
        overrides["dataset"] = args.dataset
    if getattr(args, "reconstruct", False):
        overrides["reconstruct"] = True
    if getattr(args, "replications", None) is not None:
        overrides["benchmark"] = dict(config.benchmark, replications=args.replications)
    return config.replace(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "discover":
            return cmd_discover(config, allow_unconverged=args.allow_unconverged)
        return cmd_benchmark(config)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
