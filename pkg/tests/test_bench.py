import json

import numpy as np
import pytest

from eqdisc import bench
from eqdisc import dictionary as dic
from eqdisc.config import ChainConfig, SimulationConfig
from eqdisc.errors import ConditioningError, ConfigError
from eqdisc.pipeline import simulate_record
from eqdisc.simulate import SYSTEMS


# --- perturbation -----------------------------------------------------------

def test_perturbation_scales_parameters_but_not_mass():
    s = bench.perturb_system(SYSTEMS["duffing"], 1.0)
    assert s.mass == 1.0
    assert s.damping_c == pytest.approx(2.2) and s.stiffness_k == pytest.approx(1100.0)
    assert s.coefficient == pytest.approx(1.1e5)
    assert bench.perturb_system(SYSTEMS["linear"], 0.0) == SYSTEMS["linear"]


def test_perturbation_rejects_nonpositive_factor():
    with pytest.raises(bench.PerturbationError):
        bench.perturb_system(SYSTEMS["linear"], -10.0)


def test_kappa_resampled_until_valid():
    cfg = bench.BenchConfig(systems=("linear",), replications=1, perturbation_scale=2.0, n_train=100, n_test=100,
                            chains=ChainConfig(n_chains=2, n_iter=30, n_burn=10))
    rng = np.random.default_rng(bench._replication_seeds(0, 0, 0)[0])
    draws = rng.standard_normal(200)
    first_valid = next(k for k in draws if 1 + 2.0 * k > 0)
    rec = bench.run_replication(cfg, 0, 0)[0]
    assert rec["kappa"] == first_valid
    assert rec["kappa_resamples"] == int(np.argmax(1 + 2.0 * draws > 0))


# --- ground truth -----------------------------------------------------------

NAMES = tuple(b.name for b in dic.basis_descriptors())


@pytest.mark.parametrize("name,term,count", [
    ("linear", None, 3), ("duffing", "x1^3", 4), ("quadratic_damping", "x2*|x2|", 4), ("coulomb", "sgn(x2)", 4),
])
def test_true_weights(name, term, count):
    s = SYSTEMS[name]
    w = bench.true_weights(s, NAMES)
    assert int(bench.true_mask(s, NAMES).sum()) == count
    assert w[NAMES.index("x1")] == -1000.0 and w[NAMES.index("x2")] == -2.0 and w[NAMES.index("u")] == 1.0
    if term:
        assert w[NAMES.index(term)] == -s.coefficient


def test_true_weights_reproduce_clean_acceleration():
    # the acceleration is algebraic in the states, so the true weights fit exactly
    for name in SYSTEMS:
        clean, _ = simulate_record(SYSTEMS[name], SimulationConfig(n_samples=500), 3, 4)
        d = dic.build(clean)
        w = bench.true_weights(SYSTEMS[name], d.names)
        assert bench.prediction_error(clean.x2dot, d.D, w) < 1e-9
        assert bench.weight_error(w, w) == 0.0


# --- metrics ----------------------------------------------------------------

def test_weight_error_examples():
    assert bench.weight_error([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert bench.weight_error([2.0, 0.0], [1.0, 0.0]) == 1.0
    assert bench.weight_error([0.0, 0.0], [3.0, 4.0]) == 1.0
    # scaling by S = (1, 10): truth (1, 0.1) -> (1, 1); estimate (1, 0) -> (1, 0)
    assert bench.weight_error([1.0, 0.0], [1.0, 0.1], np.array([1.0, 10.0]), scaled=True) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ConfigError):
        bench.weight_error([1.0], [0.0])
    with pytest.raises(ConfigError):
        bench.weight_error([1.0], [1.0], scaled=True)


def test_prediction_error_examples():
    D = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert bench.prediction_error([3.0, 4.0], D, np.array([3.0, 4.0])) == 0.0
    assert bench.prediction_error([3.0, 4.0], D, np.zeros(2)) == 100.0
    assert bench.prediction_error([3.0, 4.0], D, np.array([3.0, 0.0])) == pytest.approx(80.0)


def test_model_metrics_examples():
    tru = np.array([1, 1, 0, 0, 1], bool)
    assert bench.model_metrics(tru, tru) == {"fdr": 0.0, "exact": True, "superset": True}
    m = bench.model_metrics(np.array([1, 1, 1, 0, 1], bool), tru)
    assert m == {"fdr": 0.25, "exact": False, "superset": True}
    m = bench.model_metrics(np.array([1, 0, 0, 0, 0], bool), tru)
    assert m == {"fdr": 0.0, "exact": False, "superset": False}
    assert bench.model_metrics(np.zeros(5, bool), tru)["fdr"] == 0.0


# --- harness ----------------------------------------------------------------

def _small(**kw):
    base = dict(systems=("linear", "coulomb"), replications=2, n_train=200, n_test=200, samplers=("dss_g", "css"),
                chains=ChainConfig(n_chains=2, n_iter=200, n_burn=50), seed=3)
    base.update(kw)
    return bench.BenchConfig(**base)


def test_bench_config_validation_and_round_trip():
    cfg = _small()
    assert bench.BenchConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError):
        _small(samplers=("nuts",))
    with pytest.raises(ConfigError):
        _small(n_train=10)
    with pytest.raises(ConfigError):
        bench.BenchConfig.from_dict({"replicates": 3})


def test_benchmark_is_deterministic_and_paired(tmp_path):
    a = bench.run_benchmark(_small(), tmp_path / "a")
    b = bench.run_benchmark(_small(), tmp_path / "b")
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()
    assert a.to_csv().splitlines()[0] == ",".join(bench.TABLE_COLUMNS)
    assert len(a.rows) == 4 and len(a.records) == 8
    # every sampler sees the same perturbed system within a replication
    for sys_name in ("linear", "coulomb"):
        for rep in range(2):
            kappas = {r["kappa"] for r in a.records if r["system"] == sys_name and r["replication"] == rep}
            assert len(kappas) == 1
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["complete"] is True and summary["n_records"] == 8
    assert b.row("linear", "css")["n_ok"] + b.row("linear", "css")["n_failed"] == 2


def test_interrupted_benchmark_keeps_partial_records(tmp_path, monkeypatch):
    real = bench.run_replication
    calls = {"n": 0}

    def interrupting(config, i, r):
        calls["n"] += 1
        if calls["n"] == 2:
            raise KeyboardInterrupt
        return real(config, i, r)

    monkeypatch.setattr(bench, "run_replication", interrupting)
    with pytest.raises(KeyboardInterrupt):
        bench.run_benchmark(_small(systems=("linear",), samplers=("dss_g",)), tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["complete"] is False and summary["n_records"] == 1
    assert len((tmp_path / "records.jsonl").read_text().splitlines()) == 1
    assert (tmp_path / "table.csv").exists()


def test_failed_fit_is_recorded_not_raised(monkeypatch):
    def failing(*a, **k):
        raise ConditioningError("forced")

    monkeypatch.setattr(bench, "fit", failing)
    rep = bench.run_benchmark(_small(systems=("linear",), samplers=("dss_g",), replications=1))
    assert rep.records[0]["status"] == "failed" and "forced" in rep.records[0]["error"]
    assert rep.rows[0]["n_failed"] == 1 and np.isnan(rep.rows[0]["e_p"])
