import json

import numpy as np
import pytest

from eqdisc import dictionary as dic
from eqdisc import posterior as post
from eqdisc.errors import ConfigError, DataError
from eqdisc.simulate import SYSTEMS, ExcitationSpec, generate_excitation, simulate
from eqdisc.trace import ChainTrace


def _trace(theta, z, sigma2=None):
    theta = np.asarray(theta, float)
    j, p = theta.shape
    sigma2 = np.ones(j) if sigma2 is None else np.asarray(sigma2, float)
    return ChainTrace(theta=theta, z=np.asarray(z, np.int8), sigma2=sigma2, v_s=np.ones(j), p0=np.full(j, 0.1),
                      n_iter=j, n_burn=0)


def _design(p, S_D=None, mu_D=None, mu_y=0.0):
    n = 10
    S_D = np.ones(p) if S_D is None else np.asarray(S_D, float)
    mu_D = np.zeros(p) if mu_D is None else np.asarray(mu_D, float)
    return dic.ScaledDesign(D=np.zeros((n, p)), y=np.zeros(n), scaling=dic.Scaling(mu_D, S_D, mu_y),
                            names=tuple(f"c{j}" for j in range(p)))


# --- inclusion probabilities ------------------------------------------------

def test_pip_examples():
    z = np.array([[1, 0], [1, 1], [1, 0], [0, 0]])
    assert np.allclose(post.compute_pip(z), [0.75, 0.25])
    assert np.all(post.compute_pip(np.ones((7, 3), np.int8)) == 1.0)


def test_pip_pools_chains():
    a = _trace(np.zeros((2, 2)), [[1, 0], [1, 0]])
    b = _trace(np.zeros((2, 2)), [[0, 0], [0, 1]])
    assert np.allclose(post.compute_pip([a, b]), [0.5, 0.25])


def test_pip_requires_samples():
    with pytest.raises(DataError):
        post.compute_pip([])
    with pytest.raises(DataError):
        post.compute_pip(np.zeros((0, 3)))


def test_median_model_uses_strict_threshold():
    assert post.select_model([0.5, 0.51, 0.0, 1.0]).tolist() == [False, True, False, True]
    assert post.select_model([0.3], threshold=0.2).tolist() == [True]


# --- weight summaries -------------------------------------------------------

def test_unselected_weights_are_zero_and_selected_are_sample_moments():
    rng = np.random.default_rng(0)
    theta = rng.standard_normal((200, 3))
    z = np.ones((200, 3), np.int8)
    z[:, 1] = 0
    s = post.summarize([_trace(theta, z)], _design(3))
    assert s.selected.tolist() == [True, False, True]
    assert s.mu_theta[1] == 0.0 and np.all(s.Sigma_theta[1] == 0.0) and np.all(s.Sigma_theta[:, 1] == 0.0)
    assert s.mu_theta[0] == pytest.approx(theta[:, 0].mean())
    assert s.Sigma_theta[0, 2] == pytest.approx(np.cov(theta[:, 0], theta[:, 2])[0, 1])
    assert s.J == 200


def test_physical_weights_are_unscaled():
    theta = np.array([[2.0], [4.0]])
    s = post.summarize([_trace(theta, [[1], [1]])], _design(1, S_D=[2.0]))
    assert s.mu_theta_scaled[0] == 3.0
    assert s.mu_theta[0] == 1.5
    assert s.Sigma_theta[0, 0] == pytest.approx(np.var([2.0, 4.0], ddof=1) / 4)


def test_mask_length_checked():
    with pytest.raises(ConfigError):
        post.summarize_weights([_trace(np.zeros((3, 2)), np.zeros((3, 2)))], [True], _design(2).scaling)


# --- reporting --------------------------------------------------------------

def test_equation_rendering():
    eq = post.render_equation(("x1", "x2", "x1^3", "u"), [-996.4, -1.963, 0.0, 0.9974], [True, True, False, True])
    assert eq == "x2dot = -996.4*x1 - 1.963*x2 + 0.9974*u"
    assert post.render_equation(("x1",), [1.0], [False]) == "x2dot = 0"


def test_physical_sign_convention():
    assert post.physical_term("x1", -1000.0) == ("-x1", 1000.0)
    assert post.physical_term("u", 0.99) == ("u", 0.99)


def test_summary_json(tmp_path):
    theta = np.column_stack([np.full(4, -1000.0), np.full(4, 1.0)]) + np.arange(4)[:, None] * 1e-3
    s = post.summarize([_trace(theta, np.ones((4, 2)))], _design(2))
    s.to_json(tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["J"] == 4 and doc["cov_basis"] == "unscaled"
    assert doc["terms"][0]["physical_label"] == "-c0"
    assert doc["terms"][0]["physical_value"] == pytest.approx(1000.0, rel=1e-5)
    assert doc["equation"].startswith("x2dot = -1000*c0")
    assert dic.Scaling.from_dict(doc["scaling"]).S_D.tolist() == [1.0, 1.0]


# --- prediction -------------------------------------------------------------

@pytest.fixture(scope="module")
def linear_dictionary():
    u = generate_excitation(ExcitationSpec(seed=3), 300, 1000.0)
    return dic.build(simulate(SYSTEMS["linear"], u, 1000.0))


def _summary_for(d, theta, selected, sigma2=0.25, cov_scale=1e-4):
    des = dic.normalize(d)
    p = len(d.names)
    Sigma = np.zeros((p, p))
    idx = np.flatnonzero(selected)
    Sigma[np.ix_(idx, idx)] = cov_scale * (np.eye(idx.size) + 0.5)
    return post.PosteriorSummary(names=d.names, pip=selected.astype(float), selected=selected,
                                 mu_theta_scaled=np.zeros(p), Sigma_theta_scaled=np.zeros((p, p)),
                                 mu_theta=theta, Sigma_theta=Sigma, mu_sigma2=sigma2, J=100, scaling=des.scaling,
                                 basis_config=d.config)


def test_zero_weights_predict_training_mean(linear_dictionary):
    p = len(linear_dictionary.names)
    s = _summary_for(linear_dictionary, np.zeros(p), np.zeros(p, bool))
    pred = post.predict(s, linear_dictionary)
    assert np.allclose(pred.mean, s.scaling.mu_y)
    assert np.allclose(pred.covariance, 0.25 * np.eye(len(pred.mean)))


def test_predictive_covariance_is_psd_with_noise_floor(linear_dictionary):
    d = linear_dictionary
    p = len(d.names)
    sel = np.zeros(p, bool)
    sel[[d.index("x1"), d.index("x2"), d.index("u")]] = True
    theta = np.where(sel, 1.0, 0.0)
    s = _summary_for(d, theta, sel)
    full = post.predict(s, d)
    diag = post.predict(s, d, diagonal=True)
    assert full.covariance.shape == (300, 300)
    assert np.allclose(full.covariance, full.covariance.T)
    assert np.linalg.eigvalsh(full.covariance).min() >= 0.25 - 1e-9
    assert np.all(full.variance >= 0.25)
    assert np.allclose(diag.variance, full.variance)
    assert diag.covariance is None
    expected = s.scaling.mu_y + (d.D - s.scaling.mu_D) @ theta
    assert np.allclose(full.mean, expected)


def test_predict_rejects_mismatched_basis(linear_dictionary):
    p = len(linear_dictionary.names)
    s = _summary_for(linear_dictionary, np.zeros(p), np.zeros(p, bool))
    with pytest.raises(ConfigError):
        post.predict(s, linear_dictionary, basis_config=dic.BasisConfig(max_degree=3))
