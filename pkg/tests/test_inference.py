import numpy as np
import pytest

from pennmm.inference import meat_centered, meat_shifted, penalty_weights, sandwich_cov
from pennmm.likelihood import Dataset, make_model
from pennmm.penalty import lasso, scad
from pennmm.solver import fit, fit_lqa, fit_mle


def test_linear_unpenalized_matches_hand_rolled_robust_sandwich(rng):
    n, d = 60, 3
    X = rng.standard_normal((n, d))
    y = X @ np.array([1.0, -0.5, 0.0]) + rng.standard_normal(n) * (1 + np.abs(X[:, 0]))
    m = make_model("linear", Dataset(X, y))
    res = fit(m, scad(0.0))
    rep = sandwich_cov(m, res.spec, res)

    b = np.linalg.solve(X.T @ X, X.T @ y)
    r = y - X @ b
    G = X * r[:, None]
    meat = G.T @ G - n * np.outer(G.mean(0), G.mean(0))
    meat *= n / (n - d)
    inv = np.linalg.inv(X.T @ X)
    expected = inv @ meat @ inv
    assert np.allclose(rep.cov, expected, rtol=1e-10, atol=1e-14)
    assert rep.available.all()
    assert rep.dispersion == pytest.approx(r @ r / (n - d))


def test_two_point_toy_by_hand():
    # d = 1, n = 2: x = (1, 2), y = (1, 3); OLS b = 7/5, residuals (-2/5, 1/5)
    m = make_model("linear", Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 3.0])))
    res = fit(m, scad(0.0))
    assert res.beta_hat[0] == pytest.approx(1.4, abs=1e-12)
    g = np.array([1 * -0.4, 2 * 0.2])  # both -0.4 and 0.4
    meat = g @ g - 2 * g.mean() ** 2  # 0.32
    meat *= 2 / (2 - 1)
    expected = meat / 25.0  # bread X'X = 5
    rep = sandwich_cov(m, res.spec, res)
    assert rep.cov[0, 0] == pytest.approx(expected, abs=1e-12)
    assert rep.se[0] == pytest.approx(np.sqrt(expected), abs=1e-12)


def test_meat_forms_agree(rng):
    m = make_model("logistic", Dataset(rng.standard_normal((80, 4)), rng.integers(0, 2, 80).astype(float)))
    spec = scad(0.1, epsilon=1e-4)
    beta = rng.normal(0, 0.5, 4)
    scores = m.per_observation_scores(beta)
    shift = penalty_weights(spec, beta) * beta  # per-observation share of n E beta
    a = meat_centered(scores)
    b = meat_shifted(scores, shift)
    assert np.allclose(a, b, atol=1e-10 * max(1.0, np.abs(a).max()))


@pytest.mark.parametrize("family", ["logistic", "cox", "poisson"])
def test_penalized_report_is_symmetric_psd(family, rng):
    n = 120
    X = rng.standard_normal((n, 5))
    eta = X @ np.array([1.0, 0, -0.8, 0, 0])
    if family == "logistic":
        data = Dataset(X, (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(float))
    elif family == "poisson":
        data = Dataset(X * 0.5, rng.poisson(np.exp(eta * 0.5)).astype(float))
    else:
        t = rng.exponential(size=n) * np.exp(-eta)
        data = Dataset(X, t, np.ones(n))
    m = make_model(family, data)
    res = fit(m, scad(0.1))
    rep = sandwich_cov(m, res.spec, res)
    act = np.flatnonzero(res.active)
    block = rep.cov[np.ix_(act, act)]
    assert np.allclose(block, block.T)
    assert np.linalg.eigvalsh(block).min() >= -1e-10 * max(1.0, np.abs(block).max())
    assert np.allclose(rep.se, np.sqrt(np.diag(rep.cov)))
    assert np.isfinite(rep.bread_condition)


def test_lqa_deleted_coordinates_unavailable(rng):
    n = 100
    X = rng.standard_normal((n, 4))
    m = make_model("linear", Dataset(X, X @ np.array([2.0, 0, 0, 1.0]) + rng.standard_normal(n)))
    res = fit_lqa(m, scad(0.3))
    rep = sandwich_cov(m, res.spec, res)
    off = ~res.active
    assert off.any()
    assert not rep.available[off].any() and np.all(rep.se[off] == 0)
    assert rep.available[res.active].all()


def test_submodel_mle_restricted_to_support(rng):
    n = 50
    X = rng.standard_normal((n, 3))
    m = make_model("linear", Dataset(X, X[:, 0] + rng.standard_normal(n)))
    res = fit_mle(m, support=np.array([True, False, True]))
    rep = sandwich_cov(m, res.spec, res)
    assert list(rep.available) == [True, False, True]


def test_penalty_weights_infinite_at_unperturbed_zero():
    w = penalty_weights(lasso(0.5), np.array([0.0, 2.0]))
    assert np.isinf(w[0]) and w[1] == pytest.approx(0.25)
    assert penalty_weights(lasso(0.0), np.array([0.0]))[0] == 0.0
