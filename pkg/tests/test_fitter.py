import math

import numpy as np
import pytest

from jmppc.data import JointDataset
from jmppc.fitter import (DrawsError, McmcConfig, PosteriorDraws, difference_penalty, fit_joint_model,
                          load_posterior_draws, log_penalized_prior)
from jmppc.model import FunctionalForm, ModelSpec, TimeBasis
from jmppc.scenario import ScenarioConfig, generate_scenario_dataset, true_draw, true_spec


def test_first_difference_penalty():
    K = difference_penalty(3, 1)
    assert np.array_equal(K.Theta, [[-1, 1, 0], [0, -1, 1]])
    assert np.array_equal(K.K, K.Theta.T @ K.Theta)
    assert K.rank == 2 == np.linalg.matrix_rank(K.K)


def test_second_difference_penalty_null_space():
    K = difference_penalty(4, 2)
    assert K.rank == 2 == np.linalg.matrix_rank(K.K)
    assert np.allclose(K.K @ np.array([1.0, 2.0, 3.0, 4.0]), 0.0)
    with pytest.raises(ValueError):
        difference_penalty(3, 3)


def test_log_penalized_prior_values():
    K = difference_penalty(5, 2)
    assert log_penalized_prior(np.zeros(5), 2.0, K) == pytest.approx(1.5 * math.log(2.0))
    assert log_penalized_prior(np.full(5, 3.3), 2.0, K) == pytest.approx(1.5 * math.log(2.0))
    g = np.random.default_rng(0).normal(size=5)
    direct = 1.5 * math.log(2.0) - 0.5 * 2.0 * sum((g[i] - 2 * g[i + 1] + g[i + 2]) ** 2 for i in range(3))
    assert log_penalized_prior(g, 2.0, K) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        log_penalized_prior(g, 0.0, K)


def test_burn_in_validation():
    with pytest.raises(ValueError, match="burn-in exceeds iterations"):
        McmcConfig(n_iter=2, burn_in=5)


def test_negative_eigenvalue_names_draw():
    spec, draw = true_spec(), true_draw()
    D = np.stack([draw.D, draw.D])
    w, v = np.linalg.eigh(draw.D)
    w[0] = -1e-3
    D[1] = v @ np.diag(w) @ v.T
    with pytest.raises(DrawsError, match="draw 1"):
        PosteriorDraws(spec, np.stack([draw.beta] * 2), [0.1, 0.1], np.stack([draw.gamma] * 2), [0.1, 0.1],
                       np.stack([draw.gamma_h0] * 2), D)


def test_single_true_draw_file_round_trip(tmp_path):
    pd = PosteriorDraws.from_draw(true_spec(), true_draw())
    pd.save(tmp_path)
    back = load_posterior_draws(tmp_path)
    assert back.n_draws == 1
    assert np.array_equal(back.beta, pd.beta) and np.array_equal(back.D, pd.D)
    assert back.alpha[0] == 0.145


def em_mixed_model(data: JointDataset, spec: ModelSpec, n_iter=500):
    """Maximum likelihood for the linear mixed model by EM (an independent oracle)."""
    X_i = [spec.time_basis.evaluate(s.times) for s in data.subjects]
    Z_i = [x[:, :spec.n_random] for x in X_i]
    y_i = [s.values for s in data.subjects]
    X = np.vstack(X_i)
    y = np.concatenate(y_i)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    q = spec.n_random
    D, s2 = np.eye(q), 1.0
    N = y.size
    for _ in range(n_iter):
        bs, Cs = [], []
        for Xi, Zi, yi in zip(X_i, Z_i, y_i):
            V = Zi @ D @ Zi.T + s2 * np.eye(len(yi))
            G = D @ Zi.T @ np.linalg.inv(V)
            bs.append(G @ (yi - Xi @ beta))
            Cs.append(D - G @ Zi @ D)
        beta = np.linalg.solve(X.T @ X, X.T @ (y - np.concatenate([Zi @ b for Zi, b in zip(Z_i, bs)])))
        D = sum(np.outer(b, b) + C for b, C in zip(bs, Cs)) / len(bs)
        rss = sum(np.sum((yi - Xi @ beta - Zi @ b) ** 2) + np.trace(Zi @ C @ Zi.T)
                  for Xi, Zi, yi, b, C in zip(X_i, Z_i, y_i, bs, Cs))
        s2 = rss / N
    return beta, D, math.sqrt(s2)


@pytest.fixture(scope="module")
def small_data():
    cfg = ScenarioConfig(n_subjects=60)
    return generate_scenario_dataset(cfg, seed=21)


def test_longitudinal_only_fit_matches_mixed_model(small_data):
    spec = ModelSpec(time_basis=TimeBasis("linear"), survival_covariates=("treat",),
                     functional_form=FunctionalForm("value"))
    draws = fit_joint_model(small_data, spec, mcmc=McmcConfig(n_iter=1500, burn_in=500, thin=2, seed=1,
                                                             survival=False))
    beta, D, sigma = em_mixed_model(small_data, spec)
    assert np.all(draws.alpha == 0.0)
    m, sd = draws.beta.mean(axis=0), draws.beta.std(axis=0)
    assert np.all(np.abs(m - beta) < 3 * sd)
    assert abs(draws.sigma.mean() - sigma) < 3 * draws.sigma.std()
    assert abs(draws.D[:, 0, 0].mean() - D[0, 0]) < 3 * draws.D[:, 0, 0].std()


def test_joint_fit_round_trip_and_shapes(small_data, tmp_path):
    spec = ModelSpec(time_basis=TimeBasis("linear"), survival_covariates=("treat",))
    draws = fit_joint_model(small_data, spec, mcmc=McmcConfig(n_iter=60, burn_in=20, thin=4, seed=3))
    assert draws.n_draws == 10
    assert draws.b.shape == (10, 60, 2)
    assert draws.diagnostics["acceptance_survival"] is not None
    draws.save(tmp_path / "d")
    back = load_posterior_draws(tmp_path / "d")
    for name in ("beta", "sigma", "gamma", "alpha", "gamma_h0", "D", "tau", "b"):
        assert np.array_equal(getattr(back, name), getattr(draws, name)), name
    assert back.subject_ids == draws.subject_ids
    again = fit_joint_model(small_data, spec, mcmc=McmcConfig(n_iter=60, burn_in=20, thin=4, seed=3))
    assert np.array_equal(again.alpha, draws.alpha)


def test_load_rejects_dimension_mismatch(small_data, tmp_path):
    spec = ModelSpec(time_basis=TimeBasis("linear"), survival_covariates=("treat",))
    draws = fit_joint_model(small_data, spec, mcmc=McmcConfig(n_iter=10, burn_in=5, thin=1, seed=3))
    draws.save(tmp_path)
    with pytest.raises(DrawsError):
        load_posterior_draws(tmp_path, spec=true_spec())
