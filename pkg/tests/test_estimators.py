"""The scikit-learn facade: params, validation, fit/predict round trips."""

import numpy as np
import pytest
from sklearn.base import clone

from gpnet.estimators import ExactGPRegressor, FBNNRegressor, GPNetRegressor, SVGPRegressor


def _data(seed=0, n=50):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 6, size=(n, 1))
    y = np.sin(2 * x[:, 0]) + 0.1 * rng.standard_normal(n)
    return x, y


class TestSklearnProtocol:
    @pytest.mark.parametrize(
        "est",
        [
            ExactGPRegressor(),
            GPNetRegressor(iterations=5),
            FBNNRegressor(iterations=5),
            SVGPRegressor(iterations=5),
        ],
    )
    def test_get_set_params_and_clone(self, est):
        params = est.get_params()
        assert isinstance(params, dict) and params
        cloned = clone(est)
        assert cloned.get_params() == params

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            ExactGPRegressor().predict(np.zeros((2, 1)))

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            ExactGPRegressor().fit(np.zeros((3, 2)), np.zeros(5))


class TestExactGPRegressor:
    def test_fit_predict_interpolates(self):
        x, y = _data()
        est = ExactGPRegressor(lengthscale=0.5, noise_variance=0.01).fit(x, y)
        pred = est.predict(x)
        assert np.sqrt(np.mean((pred - y) ** 2)) < 0.15

    def test_return_std_and_cov(self):
        x, y = _data()
        est = ExactGPRegressor().fit(x, y)
        grid = np.linspace(0, 6, 9)[:, None]
        mean, std = est.predict(grid, return_std=True)
        mean2, cov = est.predict(grid, return_cov=True)
        np.testing.assert_allclose(mean, mean2)
        np.testing.assert_allclose(std**2, np.diag(cov), atol=1e-10)
        _, std_noisy = est.predict(grid, return_std=True, include_noise=True)
        assert np.all(std_noisy > std)

    def test_hyperparameter_optimization_improves_lml(self):
        x, y = _data(n=80)
        fixed = ExactGPRegressor().fit(x, y)
        tuned = ExactGPRegressor(optimize_iterations=200, optimize_lr=0.05).fit(x, y)
        assert tuned.log_marginal_likelihood() > fixed.log_marginal_likelihood()

    def test_score_is_r2(self):
        x, y = _data()
        est = ExactGPRegressor(lengthscale=0.5, noise_variance=0.01).fit(x, y)
        assert est.score(x, y) > 0.9


class TestNetworkEstimators:
    def test_gpnet_short_run_reduces_error(self):
        x, y = _data(n=60)
        weak = GPNetRegressor(iterations=0, hyperparam_mode="fixed", seed=1)
        strong = GPNetRegressor(
            iterations=800, batch_size=20, measurement_count=10, n_frequencies=12,
            eta=0.01, hyperparam_mode="pretrain-then-fix", seed=1,
        )
        weak.fit(x, y)
        strong.fit(x, y)
        grid = np.linspace(0, 6, 40)[:, None]
        truth = np.sin(2 * grid[:, 0]) + 0.2 * np.cos(5 * grid[:, 0])
        err_weak = np.mean((weak.predict(grid) - truth) ** 2)
        err_strong = np.mean((strong.predict(grid) - truth) ** 2)
        assert err_strong < err_weak

    def test_deterministic_refit(self):
        x, y = _data()
        a = GPNetRegressor(iterations=30, seed=7, hyperparam_mode="fixed").fit(x, y)
        b = GPNetRegressor(iterations=30, seed=7, hyperparam_mode="fixed").fit(x, y)
        grid = np.linspace(0, 6, 11)[:, None]
        assert np.array_equal(a.predict(grid), b.predict(grid))

    def test_fbnn_is_distinct_mode(self):
        x, y = _data()
        a = GPNetRegressor(iterations=30, seed=7, hyperparam_mode="fixed").fit(x, y)
        b = FBNNRegressor(iterations=30, seed=7, hyperparam_mode="fixed").fit(x, y)
        grid = np.linspace(0, 6, 11)[:, None]
        assert not np.array_equal(a.predict(grid), b.predict(grid))

    def test_svgp_fit_predict(self):
        x, y = _data(n=60)
        est = SVGPRegressor(
            n_inducing=15, iterations=1500, batch_size=30, eta=0.01,
            hyperparam_mode="pretrain-then-fix", seed=2,
        ).fit(x, y)
        assert est.score(x, y) > 0.7
        mean, std = est.predict(np.linspace(0, 6, 13)[:, None], return_std=True)
        assert np.all(std > 0)

    def test_svgp_elbo_accessible(self):
        x, y = _data(n=40)
        est = SVGPRegressor(n_inducing=10, iterations=50, batch_size=20, seed=3).fit(x, y)
        assert np.isfinite(est.elbo(x, y))
