"""Metric computation on the original scale, curve export, record bytes."""

import numpy as np
import pytest

from gpnet.data import Dataset, SplitSpec, Standardizer, make_split
from gpnet.errors import NonFinite
from gpnet.estimators import ExactGPRegressor
from gpnet.kernels import GpRegressionModel, RbfArdKernel, exact_gp_posterior
from gpnet.metrics import (
    MetricsReport,
    config_fingerprint,
    metrics_record_bytes,
    predictive_curve_table,
    regression_metrics,
    write_curve_file,
)


def _identity_standardizer(d=1):
    return Standardizer(x_mean=np.zeros(d), x_std=np.ones(d), y_mean=0.0, y_std=1.0)


class TestRegressionMetrics:
    def test_perfect_predictions(self):
        y = np.array([1.0, -2.0, 0.5])
        rmse, _ = regression_metrics(y, np.full(3, 1e-12), y, _identity_standardizer(), 1e-12)
        assert rmse == 0.0

    def test_single_point_hand_case(self):
        """y=2, mean 1, total predictive var 1: rmse 1, ll = -0.5 log(2pi) - 0.5."""
        rmse, ll = regression_metrics(
            np.array([1.0]), np.array([0.6]), np.array([2.0]), _identity_standardizer(), 0.4
        )
        assert rmse == 1.0
        np.testing.assert_allclose(ll, -0.5 * np.log(2 * np.pi) - 0.5, rtol=1e-12)

    def test_matches_independent_implementation(self):
        """Cross-check against a from-scratch metric computation on an exact GP."""
        rng = np.random.default_rng(0)
        ds = Dataset(name="d", x=3 * rng.standard_normal((50, 1)) + 1, y=2 * rng.standard_normal(50) - 1)
        train, test, std = make_split(ds, SplitSpec(split_seed=0))
        model = GpRegressionModel(
            kernel=RbfArdKernel.default(1),
            log_noise_variance=np.log(0.1),
            train_x=std.transform_x(train.x),
            train_y=std.transform_y(train.y),
        )
        post = exact_gp_posterior(model, std.transform_x(test.x))
        rmse, ll = regression_metrics(post.mean, post.variances(), test.y, std, 0.1)

        # independent path: densities computed on the standardized scale with
        # the change-of-variables term -log y_std added per point
        mu_s, var_s = post.mean, post.variances() + 0.1
        y_s = std.transform_y(test.y)
        ll2 = np.mean(
            -0.5 * np.log(2 * np.pi * var_s) - 0.5 * (y_s - mu_s) ** 2 / var_s - np.log(std.y_std)
        )
        pred_orig = std.inverse_y(mu_s)
        rmse2 = np.sqrt(np.mean((test.y - pred_orig) ** 2))
        np.testing.assert_allclose(rmse, rmse2, rtol=1e-10)
        np.testing.assert_allclose(ll, ll2, rtol=1e-10)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(NonFinite):
            regression_metrics(
                np.array([0.0]), np.array([-1.0]), np.array([0.0]), _identity_standardizer(), 0.0
            )

    def test_invariance_to_affine_rescaling(self):
        """Training on affinely rescaled data yields the same original-scale
        metrics, because standardization happens on train moments."""
        rng = np.random.default_rng(1)
        ds = Dataset(name="d", x=rng.uniform(0, 5, (40, 1)), y=np.sin(rng.uniform(0, 5, 40)))
        ds2 = Dataset(name="d2", x=10 * ds.x - 3, y=5 * ds.y + 7)

        results = []
        for d in (ds, ds2):
            train, test, std = make_split(d, SplitSpec(split_seed=2))
            est = ExactGPRegressor(noise_variance=0.05).fit(
                std.transform_x(train.x), std.transform_y(train.y)
            )
            post = est.predict_marginal(std.transform_x(test.x))
            rmse, ll = regression_metrics(post.mean, post.variances(), test.y, std, 0.05)
            results.append((rmse, ll, std.y_std))
        # rmse scales with the output rescaling; ll shifts by -log scale
        np.testing.assert_allclose(results[1][0] / results[0][0], 5.0, rtol=1e-6)
        np.testing.assert_allclose(results[1][1] - results[0][1], -np.log(5.0), rtol=1e-6)


class TestCurveExport:
    def test_table_and_file(self, tmp_path):
        std = Standardizer(x_mean=np.zeros(1), x_std=np.ones(1), y_mean=1.0, y_std=2.0)
        table = predictive_curve_table(
            np.array([0.0, 1.0]), np.array([0.5, -0.5]), np.array([0.25, 1.0]), std
        )
        np.testing.assert_allclose(table[:, 1], [2.0, 0.0])
        np.testing.assert_allclose(table[:, 2], [1.0, 2.0])
        path = tmp_path / "curve.csv"
        write_curve_file(path, table)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,mean,std"
        assert len(lines) == 3

    def test_noise_flag_widens_band(self):
        std = _identity_standardizer()
        no_noise = predictive_curve_table(np.array([0.0]), np.array([0.0]), np.array([1.0]), std)
        with_noise = predictive_curve_table(
            np.array([0.0]), np.array([0.0]), np.array([1.0]), std, noise_variance=1.0
        )
        assert with_noise[0, 2] > no_noise[0, 2]


class TestRecords:
    def test_fingerprint_stable_and_sensitive(self):
        a = config_fingerprint({"x": 1, "y": "z"})
        b = config_fingerprint({"y": "z", "x": 1})
        c = config_fingerprint({"x": 2, "y": "z"})
        assert a == b and a != c

    def test_record_bytes_deterministic_without_wallclock(self):
        r1 = MetricsReport("gpnet", "synth", 0, 0.1, -1.0, 12.5, "abc")
        r2 = MetricsReport("gpnet", "synth", 0, 0.1, -1.0, 99.9, "abc")
        assert metrics_record_bytes(r1) == metrics_record_bytes(r2)
