"""Random-feature expansion: kernel fidelity and parameter gradients."""

import numpy as np
import pytest

from gpnet.errors import DimensionMismatch
from gpnet.features import RfeFeatureMap, rfe_kernel_estimate
from gpnet.kernels import RbfArdKernel, kernel_matrix
from gpnet.numerics import grad_check


class TestFeatureValues:
    def test_norm_is_amplitude_squared(self):
        """cos^2 + sin^2 makes ||phi(x)||^2 = a^2 for every x."""
        fmap = RfeFeatureMap.create(2, 16, seed=0, log_amplitude=np.log(1.7))
        rng = np.random.default_rng(0)
        phi = fmap.evaluate(rng.standard_normal((30, 2)))
        np.testing.assert_allclose(np.sum(phi**2, axis=1), 1.7**2, rtol=1e-12)

    def test_single_point_estimate(self):
        fmap = RfeFeatureMap.create(1, 8, seed=1, log_amplitude=0.5 * np.log(2.0))
        out = rfe_kernel_estimate(fmap, np.array([[0.3]]), np.array([[0.3]]))
        np.testing.assert_allclose(out, [[2.0]], rtol=1e-12)

    def test_swap_transposes(self):
        fmap = RfeFeatureMap.create(2, 10, seed=2)
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((4, 2)), rng.standard_normal((6, 2))
        np.testing.assert_allclose(rfe_kernel_estimate(fmap, a, b), rfe_kernel_estimate(fmap, b, a).T, atol=0)

    def test_kernel_fidelity_4000_features(self):
        """Monte-Carlo feature estimate tracks the exact RBF kernel."""
        fmap = RfeFeatureMap.create(1, 4000, seed=3)
        kernel = RbfArdKernel.default(1)
        rng = np.random.default_rng(2)
        a = rng.uniform(-3, 3, size=(100, 1))
        b = rng.uniform(-3, 3, size=(100, 1))
        est = np.array([rfe_kernel_estimate(fmap, a[i : i + 1], b[i : i + 1])[0, 0] for i in range(100)])
        exact = np.array([kernel_matrix(kernel, a[i : i + 1], b[i : i + 1])[0, 0] for i in range(100)])
        assert np.mean(np.abs(est - exact)) <= 0.02

    def test_dimension_mismatch(self):
        fmap = RfeFeatureMap.create(2, 4, seed=0)
        with pytest.raises(DimensionMismatch):
            fmap.evaluate(np.zeros((3, 5)))

    def test_deterministic_given_params(self):
        fmap = RfeFeatureMap.create(3, 12, seed=9)
        x = np.random.default_rng(3).standard_normal((5, 3))
        assert np.array_equal(fmap.evaluate(x), fmap.evaluate(x))


class TestFeatureGradients:
    @pytest.mark.parametrize("raw", [False, True])
    def test_pullback_matches_finite_differences(self, raw):
        fmap = RfeFeatureMap.create(
            2, 6, seed=4, log_lengthscales=np.array([0.3, -0.2]), log_amplitude=0.1,
            train_raw_frequencies=raw,
        )
        rng = np.random.default_rng(4)
        x = rng.standard_normal((5, 2))
        w = rng.standard_normal((5, 12))

        def f(vec):
            return float(np.sum(fmap.with_params(vec).evaluate(x) * w))

        def grad(vec):
            phi, pullback = fmap.with_params(vec).evaluate_with_pullback(x)
            return pullback(w)

        assert grad_check(f, grad, fmap.params, 1e-6) <= 1e-6

    def test_param_roundtrip_both_modes(self):
        for raw in (False, True):
            fmap = RfeFeatureMap.create(2, 5, seed=5, train_raw_frequencies=raw)
            vec = fmap.params + 0.1
            assert np.array_equal(fmap.with_params(vec).params, vec)
