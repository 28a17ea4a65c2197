"""Inference-network marginals, sampling, gradients, and checkpointing."""

import numpy as np
import pytest

from gpnet.features import RfeFeatureMap
from gpnet.kernels import RbfArdKernel, kernel_matrix
from gpnet.network import GaussianWeightDist, InferenceNetwork, load_network, save_network
from gpnet.numerics import SeededRng, grad_check


def _random_net(rng, dim=1, n_freq=6, structure="full", raw=False):
    fmap = RfeFeatureMap.create(
        dim, n_freq, seed=int(rng.integers(0, 2**31)),
        log_lengthscales=rng.normal(0, 0.2, size=dim),
        log_amplitude=float(rng.normal(0, 0.2)),
        train_raw_frequencies=raw,
    )
    net = InferenceNetwork.initial(fmap, structure=structure)
    vec = net.params + 0.3 * rng.standard_normal(net.n_params)
    return net.with_params(vec)


class TestMarginal:
    def test_zero_mean_weights(self):
        fmap = RfeFeatureMap.create(1, 5, seed=0)
        net = InferenceNetwork.initial(fmap)
        marg = net.marginal(np.linspace(-2, 2, 9)[:, None])
        assert np.all(marg.mean == 0.0)

    def test_tiny_std_is_deterministic(self):
        fmap = RfeFeatureMap.create(1, 5, seed=1)
        weights = GaussianWeightDist(
            mean=np.ones(10), structure="diagonal", log_std=np.full(10, np.log(1e-12))
        )
        net = InferenceNetwork(feature_map=fmap, weights=weights)
        marg = net.marginal(np.linspace(0, 1, 4)[:, None])
        assert np.max(np.abs(marg.cov)) <= 1e-20

    def test_monte_carlo_oracle(self):
        """Exact moments agree with 1e5 weight samples pushed through phi."""
        rng = np.random.default_rng(2)
        net = _random_net(rng, n_freq=4)
        points = rng.uniform(-1, 1, size=(4, 1))
        marg = net.marginal(points)
        phi = net.feature_map.evaluate(points)
        lmat = net.weights.chol()
        eps = np.random.default_rng(3).standard_normal((100000, lmat.shape[0]))
        w_samples = net.weights.mean[None, :] + eps @ lmat.T
        f_samples = w_samples @ phi.T
        assert np.max(np.abs(f_samples.mean(axis=0) - marg.mean)) <= 0.02
        emp_cov = np.cov(f_samples.T)
        assert np.linalg.norm(emp_cov - marg.cov) <= 0.05 * max(np.linalg.norm(marg.cov), 1e-3)

    def test_marginal_consistency_subsets(self):
        rng = np.random.default_rng(4)
        net = _random_net(rng, dim=2)
        points = rng.standard_normal((8, 2))
        full = net.marginal(points)
        idx = np.array([0, 3, 6])
        part = net.marginal(points[idx])
        # BLAS blocking may differ between the two shapes; exact up to ulps.
        np.testing.assert_allclose(part.mean, full.mean[idx], atol=1e-14)
        np.testing.assert_allclose(part.cov, full.cov[np.ix_(idx, idx)], atol=1e-14)

    def test_psd_random_nets(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            net = _random_net(rng, n_freq=8)
            pts = rng.uniform(-2, 2, size=(50, 1))
            eigs = np.linalg.eigvalsh(net.marginal(pts).cov)
            assert eigs.min() >= -1e-10

    def test_rank_bound(self):
        """Covariance rank cannot exceed the feature count."""
        rng = np.random.default_rng(6)
        net = _random_net(rng, n_freq=3)  # F = 6
        pts = rng.uniform(-2, 2, size=(12, 1))
        eigs = np.sort(np.linalg.eigvalsh(net.marginal(pts).cov))
        assert np.all(np.abs(eigs[: 12 - 6]) <= 1e-10)

    def test_prior_equivalence_at_init(self):
        """m=0, V=I makes the marginal covariance track the RBF prior kernel."""
        kernel = RbfArdKernel.default(1)
        fmap = RfeFeatureMap.create(1, 4000, seed=0)
        net = InferenceNetwork.initial(fmap, structure="full")
        grid = np.linspace(-3, 3, 25)[:, None]
        marg = net.marginal(grid)
        exact = kernel_matrix(kernel, grid)
        assert np.max(np.abs(marg.cov - exact)) <= 0.03


class TestMarginalGradients:
    @pytest.mark.parametrize("structure", ["full", "diagonal"])
    @pytest.mark.parametrize("raw", [False, True])
    def test_pullback_matches_finite_differences(self, structure, raw):
        rng = np.random.default_rng(8)
        net = _random_net(rng, dim=2, n_freq=3, structure=structure, raw=raw)
        points = rng.standard_normal((4, 2))
        w_mean = rng.standard_normal(4)
        w_cov = rng.standard_normal((4, 4))
        w_cov = 0.5 * (w_cov + w_cov.T)

        def f(vec):
            marg = net.with_params(vec).marginal(points)
            return float(w_mean @ marg.mean + np.sum(w_cov * marg.cov))

        def grad(vec):
            marg, pullback = net.with_params(vec).marginal_with_pullback(points)
            return pullback(w_mean, w_cov)

        assert grad_check(f, grad, net.params, 1e-6) <= 2e-6


class TestSampling:
    def test_sample_moments(self):
        rng = np.random.default_rng(9)
        net = _random_net(rng, n_freq=4)
        pts = rng.uniform(-1, 1, size=(3, 1))
        marg = net.marginal(pts)
        samples = net.sample(pts, SeededRng(11), 200000)
        assert np.max(np.abs(samples.mean(axis=0) - marg.mean)) <= 0.02
        assert np.linalg.norm(np.cov(samples.T) - marg.cov) <= 0.05 * max(np.linalg.norm(marg.cov), 1e-3)

    def test_fixed_seed_reproducible(self):
        rng = np.random.default_rng(10)
        net = _random_net(rng)
        pts = rng.uniform(-1, 1, size=(3, 1))
        assert np.array_equal(net.sample(pts, SeededRng(5), 7), net.sample(pts, SeededRng(5), 7))

    def test_mean_of_samples_gradient(self):
        """d(mean of samples)/dm is the column mean of Phi; FD-checked on all params."""
        rng = np.random.default_rng(12)
        net = _random_net(rng, n_freq=3)
        pts = rng.uniform(-1, 1, size=(4, 1))
        n_fm = net.feature_map.params.shape[0]
        f_dim = net.feature_map.dim_out

        def f(vec):
            samples, _ = net.with_params(vec).sample_with_pullback(pts, SeededRng(21), 10)
            return float(samples.mean())

        def grad(vec):
            samples, pullback = net.with_params(vec).sample_with_pullback(pts, SeededRng(21), 10)
            return pullback(np.full(samples.shape, 1.0 / samples.size))

        g = grad(net.params)
        phi = net.feature_map.evaluate(pts)
        np.testing.assert_allclose(g[n_fm : n_fm + f_dim], phi.mean(axis=0), atol=1e-12)
        assert grad_check(f, grad, net.params, 1e-6) <= 1e-5


class TestCheckpoint:
    @pytest.mark.parametrize("structure", ["full", "diagonal"])
    @pytest.mark.parametrize("raw", [False, True])
    def test_roundtrip_bit_exact(self, tmp_path, structure, raw):
        rng = np.random.default_rng(13)
        fmap = RfeFeatureMap.create(2, 5, seed=99, train_raw_frequencies=raw)
        net = InferenceNetwork.initial(fmap, structure=structure)
        net = net.with_params(net.params + 0.25 * rng.standard_normal(net.n_params))
        path = tmp_path / "net.npz"
        save_network(path, net)
        loaded = load_network(path)
        assert np.array_equal(loaded.params, net.params)
        pts = rng.standard_normal((6, 2))
        a, b = loaded.marginal(pts), net.marginal(pts)
        assert np.array_equal(a.mean, b.mean)
        assert np.array_equal(a.cov, b.cov)
