"""Sparse variational baseline: bound property, gradients, convergence."""

import numpy as np
import pytest

from gpnet.kernels import GpRegressionModel, RbfArdKernel, exact_gp_posterior, log_marginal_likelihood
from gpnet.numerics import SeededRng, grad_check
from gpnet.svgp import SvgpModel, SvgpTrainer, kmeanspp_indices, svgp_elbo_and_grads, svgp_predict
from gpnet.training import TrainConfig


def _data(seed=0, n=30):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 5, size=(n, 1))
    y = np.sin(1.5 * x[:, 0]) + 0.15 * rng.standard_normal(n)
    return x, y


def _hyper(log_l=np.log(0.8), log_sf2=0.0, log_noise=np.log(0.1), d=1):
    return np.concatenate([np.full(d, log_l), [log_sf2, log_noise]])


class TestElboBound:
    def test_never_exceeds_exact_lml(self):
        """The sparse bound stays below the exact log marginal likelihood."""
        rng = np.random.default_rng(1)
        for n in (20, 60, 200):
            x, y = _data(seed=n, n=n)
            hyper = _hyper()
            model = SvgpModel(z=x[kmeanspp_indices(x, min(10, n), SeededRng(n))], hyper=hyper)
            # random non-trivial variational state
            q = model.q.params + 0.3 * rng.standard_normal(model.q.n_params)
            model.q = model.q.with_params(q)
            elbo, *_ = svgp_elbo_and_grads(model, x, y, n)
            gp = GpRegressionModel(
                kernel=model.kernel, log_noise_variance=hyper[-1], train_x=x, train_y=y
            )
            assert elbo <= log_marginal_likelihood(gp) + 1e-6

    def test_tight_when_inducing_equals_data(self):
        """Full inducing set and converged q(u) close the gap to the LML."""
        x, y = _data(seed=2, n=20)
        hyper = _hyper()
        config = TrainConfig(
            iterations=4000, batch_size=20, eta=0.01, hyperparam_mode="fixed",
            measurement_count=2, seed=0,
        )
        trainer = SvgpTrainer(config, x, y, n_inducing=20, hyper=hyper)
        trainer.model.z = x.copy()
        trainer.run()
        elbo = trainer.elbo(x, y)
        gp = GpRegressionModel(kernel=trainer.model.kernel, log_noise_variance=hyper[-1], train_x=x, train_y=y)
        lml = log_marginal_likelihood(gp)
        assert elbo <= lml + 1e-6
        assert lml - elbo <= 1e-2


class TestElboGradients:
    @pytest.mark.parametrize("block", ["q", "hyper", "z"])
    def test_matches_finite_differences(self, block):
        rng = np.random.default_rng(3)
        x, y = _data(seed=3, n=12)
        hyper = _hyper(log_l=np.log(0.6))
        z0 = x[kmeanspp_indices(x, 5, SeededRng(4))]

        def build(qvec=None, hvec=None, zvec=None):
            model = SvgpModel(z=z0 if zvec is None else zvec.reshape(5, 1), hyper=hyper if hvec is None else hvec)
            base = model.q.params
            model.q = model.q.with_params(base + 0.2 * np.sin(np.arange(base.size)) if qvec is None else qvec)
            return model

        if block == "q":
            base = build().q.params

            def f(vec):
                return svgp_elbo_and_grads(build(qvec=vec), x, y, 12)[0]

            def grad(vec):
                return svgp_elbo_and_grads(build(qvec=vec), x, y, 12)[1]

        elif block == "hyper":
            base = hyper.copy()

            def f(vec):
                return svgp_elbo_and_grads(build(hvec=vec), x, y, 12, train_hypers=True)[0]

            def grad(vec):
                return svgp_elbo_and_grads(build(hvec=vec), x, y, 12, train_hypers=True)[2]

        else:
            base = z0.ravel().copy()

            def f(vec):
                return svgp_elbo_and_grads(build(zvec=vec), x, y, 12, train_z=True)[0]

            def grad(vec):
                return svgp_elbo_and_grads(build(zvec=vec), x, y, 12, train_z=True)[3].ravel()

        assert grad_check(f, grad, base, 1e-5) <= 1e-4


class TestPrediction:
    def test_matches_exact_gp_with_full_inducing_converged(self):
        x, y = _data(seed=5, n=20)
        hyper = _hyper()
        config = TrainConfig(
            iterations=4000, batch_size=20, eta=0.01, hyperparam_mode="fixed",
            measurement_count=2, seed=1,
        )
        trainer = SvgpTrainer(config, x, y, n_inducing=20, hyper=hyper)
        trainer.model.z = x.copy()
        trainer.run()
        grid = np.linspace(0, 5, 15)[:, None]
        pred = trainer.predictive(grid)
        gp = GpRegressionModel(kernel=trainer.model.kernel, log_noise_variance=hyper[-1], train_x=x, train_y=y)
        oracle = exact_gp_posterior(gp, grid)
        assert np.max(np.abs(pred.mean - oracle.mean)) <= 0.05
        assert np.max(np.abs(pred.variances() - oracle.variances())) <= 0.05

    def test_diag_prediction_consistent(self):
        x, y = _data(seed=6, n=15)
        model = SvgpModel(z=x[:6], hyper=_hyper())
        grid = np.linspace(0, 5, 9)[:, None]
        full = svgp_predict(model, grid, full_cov=True)
        mean, var = svgp_predict(model, grid, full_cov=False)
        np.testing.assert_allclose(mean, full.mean, atol=1e-12)
        np.testing.assert_allclose(var, full.variances(), atol=1e-12)


class TestTrainerMechanics:
    def test_deterministic_runs(self):
        x, y = _data(seed=7, n=25)
        config = TrainConfig(iterations=40, batch_size=10, eta=0.01, hyperparam_mode="fixed", seed=3)
        a = SvgpTrainer(config, x, y, n_inducing=6, hyper=_hyper())
        b = SvgpTrainer(config, x, y, n_inducing=6, hyper=_hyper())
        a.run()
        b.run()
        assert np.array_equal(a.model.q.params, b.model.q.params)

    def test_kmeanspp_deterministic_and_distinct(self):
        x, _ = _data(seed=8, n=50)
        idx1 = kmeanspp_indices(x, 10, SeededRng(9))
        idx2 = kmeanspp_indices(x, 10, SeededRng(9))
        assert np.array_equal(idx1, idx2)
        assert len(set(idx1.tolist())) == 10

    def test_online_hypers_move(self):
        x, y = _data(seed=10, n=30)
        config = TrainConfig(iterations=25, batch_size=10, eta=0.01, hyperparam_mode="online", seed=4)
        trainer = SvgpTrainer(config, x, y, n_inducing=5, hyper=_hyper())
        before = trainer.model.hyper.copy()
        trainer.run()
        assert not np.array_equal(trainer.model.hyper, before)

    def test_train_z_moves_inducing(self):
        x, y = _data(seed=11, n=30)
        config = TrainConfig(iterations=25, batch_size=10, eta=0.01, hyperparam_mode="fixed", seed=5)
        trainer = SvgpTrainer(config, x, y, n_inducing=5, hyper=_hyper(), train_z=True)
        before = trainer.model.z.copy()
        trainer.run()
        assert not np.array_equal(trainer.model.z, before)
