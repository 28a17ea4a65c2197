"""Dataset-free sanity checks runnable from the CLI.

A fast subset of the property suite: linear algebra round trips, kernel
fidelity of the feature expansion, the filter fixed point, KL identities,
the tempering schedule, and determinism of seeded streams.
"""

from __future__ import annotations

import numpy as np

from .features import RfeFeatureMap, rfe_kernel_estimate
from .filtering import blend_prior_network, kl_gaussian, regression_filter_target
from .kernels import GaussianMarginal, GpRegressionModel, RbfArdKernel, exact_gp_posterior, kernel_matrix, prior_marginal
from .numerics import SeededRng, cholesky
from .training import BetaSchedule


def _check_cholesky_roundtrip():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((60, 60))
    a = a @ a.T + 60 * np.eye(60)
    f = cholesky(a)
    err = np.max(np.abs(f.lower @ f.lower.T - a))
    return err <= 1e-8 * np.max(np.abs(a)), f"reconstruction error {err:.2e}"


def _check_rfe_fidelity():
    fmap = RfeFeatureMap.create(1, 4000, seed=3)
    kernel = RbfArdKernel.default(1)
    rng = np.random.default_rng(1)
    a = rng.uniform(-3, 3, size=(50, 1))
    b = rng.uniform(-3, 3, size=(50, 1))
    est = np.diag(rfe_kernel_estimate(fmap, a, b))
    exact = np.array([kernel_matrix(kernel, a[i : i + 1], b[i : i + 1])[0, 0] for i in range(50)])
    err = float(np.mean(np.abs(est - exact)))
    return err <= 0.02, f"mean abs kernel error {err:.4f}"


def _check_filter_fixed_point():
    rng = np.random.default_rng(2)
    kernel = RbfArdKernel(log_lengthscales=np.array([np.log(0.7)]))
    n = 20
    x = rng.uniform(0, 6, size=(n, 1))
    y = np.sin(2 * x[:, 0]) + 0.1 * rng.standard_normal(n)
    model = GpRegressionModel(kernel=kernel, log_noise_variance=np.log(0.1), train_x=x, train_y=y)
    x_m = rng.uniform(0, 6, size=(5, 1))
    joint_points = np.vstack([x_m, x])
    posterior_joint = exact_gp_posterior(model, joint_points)
    worst = 0.0
    for beta in (0.1, 0.5, 1.0):
        blended = blend_prior_network(prior_marginal(kernel, joint_points), posterior_joint, beta)
        target = regression_filter_target(blended, y, 0.1, n, beta)
        oracle = exact_gp_posterior(model, x_m)
        worst = max(
            worst,
            float(np.max(np.abs(target.marginal.mean - oracle.mean))),
            float(np.max(np.abs(target.marginal.cov - oracle.cov))),
        )
    return worst <= 1e-6, f"fixed-point deviation {worst:.2e}"


def _check_kl_identity():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((4, 1))
    a = rng.standard_normal((4, 4))
    cov = a @ a.T + 4 * np.eye(4)
    q = GaussianMarginal(points=pts, mean=rng.standard_normal(4), cov=cov)
    val = abs(kl_gaussian(q, q))
    one_d = kl_gaussian(
        GaussianMarginal(points=np.zeros((1, 1)), mean=[0.0], cov=[[1.0]]),
        GaussianMarginal(points=np.zeros((1, 1)), mean=[1.0], cov=[[1.0]]),
    )
    ok = val <= 1e-10 and abs(one_d - 0.5) <= 1e-9
    return ok, f"KL(q||q)={val:.1e}, 1-D shifted KL={one_d:.6f}"


def _check_beta_schedule():
    sched = BetaSchedule(beta0=1.0, xi=1.0)
    vals = [sched.beta_at(t) for t in range(100)]
    ok = abs(sched.beta_at(4) - 1.0 / 3.0) <= 1e-12 and all(
        b <= a for a, b in zip(vals, vals[1:])
    )
    return ok, f"beta(4)={sched.beta_at(4):.6f}, monotone over 100 steps"


def _check_determinism():
    a = SeededRng(42).derive("stream").standard_normal(64)
    b = SeededRng(42).derive("stream").standard_normal(64)
    return bool(np.array_equal(a, b)), "seeded streams repeat bit-exactly"


CHECKS = [
    ("cholesky-roundtrip", _check_cholesky_roundtrip),
    ("rfe-kernel-fidelity", _check_rfe_fidelity),
    ("filter-fixed-point", _check_filter_fixed_point),
    ("kl-identities", _check_kl_identity),
    ("beta-schedule", _check_beta_schedule),
    ("rng-determinism", _check_determinism),
]


def run_selftest(verbose: bool = True) -> int:
    failures = 0
    for name, fn in CHECKS:
        ok, detail = fn()
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    if verbose:
        print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1
