"""Command-line interface: train, compare, curves, selftest.

Exit codes: 0 success, 2 configuration error (message names the offending
key), 3 numerical failure during training (message carries the iteration).
Existing outputs are never overwritten unless --force is passed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import METHODS, RunConfig, config_as_dict, parse_run_config, serialize_run_config
from .data import SplitSpec, load_from_manifest, load_manifest, make_split, synth_1d
from .errors import ConfigError, GpnetError, TrainingFailure
from .estimators import ExactGPRegressor, FBNNRegressor, GPNetRegressor, SVGPRegressor
from .metrics import (
    MetricsReport,
    config_fingerprint,
    metrics_record_bytes,
    predictive_curve_table,
    regression_metrics,
    write_curve_file,
)
from .numerics import SeededRng

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _resolve_output_dir(config: RunConfig) -> Path:
    root = os.environ.get("GPNET_OUTPUT_ROOT", ".")
    out = Path(config.output_dir)
    return out if out.is_absolute() else Path(root) / out


def _load_dataset(config: RunConfig, base_dir="."):
    if config.dataset == "synth":
        s = config.synth
        return synth_1d(s.n, noise_std=s.noise_std, gap=s.gap, rng=SeededRng(s.seed))
    manifest = load_manifest(Path(base_dir) / config.manifest)
    return load_from_manifest(manifest, config.dataset, base_dir=Path(config.manifest).parent if Path(config.manifest).is_absolute() else base_dir)


def _make_estimator(config: RunConfig):
    t = config.train
    if config.method == "exact":
        iters = 0 if t.hyperparam_mode == "fixed" else t.pretrain_iterations
        return ExactGPRegressor(
            lengthscale=t.init_lengthscale,
            signal_variance=t.init_signal_variance,
            noise_variance=t.init_noise_variance,
            optimize_iterations=iters,
            optimize_lr=t.pretrain_lr,
            optimize_subset=t.pretrain_subset,
            seed=t.seed,
        )
    if config.method == "svgp":
        return SVGPRegressor(
            n_inducing=config.n_inducing,
            iterations=t.iterations,
            batch_size=t.batch_size,
            eta=t.eta,
            seed=t.seed,
            hyperparam_mode=t.hyperparam_mode,
            optimizer=t.optimizer,
            init_lengthscale=t.init_lengthscale,
            init_signal_variance=t.init_signal_variance,
            init_noise_variance=t.init_noise_variance,
            pretrain_iterations=t.pretrain_iterations,
            pretrain_subset=t.pretrain_subset,
            pretrain_lr=t.pretrain_lr,
        )
    cls = GPNetRegressor if config.method == "gpnet" else FBNNRegressor
    kwargs = dict(
        iterations=t.iterations,
        batch_size=t.batch_size,
        measurement_count=t.measurement_count,
        n_frequencies=t.n_frequencies,
        eta=t.eta,
        beta0=t.beta0,
        xi=t.xi,
        seed=t.seed,
        likelihood=t.likelihood,
        sampler=t.sampler,
        sampler_scale=t.sampler_scale,
        sampler_box=t.sampler_box,
        hyperparam_mode=t.hyperparam_mode,
        optimizer=t.optimizer,
        mc_samples=t.mc_samples,
        weight_structure=t.weight_structure,
        train_raw_frequencies=t.train_raw_frequencies,
        init_lengthscale=t.init_lengthscale,
        init_signal_variance=t.init_signal_variance,
        init_noise_variance=t.init_noise_variance,
        pretrain_iterations=t.pretrain_iterations,
        pretrain_subset=t.pretrain_subset,
        pretrain_lr=t.pretrain_lr,
    )
    return cls(**kwargs)


def _predict_diag(estimator, x_std):
    """Per-point (mean, variance) in standardized space, cheap paths first."""
    if isinstance(estimator, (GPNetRegressor, FBNNRegressor)):
        return estimator.trainer_.net.marginal_diag(x_std)
    if isinstance(estimator, SVGPRegressor):
        from .svgp import svgp_predict

        return svgp_predict(estimator.trainer_.model, x_std, full_cov=False)
    marginal = estimator.predict_marginal(x_std)
    return marginal.mean, marginal.variances()


def _checkpoint_payload(config: RunConfig, estimator):
    if config.method in ("gpnet", "fbnn-ablation"):
        return estimator.trainer_.net
    if config.method == "svgp":
        return estimator.trainer_.model
    return estimator.model_


def run_single(config: RunConfig, force: bool = False) -> MetricsReport:
    """Train one method on one split and write all artifacts."""
    out_dir = _resolve_output_dir(config)
    artifacts = [out_dir / n for n in ("config.ini", "training.log", "checkpoint.npz", "metrics.json")]
    if not force:
        existing = [str(p) for p in artifacts if p.exists()]
        if existing:
            raise ConfigError(f"outputs already exist (use --force): {existing}")
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = _load_dataset(config)
    spec = SplitSpec(
        train_fraction=config.train_fraction,
        split_seed=config.split_seed,
        fold_index=config.fold_index,
    )
    train, test, standardizer = make_split(dataset, spec)
    x_train = standardizer.transform_x(train.x)
    y_train = standardizer.transform_y(train.y)
    x_test = standardizer.transform_x(test.x)

    fingerprint = config_fingerprint(config_as_dict(config))
    (out_dir / "config.ini").write_text(serialize_run_config(config))

    estimator = _make_estimator(config)
    t_start = time.monotonic()
    log_path = out_dir / "training.log"
    with open(log_path, "w") as log_fh:

        def log_record(iteration, beta, objective):
            mean, var = _predict_diag(estimator, x_test)
            rmse, test_ll = regression_metrics(
                mean, var, test.y, standardizer, estimator.noise_variance_
            )
            record = {
                "iter": iteration,
                "beta": beta,
                "objective": objective,
                "rmse": rmse,
                "test_ll": test_ll,
                "wallclock_ms": (time.monotonic() - t_start) * 1000.0,
            }
            log_fh.write(json.dumps(record) + "\n")

        if config.method == "exact":
            estimator.fit(x_train, y_train)
            log_record(0, None, estimator.log_marginal_likelihood())
        else:
            estimator.fit(
                x_train,
                y_train,
                callback=_TrainingLogger(estimator, log_record),
                callback_every=config.eval_interval,
            )

    mean, var = _predict_diag(estimator, x_test)
    rmse, test_ll = regression_metrics(mean, var, test.y, standardizer, estimator.noise_variance_)
    # The fold index is part of the config fingerprint; split_seed plus the
    # fingerprint pins the exact split.
    report = MetricsReport(
        method=config.method,
        dataset=config.dataset,
        split_seed=config.split_seed,
        rmse=rmse,
        test_ll=test_ll,
        wallclock_s=time.monotonic() - t_start,
        config_fingerprint=fingerprint,
    )
    (out_dir / "metrics.json").write_bytes(metrics_record_bytes(report))
    save_checkpoint(
        out_dir / "checkpoint.npz",
        kind=config.method,
        model=_checkpoint_payload(config, estimator),
        standardizer=standardizer,
        noise_variance=estimator.noise_variance_,
        hyper=estimator.hyper_,
    )
    return report


class _TrainingLogger:
    """Adapter: trainer callback that also exposes the live noise estimate."""

    def __init__(self, estimator, log_record):
        self.estimator = estimator
        self.log_record = log_record

    def __call__(self, trainer, iteration, objective):
        model = getattr(trainer, "model", None)
        noise = model.noise_variance if model is not None else trainer.noise_variance
        self.estimator.noise_variance_ = noise
        beta = trainer.beta if hasattr(trainer, "beta") else None
        self.log_record(iteration, beta, objective)


def cmd_train(args) -> int:
    config = parse_run_config(args.config, args.set or [])
    report = run_single(config, force=args.force)
    print(
        f"{report.method} on {report.dataset}: rmse={report.rmse:.6f} "
        f"test_ll={report.test_ll:.6f} ({report.wallclock_s:.1f}s)"
    )
    return EXIT_OK


def _compare_job(payload):
    config, force = payload
    try:
        report = run_single(config, force=force)
        return (config.method, config.fold_index, report.rmse, report.test_ll, None)
    except GpnetError as err:
        return (config.method, config.fold_index, float("nan"), float("nan"), str(err))


def cmd_compare(args) -> int:
    import dataclasses

    config = parse_run_config(args.config, args.set or [])
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    out_root = _resolve_output_dir(config)

    jobs = []
    for method in methods:
        for fold in range(args.splits):
            sub = dataclasses.replace(
                config,
                method=method,
                fold_index=fold,
                output_dir=str(Path(config.output_dir) / f"{method}-fold{fold}"),
            )
            jobs.append((sub, args.force))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_job, jobs))
    else:
        results = [_compare_job(j) for j in jobs]

    failures = [r for r in results if r[4] is not None]
    for method, fold, _, _, err in failures:
        print(f"FAILED {method} fold {fold}: {err}", file=sys.stderr)

    out_root.mkdir(parents=True, exist_ok=True)
    lines = ["method,rmse_mean,rmse_stderr,test_ll_mean,test_ll_stderr,n_ok"]
    table_rows = []
    for method in methods:
        rows = [r for r in results if r[0] == method and r[4] is None]
        rmses = np.array([r[2] for r in rows])
        lls = np.array([r[3] for r in rows])
        if len(rows) == 0:
            lines.append(f"{method},nan,nan,nan,nan,0")
            table_rows.append((method, "-", "-", 0))
            continue
        stderr = lambda v: float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
        lines.append(
            f"{method},{float(rmses.mean())!r},{stderr(rmses)!r},{float(lls.mean())!r},{stderr(lls)!r},{len(rows)}"
        )
        table_rows.append(
            (method, f"{rmses.mean():.4f} ± {stderr(rmses):.4f}", f"{lls.mean():.4f} ± {stderr(lls):.4f}", len(rows))
        )
    (out_root / "comparison.csv").write_text("\n".join(lines) + "\n")

    width = max(len(m) for m in methods) + 2
    print(f"{'method':<{width}}{'rmse':<22}{'test_ll':<22}ok")
    for method, rmse_s, ll_s, n_ok in table_rows:
        print(f"{method:<{width}}{rmse_s:<22}{ll_s:<22}{n_ok}/{args.splits}")
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_curves(args) -> int:
    model = load_checkpoint(args.checkpoint)
    if model.dim != 1:
        raise ConfigError(f"curves need a 1-D model, checkpoint has dim {model.dim}")
    try:
        lo, hi, n = args.grid.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"grid spec {args.grid!r} is not lo:hi:n") from None
    if n < 1:
        raise ConfigError("grid needs at least one point")
    grid = np.linspace(lo, hi, n)[:, None] if n > 1 else np.array([[lo]])
    x_std = model.standardizer.transform_x(grid)
    marginal = model.predict_marginal(x_std)
    table = predictive_curve_table(
        grid[:, 0],
        marginal.mean,
        marginal.variances(),
        model.standardizer,
        noise_variance=model.noise_variance if args.include_noise else None,
    )
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"output {out} already exists (use --force)")
    write_curve_file(out, table)
    print(f"wrote {n} curve rows to {out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpnet",
        description="GP posterior inference with trainable networks, sparse baselines, and an exact oracle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one method on one split, writing artifacts")
    p_train.add_argument("--config", "-c", default=None, help="INI run config")
    p_train.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
    p_train.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p_train.set_defaults(func=cmd_train)

    p_cmp = sub.add_parser("compare", help="run several methods over several splits and aggregate")
    p_cmp.add_argument("--config", "-c", default=None)
    p_cmp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p_cmp.add_argument("--methods", required=True, help="comma-separated method list")
    p_cmp.add_argument("--splits", type=int, default=3)
    p_cmp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_cmp.add_argument("--force", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_cur = sub.add_parser("curves", help="export a predictive curve from a checkpoint")
    p_cur.add_argument("--checkpoint", required=True)
    p_cur.add_argument("--grid", required=True, help="lo:hi:n in original input units")
    p_cur.add_argument("--out", required=True)
    p_cur.add_argument("--include-noise", action="store_true", help="add observation noise to the band")
    p_cur.add_argument("--force", action="store_true")
    p_cur.set_defaults(func=cmd_curves)

    p_self = sub.add_parser("selftest", help="run the dataset-free property checks")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except GpnetError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
