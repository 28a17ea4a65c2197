"""Cross-method model checkpoints: one .npz per trained run.

Every method (gpnet, fbnn-ablation, svgp, exact) serializes enough state to
reproduce predictions bit-exactly: its parameters, the prior/noise
hyperparameters, and the standardizer that maps between the original data
scale and the training scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Standardizer
from .errors import ConfigError
from .features import RfeFeatureMap
from .kernels import GaussianMarginal, GpRegressionModel, RbfArdKernel, exact_gp_posterior
from .network import InferenceNetwork
from .svgp import SvgpModel, svgp_predict

__all__ = ["CheckpointModel", "save_checkpoint", "load_checkpoint"]

_VERSION = 1


@dataclass
class CheckpointModel:
    """A loaded model: predicts in standardized space, carries the mapping out."""

    kind: str
    standardizer: Standardizer
    noise_variance: float
    hyper: np.ndarray
    dim: int
    _predict: callable

    def predict_marginal(self, x_standardized) -> GaussianMarginal:
        return self._predict(np.atleast_2d(np.asarray(x_standardized, dtype=float)))


def _standardizer_arrays(std: Standardizer) -> dict:
    return {
        "std_x_mean": std.x_mean,
        "std_x_std": std.x_std,
        "std_y_mean": std.y_mean,
        "std_y_std": std.y_std,
    }


def save_checkpoint(path, kind: str, model, standardizer: Standardizer, noise_variance: float, hyper) -> None:
    """Serialize a trained model; `model` is the per-kind state object."""
    common = dict(
        version=_VERSION,
        kind=kind,
        noise_variance=noise_variance,
        hyper=np.asarray(hyper, dtype=float),
        **_standardizer_arrays(standardizer),
    )
    if kind in ("gpnet", "fbnn-ablation"):
        net: InferenceNetwork = model
        fm = net.feature_map
        if not isinstance(fm, RfeFeatureMap):
            raise ConfigError("only random-feature networks can be checkpointed")
        np.savez(
            path,
            **common,
            params=net.params,
            n_frequencies=fm.n_frequencies,
            dim_in=fm.dim_in,
            frequency_seed=fm.frequency_seed,
            train_raw_frequencies=int(fm.train_raw_frequencies),
            train_amplitude=int(fm.train_amplitude),
            log_lengthscales=fm.log_lengthscales,
            log_amplitude=fm.log_amplitude,
            weight_structure=net.weights.structure,
        )
    elif kind == "svgp":
        svgp: SvgpModel = model
        np.savez(path, **common, z=svgp.z, q_params=svgp.q.params)
    elif kind == "exact":
        gp: GpRegressionModel = model
        np.savez(path, **common, train_x=gp.train_x, train_y=gp.train_y)
    else:
        raise ConfigError(f"unknown checkpoint kind {kind!r}")


def load_checkpoint(path) -> CheckpointModel:
    with np.load(Path(path), allow_pickle=False) as data:
        if int(data["version"]) != _VERSION:
            raise ConfigError(f"unsupported checkpoint version {int(data['version'])}")
        kind = str(data["kind"])
        standardizer = Standardizer(
            x_mean=np.asarray(data["std_x_mean"], dtype=float),
            x_std=np.asarray(data["std_x_std"], dtype=float),
            y_mean=float(data["std_y_mean"]),
            y_std=float(data["std_y_std"]),
        )
        noise = float(data["noise_variance"])
        hyper = np.asarray(data["hyper"], dtype=float)
        dim = hyper.shape[0] - 2

        if kind in ("gpnet", "fbnn-ablation"):
            fm = RfeFeatureMap.create(
                dim=int(data["dim_in"]),
                n_frequencies=int(data["n_frequencies"]),
                seed=int(data["frequency_seed"]),
                log_lengthscales=np.asarray(data["log_lengthscales"], dtype=float),
                log_amplitude=float(data["log_amplitude"]),
                train_raw_frequencies=bool(int(data["train_raw_frequencies"])),
                train_amplitude=bool(int(data["train_amplitude"])),
            )
            net = InferenceNetwork.initial(fm, structure=str(data["weight_structure"]))
            net = net.with_params(np.asarray(data["params"], dtype=float))
            predict = net.marginal
        elif kind == "svgp":
            model = SvgpModel(z=np.asarray(data["z"], dtype=float), hyper=hyper)
            model.q = model.q.with_params(np.asarray(data["q_params"], dtype=float))
            predict = lambda x: svgp_predict(model, x, full_cov=True)
        elif kind == "exact":
            kernel = RbfArdKernel(log_lengthscales=hyper[:dim], log_signal_variance=float(hyper[dim]))
            gp = GpRegressionModel(
                kernel=kernel,
                log_noise_variance=float(hyper[dim + 1]),
                train_x=np.asarray(data["train_x"], dtype=float),
                train_y=np.asarray(data["train_y"], dtype=float),
            )
            predict = lambda x: exact_gp_posterior(gp, x)
        else:
            raise ConfigError(f"unknown checkpoint kind {kind!r}")

    return CheckpointModel(
        kind=kind,
        standardizer=standardizer,
        noise_variance=noise,
        hyper=hyper,
        dim=dim,
        _predict=predict,
    )
