"""Regression metrics on the original output scale, and curve export.

Test log-likelihood is the mean per-point log density of held-out targets
under the predictive distribution of y (observation noise included), with
the change-of-variables constant from standardization accounted for by
mapping moments back before evaluating the density.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .data import Standardizer
from .errors import NonFinite

__all__ = [
    "MetricsReport",
    "regression_metrics",
    "predictive_curve_table",
    "write_curve_file",
    "config_fingerprint",
    "metrics_record_bytes",
]


@dataclass(frozen=True)
class MetricsReport:
    method: str
    dataset: str
    split_seed: int
    rmse: float
    test_ll: float
    wallclock_s: float
    config_fingerprint: str


def regression_metrics(
    pred_mean: np.ndarray,
    pred_var: np.ndarray,
    y_test: np.ndarray,
    standardizer: Standardizer,
    noise_variance: float,
):
    """RMSE and mean test log-likelihood in original units.

    `pred_mean`/`pred_var` are function-space moments in standardized space;
    `noise_variance` is the (standardized-space) observation noise added to
    form the predictive density of y. `y_test` is on the original scale.
    """
    pred_mean = np.asarray(pred_mean, dtype=float).ravel()
    pred_var = np.asarray(pred_var, dtype=float).ravel()
    y_test = np.asarray(y_test, dtype=float).ravel()
    if np.any(pred_var + noise_variance <= 0):
        raise NonFinite("non-positive predictive variance")
    mean_orig, var_orig = standardizer.unstandardize_moments(pred_mean, pred_var + noise_variance)
    resid = y_test - mean_orig
    rmse = float(np.sqrt(np.mean(resid**2)))
    ll = -0.5 * np.log(2.0 * np.pi * var_orig) - 0.5 * resid**2 / var_orig
    test_ll = float(np.mean(ll))
    if not (np.isfinite(rmse) and np.isfinite(test_ll)):
        raise NonFinite("metrics are non-finite")
    return rmse, test_ll


def predictive_curve_table(
    grid_original: np.ndarray,
    pred_mean: np.ndarray,
    pred_var: np.ndarray,
    standardizer: Standardizer,
    noise_variance: float | None = None,
) -> np.ndarray:
    """(x, mean, std) rows in original units for a 1-D input grid.

    The std is function-space by default; pass `noise_variance` (standardized
    space) to include observation noise in the band.
    """
    grid_original = np.asarray(grid_original, dtype=float).ravel()
    var = np.asarray(pred_var, dtype=float).ravel()
    if noise_variance is not None:
        var = var + noise_variance
    mean_orig, var_orig = standardizer.unstandardize_moments(pred_mean, var)
    return np.column_stack([grid_original, mean_orig, np.sqrt(np.maximum(var_orig, 0.0))])


def write_curve_file(path, table: np.ndarray) -> None:
    rows = "\n".join(f"{x!r},{m!r},{s!r}" for x, m, s in table)
    with open(path, "w") as fh:
        fh.write("x,mean,std\n")
        fh.write(rows + "\n")


def config_fingerprint(config_dict: dict) -> str:
    """Stable hash of a configuration mapping."""
    blob = json.dumps(config_dict, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def metrics_record_bytes(report: MetricsReport) -> bytes:
    """Canonical serialized metrics record.

    Wall-clock time is intentionally excluded: the record must be
    byte-identical across repeated runs of the same config and seed. Timing
    lives in the training log and the report object.
    """
    payload = {
        "method": report.method,
        "dataset": report.dataset,
        "split_seed": report.split_seed,
        "rmse": repr(report.rmse),
        "test_ll": repr(report.test_ll),
        "config_fingerprint": report.config_fingerprint,
    }
    return (json.dumps(payload, sort_keys=True) + "\n").encode()
