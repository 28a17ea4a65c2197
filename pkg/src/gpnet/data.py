"""Dataset ingestion, train/test splits, standardization, synthetic data.

CSV ingestion is strict: a missing or non-numeric cell aborts with its line
and column; benchmark files are user-supplied and referenced through a
manifest (no downloading happens here).
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyFile, MissingValue, ParseError
from .numerics import SeededRng

__all__ = [
    "Dataset",
    "Standardizer",
    "SplitSpec",
    "load_csv",
    "load_xy_text",
    "make_split",
    "synth_1d",
    "load_manifest",
    "load_from_manifest",
]


@dataclass(frozen=True)
class Dataset:
    name: str
    x: np.ndarray
    y: np.ndarray
    feature_names: tuple | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise ParseError(0, f"{x.shape[0]} feature rows vs {y.shape[0]} targets")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Affine map to (nearly) zero mean, unit variance, fit on training rows."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "Standardizer":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        x_std = x.std(axis=0)
        if np.any(x_std == 0.0):
            warnings.warn("constant feature column(s); leaving them unscaled")
            x_std = np.where(x_std == 0.0, 1.0, x_std)
        y_std = float(y.std())
        if y_std == 0.0:
            warnings.warn("constant targets; leaving them unscaled")
            y_std = 1.0
        return cls(x_mean=x.mean(axis=0), x_std=x_std, y_mean=float(y.mean()), y_std=y_std)

    def transform_x(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.x_mean) / self.x_std

    def inverse_x(self, x):
        return np.atleast_2d(np.asarray(x, dtype=float)) * self.x_std + self.x_mean

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def inverse_y(self, y):
        return np.asarray(y, dtype=float) * self.y_std + self.y_mean

    def unstandardize_moments(self, mean, var):
        """Map predictive (mean, variance) back to the original output scale."""
        mean = np.asarray(mean, dtype=float)
        var = np.asarray(var, dtype=float)
        return mean * self.y_std + self.y_mean, var * self.y_std**2


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    split_seed: int = 0
    fold_index: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must lie in (0, 1]")


def make_split(dataset: Dataset, spec: SplitSpec):
    """Deterministic split plus a standardizer fit on the training rows only."""
    n = dataset.n
    n_train = int(n * spec.train_fraction)
    n_train = max(1, min(n_train, n - 1))
    rng = SeededRng(spec.split_seed).derive(f"fold-{spec.fold_index}")
    perm = rng.permutation(n)
    train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    train = Dataset(name=dataset.name, x=dataset.x[train_idx], y=dataset.y[train_idx],
                    feature_names=dataset.feature_names)
    test = Dataset(name=dataset.name, x=dataset.x[test_idx], y=dataset.y[test_idx],
                   feature_names=dataset.feature_names)
    return train, test, Standardizer.fit(train.x, train.y)


def _tokenize(line: str, delimiter: str):
    if delimiter == "whitespace":
        return line.split()
    return [tok.strip() for tok in line.split(delimiter)]


def load_csv(path, target_column, has_header: bool = True, delimiter: str = ",") -> Dataset:
    """Parse a delimited numeric text file into features and a target column.

    `target_column` is a header name (requires has_header) or a 0-based
    column index. Parse failures report 1-based line numbers.
    """
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines()]
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise EmptyFile(f"{path} contains no data")

    header = None
    if has_header:
        header_line, rows = rows[0], rows[1:]
        header = _tokenize(header_line[1], delimiter)
        if not rows:
            raise EmptyFile(f"{path} contains a header but no data rows")

    if isinstance(target_column, str):
        if header is None:
            raise ConfigError("target column by name requires a header")
        if target_column not in header:
            raise ConfigError(f"target column {target_column!r} not in header {header}")
        target_idx = header.index(target_column)
    else:
        target_idx = int(target_column)

    n_cols = None
    data = []
    for lineno, line in rows:
        tokens = _tokenize(line, delimiter)
        if n_cols is None:
            n_cols = len(tokens)
            if not 0 <= target_idx < n_cols or n_cols < 2:
                raise ParseError(lineno, f"target index {target_idx} invalid for {n_cols} columns")
        elif len(tokens) != n_cols:
            raise ParseError(lineno, f"expected {n_cols} columns, found {len(tokens)}")
        values = []
        for col, tok in enumerate(tokens):
            if tok == "":
                raise MissingValue(lineno, col)
            try:
                val = float(tok)
            except ValueError:
                raise MissingValue(lineno, col) from None
            if not np.isfinite(val):
                raise MissingValue(lineno, col)
            values.append(val)
        data.append(values)
    if len(data) < 2:
        raise EmptyFile(f"{path} has fewer than 2 data rows")

    arr = np.asarray(data, dtype=float)
    mask = np.arange(n_cols) != target_idx
    feature_names = tuple(h for i, h in enumerate(header) if mask[i]) if header else None
    return Dataset(name=path.stem, x=arr[:, mask], y=arr[:, target_idx], feature_names=feature_names)


def load_xy_text(path) -> Dataset:
    """Classic two-column whitespace format: input then target, no header."""
    return load_csv(path, target_column=1, has_header=False, delimiter="whitespace")


def synth_1d(
    n: int,
    fn_kind: str = "sinusoid-mix",
    noise_std: float = 0.1,
    gap: tuple | None = None,
    rng: SeededRng | None = None,
) -> Dataset:
    """1-D synthetic regression data: y = sin(2x) + 0.2 cos(5x) + noise.

    Inputs are uniform on [0, 6], excluding the optional gap interval, which
    mimics the shape of the classic sparse-regression toy set.
    """
    if fn_kind != "sinusoid-mix":
        raise ConfigError(f"unknown synthetic function kind {fn_kind!r}")
    if n < 2:
        raise ConfigError("need at least 2 points")
    rng = rng if rng is not None else SeededRng(0)
    lo, hi = 0.0, 6.0
    if gap is not None:
        g0, g1 = float(gap[0]), float(gap[1])
        if not lo <= g0 < g1 <= hi:
            raise ConfigError(f"gap {gap} must lie inside [{lo}, {hi}]")
        u = rng.uniform(0.0, (hi - lo) - (g1 - g0), size=n)
        x = np.where(u < g0, u, u + (g1 - g0))
    else:
        x = rng.uniform(lo, hi, size=n)
    y = np.sin(2.0 * x) + 0.2 * np.cos(5.0 * x)
    if noise_std > 0:
        y = y + noise_std * rng.standard_normal(n)
    return Dataset(name="synth-1d", x=x[:, None], y=y)


def load_manifest(path) -> dict:
    """Dataset manifest: one section per dataset with path/target/delimiter."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"manifest {path} not found")
    out = {}
    for name in parser.sections():
        section = parser[name]
        unknown = set(section.keys()) - {"path", "target", "delimiter", "has_header"}
        if unknown:
            raise ConfigError(f"manifest [{name}] has unknown keys: {sorted(unknown)}")
        if "path" not in section or "target" not in section:
            raise ConfigError(f"manifest [{name}] needs 'path' and 'target'")
        target = section["target"]
        if target.lstrip("-").isdigit():
            target = int(target)
        out[name] = {
            "path": section["path"],
            "target": target,
            "delimiter": section.get("delimiter", "comma"),
            "has_header": section.getboolean("has_header", fallback=True),
        }
    return out


def load_from_manifest(manifest: dict, name: str, base_dir=".") -> Dataset:
    if name not in manifest:
        raise ConfigError(f"dataset {name!r} not in manifest (have {sorted(manifest)})")
    entry = manifest[name]
    delim = {"comma": ",", "whitespace": "whitespace"}.get(entry["delimiter"], entry["delimiter"])
    path = Path(base_dir) / entry["path"]
    ds = load_csv(path, entry["target"], has_header=entry["has_header"], delimiter=delim)
    return Dataset(name=name, x=ds.x, y=ds.y, feature_names=ds.feature_names)
