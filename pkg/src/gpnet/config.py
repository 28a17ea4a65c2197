"""Run configuration: INI files with [run]/[train]/[synth] sections.

Unknown keys are rejected by name; flat overrides use dotted paths like
`train.eta=0.001`. The resolved configuration can be re-serialized and fed
back to reproduce a run exactly.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .training import TrainConfig

__all__ = ["RunConfig", "SynthConfig", "parse_run_config", "serialize_run_config"]

METHODS = ("gpnet", "svgp", "fbnn-ablation", "exact")


@dataclass(frozen=True)
class SynthConfig:
    n: int = 100
    noise_std: float = 0.1
    gap: tuple | None = (2.5, 3.5)
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    method: str = "gpnet"
    dataset: str = "synth"
    manifest: str | None = None
    output_dir: str = "run-output"
    eval_interval: int = 1000
    train_fraction: float = 0.9
    split_seed: int = 0
    fold_index: int = 0
    n_inducing: int = 100
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    synth: SynthConfig = dataclasses.field(default_factory=SynthConfig)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"run.method must be one of {METHODS}, got {self.method!r}")
        if self.dataset != "synth" and not self.manifest:
            raise ConfigError("run.manifest is required for non-synthetic datasets")
        if self.eval_interval < 0:
            raise ConfigError("run.eval_interval must be >= 0")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("run.train_fraction must lie in (0, 1]")
        if self.n_inducing < 1:
            raise ConfigError("run.n_inducing must be >= 1")
        self.train.validate()


def _coerce(section: str, key: str, text: str, target_type):
    text = text.strip()
    try:
        if key in ("sampler_box", "gap"):
            if text.lower() in ("none", ""):
                return None
            parts = [float(p) for p in text.split(",")]
            if len(parts) != 2:
                raise ValueError("expected two comma-separated numbers")
            return tuple(parts)
        if key == "manifest":
            return None if text.lower() == "none" else text
        if target_type is bool:
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
    except ValueError as err:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r} ({err})") from None
    raise ConfigError(f"{section}.{key}: unsupported value {text!r}")


def _field_map(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


_RUN_FIELDS = {k: v for k, v in _field_map(RunConfig).items() if k not in ("train", "synth")}
_TRAIN_FIELDS = _field_map(TrainConfig)
_SYNTH_FIELDS = _field_map(SynthConfig)


def _type_of(field):
    # dataclass fields carry annotations as strings under future-import.
    ann = field.type if not isinstance(field.type, str) else field.type
    mapping = {
        "int": int,
        "float": float,
        "str": str,
        "bool": bool,
        "str | None": str,
        "tuple | None": tuple,
    }
    if isinstance(ann, str):
        return mapping.get(ann, str)
    return ann


def _apply(section_name, fields, values, text_items):
    for key, text in text_items:
        if key not in fields:
            raise ConfigError(f"unknown key {section_name}.{key}")
        f = fields[key]
        values[key] = _coerce(section_name, key, text, _type_of(f))
    return values


def parse_run_config(path=None, overrides=()) -> RunConfig:
    """Read an INI run config and apply dotted-path overrides."""
    run_vals, train_vals, synth_vals = {}, {}, {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(Path(path))
        if not read:
            raise ConfigError(f"config file {path} not found")
        for section in parser.sections():
            items = list(parser[section].items())
            if section == "run":
                _apply("run", _RUN_FIELDS, run_vals, items)
            elif section == "train":
                _apply("train", _TRAIN_FIELDS, train_vals, items)
            elif section == "synth":
                _apply("synth", _SYNTH_FIELDS, synth_vals, items)
            else:
                raise ConfigError(f"unknown config section [{section}]")

    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not key=value")
        dotted, text = ov.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        if section == "run":
            _apply("run", _RUN_FIELDS, run_vals, [(key, text)])
        elif section == "train":
            _apply("train", _TRAIN_FIELDS, train_vals, [(key, text)])
        elif section == "synth":
            _apply("synth", _SYNTH_FIELDS, synth_vals, [(key, text)])
        else:
            raise ConfigError(f"unknown section {section!r} in override {ov!r}")

    config = RunConfig(
        **run_vals, train=TrainConfig(**train_vals), synth=SynthConfig(**synth_vals)
    )
    config.validate()
    return config


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(repr(float(p)) for p in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_run_config(config: RunConfig) -> str:
    """Canonical INI text; parsing it back reproduces the config exactly."""
    out = io.StringIO()
    out.write("[run]\n")
    for name in _RUN_FIELDS:
        out.write(f"{name} = {_format_value(getattr(config, name))}\n")
    out.write("\n[train]\n")
    for name in _TRAIN_FIELDS:
        out.write(f"{name} = {_format_value(getattr(config.train, name))}\n")
    out.write("\n[synth]\n")
    for name in _SYNTH_FIELDS:
        out.write(f"{name} = {_format_value(getattr(config.synth, name))}\n")
    return out.getvalue()


def config_as_dict(config: RunConfig) -> dict:
    out = {f"run.{k}": _format_value(getattr(config, k)) for k in _RUN_FIELDS}
    out.update({f"train.{k}": _format_value(getattr(config.train, k)) for k in _TRAIN_FIELDS})
    out.update({f"synth.{k}": _format_value(getattr(config.synth, k)) for k in _SYNTH_FIELDS})
    return out
