"""Flat key=value config files and their merge with CLI overrides.

One `key = value` pair per line, `#` comments allowed. Keys mirror
ExperimentConfig fields; list-valued keys take comma-separated values.
The PERTURBNET_OUT environment variable overrides the output directory
from either source.
"""

from __future__ import annotations

import os
from pathlib import Path

from .errors import ConfigError
from .experiments import ExperimentConfig

OUT_DIR_ENV = "PERTURBNET_OUT"

_BOOL_KEYS = {"perturb_enabled", "cumulative", "combine_dropout_perturb"}
_INT_KEYS = {"interval_epochs", "epochs_pretrain", "epochs_finetune", "batch_size", "folds", "seed"}
_FLOAT_KEYS = {"tau", "learning_rate", "dropout_rate", "reg_lambda"}
_LIST_KEYS = {"datasets", "models", "cases"}
_STR_KEYS = {"manifest", "out_dir", "reg_kind", "baseline_scores"}
ALL_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _LIST_KEYS | _STR_KEYS


def parse_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _LIST_KEYS:
        if isinstance(value, (list, tuple)):
            return [str(v) for v in value]
        return [tok.strip() for tok in str(value).split(",") if tok.strip()]
    if key in _BOOL_KEYS:
        if isinstance(value, bool):
            return value
        lowered = str(value).strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if key in _INT_KEYS:
            return int(str(value))
        if key in _FLOAT_KEYS:
            return float(str(value))
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    return str(value)


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Config file values, then CLI overrides, then the env output override."""
    merged = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in ALL_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value)
    env_out = os.environ.get(OUT_DIR_ENV)
    if env_out:
        merged["out_dir"] = env_out
    if "manifest" not in merged:
        raise ConfigError("a dataset manifest is required (key 'manifest' or --manifest)")
    if "out_dir" not in merged:
        raise ConfigError(f"an output directory is required (key 'out_dir', --out, or ${OUT_DIR_ENV})")
    merged["manifest"] = Path(merged["manifest"])
    merged["out_dir"] = Path(merged["out_dir"])
    if merged.get("baseline_scores"):
        merged["baseline_scores"] = Path(merged["baseline_scores"])
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg
