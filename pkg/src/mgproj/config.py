"""Experiment configuration files: JSON documents with a strict schema.

Unknown keys are rejected (naming the offending line), values are validated,
and the resolved config (defaults filled in) round-trips through JSON
unchanged.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError

TASKS = ("wiggly", "token", "subspace-validation")

_WIGGLY_DATA_DEFAULTS = {
    "n_train": 800,
    "n_test": 200,
    "a": 0.8,
    "b": 0.0,
    "c": 0.0,
    "components": [[0.6, 3.0, 0.0], [0.25, 9.0, 1.0]],
    "x1_range": [-2.0, 2.0],
    "noise_std": 0.08,
}

_WIGGLY_MODEL_DEFAULTS = {
    "hidden_dim": 16,
    "n_layers": 2,
    "coarse_dim": 4,
    "eps": 1e-4,
    "tied": False,
    "alpha_logit": 0.0,
    "n_proj_steps": 1,
}

_TOKEN_DATA_DEFAULTS = {
    "vocab_size": 32,
    "t": 24,
    "pattern_pos": [3, 5, 7],
    "pattern_neg": [4, 6, 8],
    "noise_prob": 0.7,
    "max_noise": 6,
    "positive_ratio": 0.3,
    "n_train": 1500,
    "n_test": 400,
}

_TOKEN_MODEL_DEFAULTS = {
    "dim": 16,
    "mlp_hidden": 32,
    "refinement_steps": 2,
    "scales": [2, 4, 8],
    "seq_coarse": None,
    "eps": 1e-4,
}

_MIXTURE_DATA_DEFAULTS = {
    "f": 16,
    "c": 4,
    "sigma": 1.0,
    "n": 100000,
    "basis_seed": 0,
}

_VALIDATE_DEFAULTS = {
    "alphas": [0.25, 0.5, 0.75],
    "ratios": [0.0, 1.0, 2.0],
    "classifier_seed": 3,
}

_TRAIN_DEFAULTS = {
    "epochs": 15,
    "batch_size": 32,
    "lr_start": 0.005,
    "lr_end": 0.0001,
    "eta_mode": "scheduled",
    "eta_value": 0.5,
    "eta_decay": 0.8,
    "shuffle": True,
}

_TOP_KEYS = ("task", "name", "seeds", "out", "data", "model", "train", "grid", "validate")
_GRID_DEFAULTS = {"resolution": 200}


def _line_of(text: str, key: str) -> int | None:
    token = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if token in line:
            return i
    return None


def _reject_unknown(section: str, given: dict, allowed, text: str) -> None:
    for key in given:
        if key not in allowed:
            line = _line_of(text, key)
            where = f"line {line}" if line else "unknown line"
            raise ConfigError(f"unknown key {key!r} in {section} ({where})")


def _merge(section: str, defaults: dict, given: dict, text: str) -> dict:
    _reject_unknown(section, given, defaults, text)
    out = dict(defaults)
    out.update(given)
    return out


def load_config(path) -> dict:
    """Parse and resolve a config file; raises ConfigError with a
    line-anchored message on any problem."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve_config(raw, text=text, default_name=path.stem)


def resolve_config(raw: dict, text: str = "", default_name: str = "experiment") -> dict:
    _reject_unknown("top level", raw, _TOP_KEYS, text)
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")
    resolved: dict = {
        "task": task,
        "name": raw.get("name", default_name),
        "seeds": list(seeds),
        "out": raw.get("out", f"out/{raw.get('name', default_name)}"),
    }
    if task == "wiggly":
        resolved["data"] = _merge("data", _WIGGLY_DATA_DEFAULTS, raw.get("data", {}), text)
        resolved["model"] = _merge("model", _WIGGLY_MODEL_DEFAULTS, raw.get("model", {}), text)
        resolved["train"] = _merge("train", _TRAIN_DEFAULTS, raw.get("train", {}), text)
        resolved["grid"] = _merge("grid", _GRID_DEFAULTS, raw.get("grid", {}), text)
        if raw.get("validate"):
            raise ConfigError("wiggly task takes no 'validate' section")
    elif task == "token":
        resolved["data"] = _merge("data", _TOKEN_DATA_DEFAULTS, raw.get("data", {}), text)
        resolved["model"] = _merge("model", _TOKEN_MODEL_DEFAULTS, raw.get("model", {}), text)
        resolved["train"] = _merge("train", _TRAIN_DEFAULTS, raw.get("train", {}), text)
        for section in ("grid",):
            if raw.get(section):
                raise ConfigError(f"token task takes no {section!r} section")
    else:  # subspace-validation
        resolved["data"] = _merge("data", _MIXTURE_DATA_DEFAULTS, raw.get("data", {}), text)
        resolved["validate"] = _merge("validate", _VALIDATE_DEFAULTS, raw.get("validate", {}), text)
        for section in ("model", "train", "grid"):
            if raw.get(section):
                raise ConfigError(f"subspace-validation task takes no {section!r} section")
    _check_values(resolved)
    return resolved


def _check_values(cfg: dict) -> None:
    if cfg["task"] in ("wiggly", "token"):
        tr = cfg["train"]
        if tr["epochs"] < 1:
            raise ConfigError("train.epochs must be >= 1")
        if not tr["lr_start"] >= tr["lr_end"] > 0:
            raise ConfigError("need train.lr_start >= train.lr_end > 0")
        if tr["eta_mode"] not in ("scheduled", "learnable", "fixed"):
            raise ConfigError(f"unknown eta_mode {tr['eta_mode']!r}")
    if cfg["task"] == "wiggly":
        if cfg["grid"]["resolution"] < 2:
            raise ConfigError("grid.resolution must be >= 2")
        if cfg["model"]["coarse_dim"] >= cfg["model"]["hidden_dim"]:
            raise ConfigError("model.coarse_dim must be smaller than model.hidden_dim")
    if cfg["task"] == "token":
        if any(s >= cfg["model"]["dim"] for s in cfg["model"]["scales"]):
            raise ConfigError("every model.scales entry must be smaller than model.dim")
        sc = cfg["model"]["seq_coarse"]
        if sc is not None and sc >= cfg["data"]["t"]:
            raise ConfigError("model.seq_coarse must be smaller than data.t")
    if cfg["task"] == "subspace-validation":
        if not 1 <= cfg["data"]["c"] < cfg["data"]["f"]:
            raise ConfigError("need 1 <= data.c < data.f")
        if cfg["data"]["n"] < 1:
            raise ConfigError("data.n must be >= 1")


def dump_config(cfg: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=1, sort_keys=True)
        fh.write("\n")
