"""JSON experiment configs: schemas, defaults and provenance hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


TRAIN = _obj(
    {
        "T": _int1,
        "base_lr": _pos,
        "decay_factor": _pos,
        "decay_at": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
        "betas": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
        "eps": _pos,
        "batch_size": {"type": ["integer", "null"], "minimum": 1},
        "lam": {"type": ["number", "null"], "minimum": 0},
        "lam_factor": {"type": "number", "minimum": 0},
        "record_every": {"type": ["integer", "null"], "minimum": 1},
    }
)

NOISE = _obj(
    {
        "kind": {"enum": ["none", "gaussian", "bounded"]},
        "sigma": {"type": "number", "minimum": 0},
        "tau0": {"type": "number", "minimum": 0},
        "c0": {"type": "number", "minimum": 0},
    }
)

TARGET = _obj(
    {
        "kind": {"enum": ["one_neuron", "positive_rep", "rep_file"]},
        "d": _int1,
        "atoms": _int1,
        "direction": {"oneOf": [{"enum": ["e1", "random"]}, {"type": "array", "items": _num}]},
        "rep_path": {"type": "string"},
        "noise": NOISE,
    }
)

LOSS = _obj({"kind": {"enum": ["squared", "truncated"]}, "B": {"oneOf": [_num, {"const": "auto"}]}})

CHECKSUMS = _obj({k: {"type": "string", "pattern": "^[0-9a-fA-F]{64}$"}
                  for k in ("images", "labels", "test_images", "test_labels")})

DATA = _obj(
    {
        "source": {"enum": ["synthetic", "csv", "mnist"]},
        "n": _int1,
        "test_size": _int1,
        "target": TARGET,
        "csv": {"type": "string"},
        "images": {"type": "string"},
        "labels": {"type": "string"},
        "test_images": {"type": "string"},
        "test_labels": {"type": "string"},
        "checksums": CHECKSUMS,
        "bias": {"type": "boolean"},
    }
)

COMMON = {
    "command": {"type": "string"},
    "out": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "threads": _int1,
}

SCHEMAS = {
    "train": _obj(
        {**COMMON, "data": DATA, "m": _int1, "kappa": _pos, "loss": LOSS, "train": TRAIN,
         "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}
    ),
    "rate-study": _obj(
        {
            **COMMON,
            "d_list": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
            "n_grid": {"type": "array", "items": _int1, "minItems": 2},
            "test_size": _int1,
            "repeats": _int1,
            "methods": {"type": "array", "items": {"enum": ["nn", "krr"]}, "minItems": 1},
            "target": _obj({"direction": {"enum": ["e1", "random"]}}),
            "nn": _obj({"m": _int1, "kappa": _pos, "train": TRAIN}),
            "krr": _obj(
                {
                    "M": _int1,
                    "ridges": {"type": "array", "items": _pos, "minItems": 1},
                    "holdout": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                }
            ),
            "stderr_exclusion": {"type": "number", "minimum": 0},
        }
    ),
    "width-sweep": _obj(
        {**COMMON, "data": DATA, "m_grid": {"type": "array", "items": _int1, "minItems": 1},
         "kappa": _pos, "train": TRAIN}
    ),
    "init-sweep": _obj(
        {**COMMON, "data": DATA, "m": _int1, "kappa_grid": {"type": "array", "items": _pos, "minItems": 1},
         "repeats": _int1, "train": TRAIN}
    ),
    "mnist-bench": _obj(
        {
            **COMMON,
            "images": {"type": "string"},
            "labels": {"type": "string"},
            "test_images": {"type": "string"},
            "test_labels": {"type": "string"},
            "checksums": CHECKSUMS,
            "cells": {
                "type": "array",
                "minItems": 1,
                "items": _obj({"lambda_mode": {"enum": ["regularized", "unregularized"]}, "n": _int1},
                              required=("lambda_mode", "n")),
            },
            "m": _int1,
            "kappa": _pos,
            "repeats": _int1,
            "test_size": _int1,
            "train": TRAIN,
        },
        required=("images", "labels"),
    ),
    "bound-report": _obj(
        {**COMMON, "model": {"type": "string"}, "data": {"type": "string"},
         "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
         "gamma2": {"type": "number", "minimum": 0}, "loss": LOSS},
        required=("model", "data"),
    ),
}

_TRAIN_DEFAULTS = {
    "T": 2000,
    "base_lr": 1e-3,
    "decay_factor": 0.1,
    "decay_at": [0.7, 0.9],
    "betas": [0.9, 0.999],
    "eps": 1e-8,
    "batch_size": None,
    "lam": None,
    "lam_factor": 0.1,
    "record_every": None,
}

_SYNTH = {
    "source": "synthetic",
    "n": 1024,
    "test_size": 10_000,
    "target": {"kind": "one_neuron", "d": 10, "atoms": 4, "direction": "e1", "noise": {"kind": "none"}},
}

DEFAULTS = {
    "train": {"out": "out/train", "seed": 0, "threads": 1, "data": _SYNTH, "m": 256, "kappa": 1.0,
              "loss": {"kind": "squared"}, "train": _TRAIN_DEFAULTS, "delta": 0.1},
    "rate-study": {
        "out": "out/rate-study",
        "seed": 0,
        "threads": 1,
        "d_list": [10],
        "n_grid": [64, 128, 256, 512, 1024, 2048, 4096],
        "test_size": 10_000,
        "repeats": 3,
        "methods": ["nn", "krr"],
        "target": {"direction": "e1"},
        "nn": {"m": 256, "kappa": 1.0, "train": _TRAIN_DEFAULTS},
        "krr": {"M": 4096, "ridges": [1e-8, 1e-7, 1e-6], "holdout": 0.2},
        "stderr_exclusion": 0.2,
    },
    "width-sweep": {
        "out": "out/width-sweep",
        "seed": 0,
        "threads": 1,
        "data": {**_SYNTH, "target": {**_SYNTH["target"], "kind": "positive_rep"}},
        "m_grid": [256, 512, 1024, 2048, 4096, 8192],
        "kappa": 1.0,
        "train": _TRAIN_DEFAULTS,
    },
    "init-sweep": {
        "out": "out/init-sweep",
        "seed": 0,
        "threads": 1,
        "data": {**_SYNTH, "n": 100},
        "m": 1000,
        "kappa_grid": [0.25, 1.0, 4.0, 16.0],
        "repeats": 5,
        "train": _TRAIN_DEFAULTS,
    },
    "mnist-bench": {
        "out": "out/mnist-bench",
        "seed": 0,
        "threads": 1,
        "cells": [{"lambda_mode": "regularized", "n": 100}, {"lambda_mode": "unregularized", "n": 100}],
        "m": 1000,
        "kappa": 1.0,
        "repeats": 1,
        "test_size": 10_000,
        "train": _TRAIN_DEFAULTS,
    },
    "bound-report": {"out": "out/bound-report", "seed": 0, "threads": 1, "delta": 0.1},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(command: str, user: dict) -> dict:
    """Validate ``user`` against the command schema and merge it over the defaults."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        jsonschema.validate(user, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS[command], user)
    cfg.pop("command", None)
    return cfg


def load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical config; output location and worker count are excluded."""
    body = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
