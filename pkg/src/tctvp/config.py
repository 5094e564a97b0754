"""Run configuration: one JSON document, schema-checked, unknown keys rejected."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError

_POSITIVE_INT = {"type": "integer", "minimum": 1}
_NONNEG_NUMBER = {"type": "number", "minimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "transforms": {
                    "type": "object",
                    "additionalProperties": {"enum": ["none", "pct-change", "log"]},
                },
                "nonstationary": {
                    "type": "object",
                    "additionalProperties": {"type": "boolean"},
                },
                "pre_sample": {"type": "integer", "minimum": 0},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "lags"],
            "properties": {
                "type": {
                    "enum": ["tc-tvp", "tvp-standard", "var-flat", "bvar-minnesota"]
                },
                "lags": _POSITIVE_INT,
                "tightness": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "theory": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "fixed_theta": {
                    "type": ["array", "null"],
                    "items": {"type": "number"},
                },
                "sample_theta": {"type": "boolean"},
                "zlb": {
                    "type": ["object", "null"],
                    "additionalProperties": False,
                    "properties": {
                        "start": {"type": ["string", "integer"]},
                        "length": _POSITIVE_INT,
                        "expected_horizon": _POSITIVE_INT,
                        "measurement_variance": _NONNEG_NUMBER,
                    },
                    "required": ["start", "length"],
                },
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam_upper": {"type": "number", "exclusiveMinimum": 0},
                "gamma_upper": {"type": "number", "exclusiveMinimum": 0},
                "fix_lam": {"type": ["number", "null"]},
                "fix_gamma": {"type": ["number", "null"]},
                "init_lam": {"type": "number", "exclusiveMinimum": 0},
                "init_gamma": {"type": "number", "exclusiveMinimum": 0},
                "presample_ar_order": _POSITIVE_INT,
            },
        },
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": _POSITIVE_INT,
                "burn_in": {"type": "integer", "minimum": 0},
                "thinning": _POSITIVE_INT,
                "seed": {"type": "integer", "minimum": 0},
                "hyper_step": {"type": "number", "exclusiveMinimum": 0},
                "theta_step": {"type": "number", "exclusiveMinimum": 0},
                "adapt_window": _POSITIVE_INT,
            },
        },
        "forecast": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "origins": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "string"}},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["start", "count"],
                            "properties": {
                                "start": {"type": "string"},
                                "count": _POSITIVE_INT,
                            },
                        },
                    ]
                },
                "horizons": {"type": "array", "items": _POSITIVE_INT},
                "mode": {"enum": ["point", "average"]},
                "ndraws": _POSITIVE_INT,
                "freeze_coefficients": {"type": "boolean"},
            },
        },
        "irf": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dates": {"type": "array", "items": {"type": ["string", "integer"]}},
                "horizons": _POSITIVE_INT,
                "shocks": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "cumulative": {
                    "type": "object",
                    "additionalProperties": {"type": "boolean"},
                },
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "periods": _POSITIVE_INT,
                "start": {"type": "string"},
                "theta": {"type": ["array", "null"], "items": {"type": "number"}},
            },
        },
        "ml_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "gamma": {"type": "array", "items": _NONNEG_NUMBER},
            },
            "required": ["lam", "gamma"],
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "data": {"transforms": {}, "nonstationary": {}, "pre_sample": 0},
    "theory": {"name": "nk-small", "fixed_theta": None, "sample_theta": False, "zlb": None},
    "prior": {
        "lam_upper": 1e10,
        "gamma_upper": 1e10,
        "fix_lam": None,
        "fix_gamma": None,
        "init_lam": 1.0,
        "init_gamma": 1.0,
        "presample_ar_order": 4,
    },
    "chain": {
        "iterations": 20_000,
        "burn_in": 10_000,
        "thinning": 10,
        "seed": 0,
        "hyper_step": 0.3,
        "theta_step": 0.1,
        "adapt_window": 50,
    },
    "forecast": {
        "horizons": [1, 2, 4],
        "mode": "point",
        "ndraws": 500,
        "freeze_coefficients": False,
    },
    "irf": {"horizons": 20, "shocks": [0], "cumulative": {}},
    "simulate": {"periods": 139, "start": "1985Q1", "theta": None},
    "output": {"dir": "runs"},
}


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path_or_dict) -> dict:
    """Parse, schema-validate, and apply defaults to a run configuration."""
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        path = Path(path_or_dict)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}") from exc
    merged = _merge(DEFAULTS, raw)
    cfg_chain = merged["chain"]
    if cfg_chain["burn_in"] >= cfg_chain["iterations"]:
        raise ConfigError("chain.burn_in must be smaller than chain.iterations")
    return merged


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
