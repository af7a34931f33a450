"""JSON run configuration: defaults, schema validation and object construction."""

import copy
import json
from dataclasses import asdict, fields
from importlib import resources

import jsonschema

from .model import ConfigError, NetworkParams, generate_traffic
from .optimizer import OptimizerSettings

SCHEMA_NAME = "config.schema.json"

DEFAULTS = {
    "seed": 0,
    "network": asdict(NetworkParams()),
    "traffic": {"seed": None, "P0": 0.1, "sigma_h": 100.0, "nh_min": None, "nh_max": None,
                "per_cell": False, "quad_order": 32, "hotspots": None},
    "optimizer": {**asdict(OptimizerSettings()), "restarts": 1},
    "mc": {"n_trials": 2000, "n_fading": 200, "outage_trials": 100_000},
    "sweep": {"omegas": list(range(1, 25)), "n_values": [2, 4, 8, 10], "nm_total": None,
              "seeds": [0]},
}


def load_schema():
    return json.loads(resources.files(__package__).joinpath(SCHEMA_NAME).read_text("utf-8"))


def validate(cfg):
    """Raise ConfigError naming the first offending key path."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(path, err.message)


def merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=None):
    """Read a JSON config (or none), validate it and fill in the defaults."""
    user = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
    validate(user)
    cfg = merge(DEFAULTS, user)
    if overrides:
        cfg = merge(cfg, overrides)
    validate(cfg)
    # constructing the objects runs the cross-field checks
    build_params(cfg)
    build_settings(cfg)
    return cfg


def build_params(cfg, **changes):
    return NetworkParams(**{**cfg["network"], **changes})


def build_settings(cfg, **changes):
    names = {f.name for f in fields(OptimizerSettings)}
    opts = {k: v for k, v in cfg["optimizer"].items() if k in names}
    try:
        return OptimizerSettings(**{**opts, **changes})
    except ValueError as exc:
        raise ConfigError("optimizer", str(exc)) from exc


def traffic_seed(cfg):
    seed = cfg["traffic"].get("seed")
    return cfg["seed"] if seed is None else seed


def build_traffic(cfg, params, seed=None):
    t = cfg["traffic"]
    return generate_traffic(traffic_seed(cfg) if seed is None else seed, params, P0=t["P0"],
                            sigma_h=t["sigma_h"], nh_min=t["nh_min"], nh_max=t["nh_max"],
                            per_cell=t["per_cell"], quad_order=t["quad_order"],
                            hotspots=t["hotspots"])
