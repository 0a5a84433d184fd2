"""Configuration documents: defaults, validation and unit handling.

Frequencies are given in MHz (converted with ``2 pi nu 1e-3`` to rad/ns) and
times in ns. Unspecified grid entries take experiment-specific defaults.
"""

import copy

import yaml

DEFAULTS = {
    "model": {"dim": 5, "eta_MHz": -200.0},
    "grid": {"T_ns": None, "dt_ns": None},
    "experiment": {
        "name": "prepare",
        "shape": {"kind": "exp_rise", "alpha_MHz": 6.0, "delay_ns": None},
        "objective": None,
        "c0": 0.0,
        "c1": 1.0,
        "psi_P": 1,
        "T0_ns": 10.0,
    },
    "controls": {
        "free": None,
        "bound_MHz": 80.0,
        "gamma_min_MHz": 0.5,
        "gamma_max_MHz": 10.0,
        "gamma_fixed_MHz": 5.0,
        "gamma0_MHz": 0.5,
    },
    "constraints": {"ramp_fraction": 0.1, "filter_std_ns": 1.0},
    "optimizer": {
        "memory": 10,
        "max_iters": 500,
        "grad_tol": 1e-6,
        "objective_tol": 1e-10,
        "seed": 0,
        "restarts": None,
        "init_scale": 0.5,
        "gradient": "exact",
    },
    "baselines": {"sigma_ns": None},
    "sweep": {"shapes": ["exp_decay", "sech", "exp_rise"], "ratio_min": 0.4, "ratio_max": 1.6,
              "points": 7},
    "strict": False,
}

# grid and shape defaults per experiment
EXPERIMENT_DEFAULTS = {
    "prepare": {"grid": {"T_ns": 10.0, "dt_ns": 0.05}, "optimizer": {"restarts": 3}},
    "generate": {"grid": {"T_ns": 600.0, "dt_ns": 1.0}, "optimizer": {"restarts": 4}},
    "sweep-alpha": {"grid": {"T_ns": 600.0, "dt_ns": 1.0}, "optimizer": {"restarts": 2}},
    "transfer": {"grid": {"T_ns": 600.0, "dt_ns": 1.0}, "optimizer": {"restarts": 4}},
    "tunable": {"grid": {"T_ns": 600.0, "dt_ns": 1.0}, "optimizer": {"restarts": 4},
                "experiment": {"shape": {"kind": "exp_rise", "alpha_MHz": 5.0}}},
    "simulate": {"grid": {"T_ns": 600.0, "dt_ns": 0.5}, "optimizer": {"restarts": 1},
                 "experiment": {"shape": {"kind": "exp_decay", "alpha_MHz": 6.0, "delay_ns": 0.0}}},
}

OBJECTIVES = {"prepare": ["J1_ME", "J1_QSDE"], "generate": "J2", "sweep-alpha": "J2",
              "transfer": "J3", "tunable": "J3", "simulate": None}
SHAPES = ("exp_decay", "exp_rise", "sech")


class ConfigError(ValueError):
    pass


def _merge(base, over, path=""):
    for key, val in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be a mapping")
            _merge(base[key], val, where)
        else:
            base[key] = val
    return base


def _fill(base, over):
    """Apply experiment defaults only where the user left a value unset."""
    for key, val in over.items():
        if isinstance(val, dict):
            _fill(base[key], val)
        elif base.get(key) is None:
            base[key] = val


def resolve(user=None, seed=None, strict=None, name=None):
    """Expand a user document into a complete, validated configuration."""
    cfg = copy.deepcopy(DEFAULTS)
    user = copy.deepcopy(user or {})
    if name is not None:
        user.setdefault("experiment", {})["name"] = name
    exp_name = user.get("experiment", {}).get("name", cfg["experiment"]["name"])
    if exp_name not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown experiment {exp_name!r}; choose from {sorted(EXPERIMENT_DEFAULTS)}")
    defaults = copy.deepcopy(EXPERIMENT_DEFAULTS[exp_name])
    # experiment-specific shape defaults apply unless the user names a shape
    shape_defaults = defaults.get("experiment", {}).pop("shape", None)
    if shape_defaults:
        cfg["experiment"]["shape"].update(shape_defaults)
    _merge(cfg, user)
    _fill(cfg, defaults)
    if seed is not None:
        cfg["optimizer"]["seed"] = int(seed)
    if strict is not None:
        cfg["strict"] = bool(strict)
    if cfg["experiment"]["objective"] is None:
        cfg["experiment"]["objective"] = OBJECTIVES[exp_name]
    if cfg["baselines"]["sigma_ns"] is None:
        cfg["baselines"]["sigma_ns"] = cfg["experiment"]["T0_ns"] / 6.5
    if cfg["controls"]["free"] is None:
        cfg["controls"]["free"] = ["u"]
    validate(cfg)
    return cfg


def validate(cfg):
    m, g, e, c = cfg["model"], cfg["grid"], cfg["experiment"], cfg["controls"]
    if int(m["dim"]) != m["dim"] or m["dim"] < 2:
        raise ConfigError("model.dim must be an integer >= 2")
    for key in ("T_ns", "dt_ns"):
        if not isinstance(g[key], (int, float)) or g[key] <= 0:
            raise ConfigError(f"grid.{key} must be a positive number (ns)")
    n = g["T_ns"] / g["dt_ns"]
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError("grid.T_ns must be an integer multiple of grid.dt_ns")
    if e["shape"]["kind"] not in SHAPES:
        raise ConfigError(f"experiment.shape.kind must be one of {SHAPES}")
    if not e["shape"]["alpha_MHz"] > 0:
        raise ConfigError("experiment.shape.alpha_MHz must be positive")
    for key in ("bound_MHz", "gamma_max_MHz"):
        if not c[key] > 0:
            raise ConfigError(f"controls.{key} must be positive (MHz)")
    for key in ("gamma_min_MHz", "gamma_fixed_MHz", "gamma0_MHz"):
        if c[key] < 0:
            raise ConfigError(f"controls.{key} must be non-negative (MHz)")
    if c["gamma_min_MHz"] > c["gamma_max_MHz"]:
        raise ConfigError("controls.gamma_min_MHz exceeds controls.gamma_max_MHz")
    norm = abs(complex(e["c0"])) ** 2 + abs(complex(e["c1"])) ** 2
    if abs(norm - 1) > 1e-12:
        raise ConfigError("experiment.c0 and c1 must satisfy |c0|^2 + |c1|^2 = 1")
    if e["name"] == "prepare" and abs(e["T0_ns"] - g["T_ns"]) > 1e-12 and e["T0_ns"] > g["T_ns"]:
        raise ConfigError("experiment.T0_ns exceeds the grid horizon")
    if not cfg["optimizer"]["init_scale"] >= 0:
        raise ConfigError("optimizer.init_scale must be non-negative")
    if cfg["optimizer"]["gradient"] not in ("exact", "first_order"):
        raise ConfigError("optimizer.gradient must be 'exact' or 'first_order'")
    if e["psi_P"] not in range(int(m["dim"])):
        raise ConfigError("experiment.psi_P must be a basis-state index of the emitter")
    return cfg


def load(path, **kw):
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a mapping")
    return resolve(doc, **kw)
