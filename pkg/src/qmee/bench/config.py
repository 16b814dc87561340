"""Experiment configuration files.

Grammar
-------
A config is an INI file (parsed by :mod:`configparser`). Sections are flat
tables of ``key = value`` pairs; there is no nesting below a section.

``[experiment]`` holds the task-wide settings. Depending on the task, extra
sections carry per-group criterion parameters:

* ``linreg`` and ``surface``: ``[case 1]`` ... ``[case 4]`` with keys
  ``mcc_sigma``, ``mee_sigma``, ``qmee_sigma``, ``qmee_epsilon``.
* ``esn``: ``[alpha 0.1]`` ... with keys ``ridge``, ``mee_sigma``,
  ``qmee_sigma``, ``qmee_epsilon``.
* ``elm``: ``[relm]``, ``[mee]``, ``[qmee]`` (and ``[elm]``) with
  ``n_hidden``, ``lam``, ``sigma``, ``epsilon``.

List values are comma separated. Booleans accept true/false, yes/no, on/off
and 1/0; ``noise = false`` (linreg, surface, esn) removes the additive noise
entirely. Every key not given takes the default
below; unknown sections or keys are rejected. The fully resolved config is
what gets written into report headers.
"""

from __future__ import annotations

import configparser
import copy
import json
import os

TASKS = ("linreg", "elm", "esn", "timing", "surface")

_TABLE_I = {
    1: {"mcc_sigma": 10.0, "mee_sigma": 1.1, "qmee_sigma": 1.5, "qmee_epsilon": 0.3},
    2: {"mcc_sigma": 15.0, "mee_sigma": 1.1, "qmee_sigma": 1.5, "qmee_epsilon": 0.3},
    3: {"mcc_sigma": 8.0, "mee_sigma": 0.7, "qmee_sigma": 1.0, "qmee_epsilon": 0.3},
    4: {"mcc_sigma": 2.8, "mee_sigma": 0.6, "qmee_sigma": 4.0, "qmee_epsilon": 0.1},
}

_TABLE_VII = {
    0.1: {"ridge": 0.01, "mee_sigma": 0.06, "qmee_sigma": 0.8, "qmee_epsilon": 0.07},
    0.2: {"ridge": 0.01, "mee_sigma": 0.07, "qmee_sigma": 0.7, "qmee_epsilon": 0.01},
    0.3: {"ridge": 0.1, "mee_sigma": 0.08, "qmee_sigma": 0.7, "qmee_epsilon": 0.02},
    0.4: {"ridge": 0.1, "mee_sigma": 0.08, "qmee_sigma": 0.7, "qmee_epsilon": 0.03},
}


def _cases():
    return {f"case {k}": dict(v) for k, v in _TABLE_I.items()}


DEFAULTS = {
    "linreg": {
        "experiment": {
            "trials": 100, "n": 200, "seed": 0, "cases": [1, 2, 3, 4],
            "criteria": ["mse", "mcc", "mee", "qmee"], "max_iter": 100, "tol": 1e-8,
            "ridge": 0.0, "c": 0.1, "outlier_var": 10000.0, "omega": [2.0, 1.0],
            "noise": True, "workers": 1,
        },
        **_cases(),
    },
    "surface": {
        "experiment": {
            "trials": 1, "n": 200, "seed": 0, "case": 1,
            "criteria": ["mse", "mcc", "mee", "qmee"], "grid": 101,
            "w1_range": [0.0, 4.0], "w2_range": [-1.0, 3.0], "c": 0.1,
            "outlier_var": 10000.0, "omega": [2.0, 1.0], "noise": True,
        },
        **_cases(),
    },
    "timing": {
        "experiment": {
            "trials": 3, "n": [500, 1000, 2000, 4000, 8000], "seed": 0,
            "mode": "evaluate", "case": 4, "c": 0.0, "outlier_var": 10000.0,
            "mee_sigma": 1.0, "qmee_sigma": 1.0, "qmee_epsilon": 0.3, "max_iter": 10,
            "min_batch_time": 0.02,
        },
    },
    "esn": {
        "experiment": {
            "trials": 10, "n": 900, "test": 400, "seed": 0, "alphas": [0.1, 0.2, 0.3, 0.4],
            "criteria": ["ls", "ridge", "mee", "qmee"], "units": 400,
            "spectral_radius": 0.95, "sparsity": 0.01, "washout": 50, "c": 0.2, "noise": True,
            "eta": 0.001, "rho": 0.9, "r": 1e-6, "epochs": 1000, "batch": "full",
            "series_tau": 17.0, "workers": 1,
        },
        **{f"alpha {a}": dict(v) for a, v in _TABLE_VII.items()},
    },
    "elm": {
        "experiment": {
            "trials": 20, "n": 400, "seed": 0, "dataset": "", "target": "-1",
            "train_fraction": 0.7, "criteria": ["elm", "relm", "mee", "qmee"],
            "max_iter": 100, "tol": 1e-8, "c": 0.1, "outlier_var": 100.0,
            "workers": 1,
        },
        "elm": {"n_hidden": 30},
        "relm": {"n_hidden": 30, "lam": 1e-3},
        "mee": {"n_hidden": 30, "lam": 1e-3, "sigma": 0.5},
        "qmee": {"n_hidden": 30, "lam": 1e-3, "sigma": 0.5, "epsilon": 0.05},
    },
}

# sections a user may add beyond the defaults, keyed by prefix
_OPEN_SECTIONS = {
    "esn": ("alpha ", {"ridge": 0.0, "mee_sigma": 0.07, "qmee_sigma": 0.7, "qmee_epsilon": 0.01}),
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _parse_scalar(raw: str, like, where: str):
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(like).__name__}") from None
    return raw


def _parse_value(raw: str, like, where: str):
    if isinstance(like, list):
        item = like[0] if like else ""
        parts = [p for p in (s.strip() for s in raw.split(",")) if p]
        if not parts:
            raise ConfigError(f"{where}: empty list")
        return [_parse_scalar(p, item, where) for p in parts]
    return _parse_scalar(raw, like, where)


def default_config(task: str) -> dict:
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    return {"task": task, **copy.deepcopy(DEFAULTS[task])}


def load_config(task: str, path: str | None = None, overrides: dict | None = None) -> dict:
    """Defaults for ``task``, updated from the INI file at ``path`` and then
    from ``overrides`` (keys of the ``experiment`` section).
    """
    cfg = default_config(task)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}".replace("\n", " ")) from None
        for section in parser.sections():
            table = cfg.get(section)
            if table is None:
                prefix, template = _OPEN_SECTIONS.get(task, (None, None))
                if prefix is None or not section.startswith(prefix):
                    raise ConfigError(f"{path}: unknown section [{section}] for task {task}")
                table = cfg[section] = dict(template)
            for key, raw in parser.items(section):
                if section == "experiment" and key == "task":
                    if raw.strip() != task:
                        raise ConfigError(f"{path}: file is for task {raw.strip()!r}, not {task!r}")
                    continue
                if key not in table:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                table[key] = _parse_value(raw, table[key], f"{path} [{section}] {key}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        exp = cfg["experiment"]
        if key not in exp:
            raise ConfigError(f"option --{key} does not apply to task {task}")
        if isinstance(exp[key], list) and not isinstance(value, list):
            value = _parse_value(str(value), exp[key], f"--{key}")
        elif not isinstance(exp[key], list) and isinstance(value, str):
            value = _parse_value(value, exp[key], f"--{key}")
        exp[key] = value
    validate(cfg)
    return cfg


def _positive(exp, key):
    if not exp[key] >= 1:
        raise ConfigError(f"{key} must be at least 1, got {exp[key]}")


def validate(cfg: dict) -> None:
    task = cfg["task"]
    exp = cfg["experiment"]
    _positive(exp, "trials")
    if not 0 <= exp["seed"] < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {exp['seed']}")
    if exp.get("workers", 1) < 1:
        raise ConfigError("workers must be at least 1")
    ns = exp["n"] if isinstance(exp["n"], list) else [exp["n"]]
    if any(n < 2 for n in ns):
        raise ConfigError(f"sample counts must be at least 2, got {ns}")
    if task in ("linreg", "surface"):
        cases = exp["cases"] if task == "linreg" else [exp["case"]]
        for k in cases:
            if f"case {k}" not in cfg:
                raise ConfigError(f"noise case {k} has no parameter section; expected 1-4")
        bad = set(exp["criteria"]) - {"mse", "mcc", "mee", "qmee"}
        if bad:
            raise ConfigError(f"unknown criteria {sorted(bad)}")
        if len(exp["omega"]) != 2 and task == "surface":
            raise ConfigError("surface grids need a two-dimensional omega")
    if task == "timing":
        if ns != sorted(ns) or len(set(ns)) != len(ns):
            raise ConfigError(f"timing sizes must be strictly ascending, got {ns}")
        if exp["mode"] not in ("evaluate", "train"):
            raise ConfigError(f"timing mode must be 'evaluate' or 'train', got {exp['mode']!r}")
    if task == "esn":
        for a in exp["alphas"]:
            if f"alpha {a}" not in cfg:
                raise ConfigError(f"alpha {a} has no parameter section [alpha {a}]")
        bad = set(exp["criteria"]) - {"ls", "ridge", "mee", "qmee"}
        if bad:
            raise ConfigError(f"unknown criteria {sorted(bad)}")
        if exp["washout"] >= exp["n"]:
            raise ConfigError("washout must be shorter than the training segment")
    if task == "elm":
        bad = set(exp["criteria"]) - {"elm", "relm", "mee", "qmee"}
        if bad:
            raise ConfigError(f"unknown criteria {sorted(bad)}")
        if not 0.0 < exp["train_fraction"] < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")


def config_json(cfg: dict) -> str:
    """Canonical one-line JSON of a resolved config."""
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))
