"""Flat key/value settings shared by config files and CLI flags.

Config file grammar (read with :mod:`configparser`)::

    [experiment]
    # comments start with '#' or ';'
    features = items.csv
    K = 2, 3                 # lists are comma separated
    T = 100, 200, 300
    trials = 50
    constrain_unit_ball = true

Only the ``[experiment]`` section is read. Keys are the names in
:data:`SETTINGS`; command-line flags with the same names override file values.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from ..errors import ParseError, ValidationError
from ..plackett_luce import MleConfig
from ..solver import SolverConfig
from .experiment import ExperimentConfig


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(",", " ").split())


def _strs(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(x for x in str(text).replace(",", " ").split())


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "all"):
        return None
    return int(text)


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _opt_str(text):
    if text is None or str(text).strip() == "":
        return None
    return str(text)


# key -> (converter, target); target is "experiment", "solver" or "mle"
SETTINGS = {
    "features": (_opt_str, "experiment", "features_path"),
    "K": (_ints, "experiment", "K"),
    "T": (_ints, "experiment", "T"),
    "trials": (int, "experiment", "trials"),
    "policies": (_strs, "experiment", "policies"),
    "selection": (str, "experiment", "selection"),
    "seed": (int, "experiment", "seed"),
    "theta_star": (_opt_str, "experiment", "theta_star_path"),
    "normalize": (_bool, "experiment", "normalize"),
    "list_column": (_opt_str, "experiment", "list_column"),
    "workers": (int, "experiment", "workers"),
    "ndcg_k": (_opt_int, "experiment", "ndcg_k"),
    "gain": (str, "experiment", "gain"),
    "temperature": (float, "experiment", "temperature"),
    "R": (int, "solver", "R"),
    "T_od": (int, "solver", "T_od"),
    "gamma": (float, "solver", "gamma"),
    "alpha_tol": (float, "solver", "alpha_tol"),
    "lmo_mode": (str, "solver", "lmo_mode"),
    "solver_seed": (int, "solver", "seed"),
    "inverse_refresh_period": (int, "solver", "inverse_refresh_period"),
    "refresh_gamma": (_bool, "solver", "refresh_gamma"),
    "stop_gap": (_opt_float, "solver", "stop_gap"),
    "max_iterations": (int, "mle", "max_iterations"),
    "stepsize_min": (float, "mle", "stepsize_min"),
    "stepsize_max": (float, "mle", "stepsize_max"),
    "initial_stepsize": (float, "mle", "initial_stepsize"),
    "gradient_tolerance": (float, "mle", "gradient_tolerance"),
    "constrain_unit_ball": (_bool, "mle", "constrain_unit_ball"),
    "likelihood_mode": (str, "mle", "likelihood_mode"),
}


def read_config_file(path) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (K vs k)
    try:
        with Path(path).open() as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not parser.has_section("experiment"):
        raise ParseError(f"{path}: missing [experiment] section")
    values = dict(parser.items("experiment"))
    unknown = set(values) - set(SETTINGS)
    if unknown:
        raise ParseError(f"{path}: unknown keys {sorted(unknown)}")
    return values


def build_config(values: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from raw (string or typed) settings."""
    parts = {"experiment": {}, "solver": {}, "mle": {}}
    for key, raw in values.items():
        if key not in SETTINGS:
            raise ValidationError(f"unknown setting {key!r}")
        convert, target, name = SETTINGS[key]
        try:
            parts[target][name] = convert(raw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {key}: {exc}") from None
    return ExperimentConfig(
        solver=SolverConfig(**parts["solver"]),
        mle=MleConfig(**parts["mle"]),
        **parts["experiment"],
    )
