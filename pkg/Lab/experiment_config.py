"""
JSON experiment configs for the CLI.

A config names its subcommand, global settings (seed, output, format,
tolerances) and one section of experiment settings. Unknown fields are
rejected; every error carries the dotted path of the offending field.
"""

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import config

SUBCOMMANDS = ("chain", "lattice", "segal", "zeta", "pphi2")
FORMATS = ("json", "csv")


class ConfigValidationError(ValueError):
    """Raised for malformed or invalid experiment configs."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# -- field checkers -----------------------------------------------------------


def _number(minimum: Optional[float] = None, positive: bool = False) -> Callable[[Any, str], float]:
    def check(value: Any, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigValidationError(path, f"expected a finite number, got {value!r}")
        if positive and not value > 0:
            raise ConfigValidationError(path, f"must be positive, got {value}")
        if minimum is not None and value < minimum:
            raise ConfigValidationError(path, f"must be >= {minimum}, got {value}")
        return float(value)

    return check


def _integer(minimum: Optional[int] = None) -> Callable[[Any, str], int]:
    def check(value: Any, path: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigValidationError(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigValidationError(path, f"must be >= {minimum}, got {value}")
        return value

    return check


def _choice(*options: str) -> Callable[[Any, str], str]:
    def check(value: Any, path: str) -> str:
        if value not in options:
            raise ConfigValidationError(path, f"must be one of {', '.join(options)}, got {value!r}")
        return value

    return check


def _list_of(item: Callable[[Any, str], Any], min_length: int = 0) -> Callable[[Any, str], list]:
    def check(value: Any, path: str) -> list:
        if not isinstance(value, list):
            raise ConfigValidationError(path, f"expected a list, got {type(value).__name__}")
        if len(value) < min_length:
            raise ConfigValidationError(path, f"needs at least {min_length} entries")
        return [item(v, f"{path}[{i}]") for i, v in enumerate(value)]

    return check


def _optional(inner: Callable[[Any, str], Any]) -> Callable[[Any, str], Any]:
    def check(value: Any, path: str) -> Any:
        return None if value is None else inner(value, path)

    return check


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigValidationError(path, f"expected a non-empty string, got {value!r}")
    return value


def _edge(value: Any, path: str) -> list:
    if not isinstance(value, list) or len(value) not in (2, 3):
        raise ConfigValidationError(path, "edge must be [i, j] or [i, j, weight]")
    i, j = _integer(0)(value[0], f"{path}[0]"), _integer(0)(value[1], f"{path}[1]")
    weight = _number(positive=True)(value[2], f"{path}[2]") if len(value) == 3 else 1.0
    return [i, j, weight]


@dataclass(frozen=True)
class Section:
    """Allowed fields of one JSON object with their checkers and defaults."""

    fields: Dict[str, Callable[[Any, str], Any]]
    defaults: Dict[str, Any]

    def validate(self, value: Any, path: str) -> dict:
        if not isinstance(value, dict):
            raise ConfigValidationError(path, f"expected an object, got {type(value).__name__}")
        for key in sorted(value):
            if key not in self.fields:
                raise ConfigValidationError(_join(path, key), "unknown field")
        resolved = {}
        for key, check in self.fields.items():
            raw = value.get(key, copy.deepcopy(self.defaults.get(key)))
            resolved[key] = check(raw, _join(path, key))
        return resolved


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _nested(section: Section) -> Callable[[Any, str], dict]:
    return section.validate


GRAPH = Section(
    fields={
        "type": _choice("torus", "cycle", "double", "explicit"),
        "n1": _integer(1),
        "n2": _integer(1),
        "n": _integer(1),
        "half_columns": _integer(1),
        "rows": _integer(1),
        "n_vertices": _integer(1),
        "edges": _list_of(_edge),
        "measure": _number(positive=True),
        "spacing": _number(positive=True),
    },
    defaults={
        "type": "torus", "n1": 16, "n2": 16, "n": 16, "half_columns": 4, "rows": 8,
        "n_vertices": 1, "edges": [], "measure": 1.0, "spacing": 1.0,
    },
)

SECTIONS: Dict[str, Section] = {
    "chain": Section(
        fields={
            "polynomial": _list_of(_number(), 1),
            "benchmark_mass": _optional(_number(positive=True)),
            "order": _integer(2),
            "n_list": _list_of(_integer(1), 1),
            "trace_n": _integer(1),
            "k_max": _integer(1),
        },
        defaults={
            "polynomial": [0.0, 0.0, 2.0], "benchmark_mass": None, "order": config.CHAIN_ORDER,
            "n_list": [1, 2, 4, 8, 16, 32, 64], "trace_n": 8, "k_max": config.MIXING_K_MAX,
        },
    ),
    "lattice": Section(
        fields={
            "graph": _nested(GRAPH),
            "mass": _number(positive=True),
            "sigma": _optional(_list_of(_integer(0), 1)),
            "s1": _optional(_list_of(_integer(0), 1)),
            "s2": _optional(_list_of(_integer(0), 1)),
            "bayes_points": _integer(1),
            "quad_perturb_size": _integer(1),
            "mc_samples": _integer(2),
            "double": _nested(GRAPH),
            "tadpole_spacings": _list_of(_number(positive=True), 2),
        },
        defaults={
            "graph": {}, "mass": 1.0, "sigma": None, "s1": None, "s2": None,
            "bayes_points": config.BAYES_POINTS, "quad_perturb_size": 8, "mc_samples": 200_000,
            "double": {"type": "double", "half_columns": 4, "rows": 8},
            "tadpole_spacings": list(config.TADPOLE_SPACINGS),
        },
    ),
    "pphi2": Section(
        fields={
            "graph": _nested(GRAPH),
            "mass": _number(positive=True),
            "polynomial": _list_of(_number(), 1),
            "wick_variance": _optional(_number(minimum=0.0)),
            "samples": _integer(2),
            "sigma": _optional(_list_of(_integer(0), 1)),
            "eps_list": _list_of(_number(positive=True), 1),
            "mollifier_samples": _integer(2),
            "wick_samples": _integer(2),
        },
        defaults={
            "graph": {"type": "torus", "n1": 6, "n2": 6}, "mass": 1.0,
            "polynomial": [0.0, 0.0, 0.0, 0.0, 0.1], "wick_variance": None,
            "samples": config.PARTITION_SAMPLES, "sigma": None, "eps_list": [1.0, 2.0],
            "mollifier_samples": config.MOLLIFIER_SAMPLES, "wick_samples": 200_000,
        },
    ),
    "segal": Section(
        fields={
            "n_transverse": _integer(1),
            "n_layers": _integer(0),
            "spacing": _number(positive=True),
            "mass": _number(positive=True),
            "polynomial": _optional(_list_of(_number(), 1)),
            "order": _optional(_integer(2)),
            "trace_n": _integer(1),
            "samples": _integer(2),
            "k_max": _integer(1),
            "amplitude_points": _integer(1),
        },
        defaults={
            "n_transverse": 2, "n_layers": 1, "spacing": 1.0, "mass": 1.0, "polynomial": None,
            "order": None, "trace_n": 4, "samples": config.PARTITION_SAMPLES, "k_max": 20,
            "amplitude_points": config.AMPLITUDE_POINTS,
        },
    ),
    "zeta": Section(
        fields={
            "mass": _number(positive=True),
            "circumference": _number(positive=True),
            "height": _number(positive=True),
            "t_split": _number(positive=True),
        },
        defaults={"mass": 1.0, "circumference": 2.0 * math.pi, "height": 1.0, "t_split": config.ZETA_T_SPLIT},
    ),
}


def _tolerances(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigValidationError(path, f"expected an object, got {type(value).__name__}")
    resolved = dict(config.TOLERANCES)
    for key in sorted(value):
        if key not in config.TOLERANCES:
            raise ConfigValidationError(_join(path, key), "unknown tolerance")
        resolved[key] = _number(positive=True)(value[key], _join(path, key))
    return resolved


def parse_json(text: str, source: str = "<config>") -> dict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(source, f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(document, dict):
        raise ConfigValidationError(source, "config must be a JSON object")
    return document


def validate(document: dict, subcommand: Optional[str] = None) -> dict:
    """Resolve defaults and check every field; returns a new dict."""
    if not isinstance(document, dict):
        raise ConfigValidationError("", "config must be a JSON object")
    name = document.get("subcommand", subcommand)
    if name is None:
        raise ConfigValidationError("subcommand", "missing")
    _choice(*SUBCOMMANDS)(name, "subcommand")
    if subcommand is not None and name != subcommand:
        raise ConfigValidationError("subcommand", f"config is for {name!r}, command line asked for {subcommand!r}")
    allowed = {"subcommand", "seed", "output", "format", "tolerances", name}
    for key in sorted(document):
        if key not in allowed:
            raise ConfigValidationError(key, "unknown field")
    return {
        "subcommand": name,
        "seed": _integer(0)(document.get("seed", config.DEFAULT_SEED), "seed"),
        "output": _optional(_string)(document.get("output"), "output"),
        "format": _choice(*FORMATS)(document.get("format", "json"), "format"),
        "tolerances": _tolerances(document.get("tolerances", {}), "tolerances"),
        name: SECTIONS[name].validate(document.get(name, {}), name),
    }


def load_experiment_config(
    subcommand: str,
    path: Optional[str] = None,
    preset: Optional[str] = None,
    overrides: Optional[dict] = None,
) -> dict:
    """Preset, then config file, then command-line overrides (seed, output, format)."""
    document: dict = {"subcommand": subcommand}
    if preset is not None:
        if preset not in config.PRESETS:
            raise ConfigValidationError("preset", f"unknown preset {preset!r}")
        document = copy.deepcopy(config.PRESETS[preset])
    if path is not None:
        file = Path(path)
        if not file.is_file():
            raise ConfigValidationError(str(path), "config file not found")
        loaded = parse_json(file.read_text(), str(path))
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(document.get(key), dict):
                document[key] = {**document[key], **value}
            else:
                document[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            document[key] = value
    return validate(document, subcommand)
