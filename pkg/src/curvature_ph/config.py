#!/usr/bin/env python3
"""
Experiment configuration: flat `key = value` files, YAML or JSON.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple

import yaml

from .models import (
    BumpSpec,
    CurvatureModel,
    DirectionPath,
    HigherRankFamily,
    RootDatum,
    constant_curvature_model,
    higher_rank_model,
    non_anosov_scenario,
    rank_one_symmetric_model,
)
from .utils import format_float
from .validate import ConfigError, ParameterError

MODELS = ("constant", "rank_one", "higher_rank", "non_anosov")
TASKS = ("criterion", "gap", "lyapunov", "cones", "badset", "epsilon")

SEED_TASKS = ("criterion", "cones", "epsilon", "lyapunov", "badset")
C_TASKS = ("criterion", "cones", "epsilon", "badset")
R_TASKS = ("gap", "cones", "epsilon", "badset")

MODEL_REQUIRED = {
    "constant": ("a", "n"),
    "rank_one": ("a", "n", "r"),
    "higher_rank": ("roots",),
    "non_anosov": ("a", "n", "r", "bump.width", "period"),
}

DEFAULT_T = {"lyapunov": 50.0, "cones": 10.0}
DEFAULT_OUTPUT = "results"


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a curvature model."""

    name: str
    n: Optional[int] = None
    r: Optional[int] = None
    a: Optional[float] = None
    roots: Tuple[Tuple[float, ...], ...] = ()
    multiplicities: Tuple[int, ...] = ()
    path_start: Optional[Tuple[float, ...]] = None
    path_end: Optional[Tuple[float, ...]] = None
    s: float = 0.0
    bump_center: float = 0.0
    bump_width: Optional[float] = None
    bump_amplitude: Optional[float] = None
    period: Optional[float] = None
    on_gamma: bool = False

    def direction_path(self) -> DirectionPath:
        """Path from path.start to path.end, defaulting to the first two roots."""
        start = self.path_start or (self.roots[0] if self.roots else None)
        end = self.path_end or (self.roots[1] if len(self.roots) > 1 else None)
        if start is None or end is None:
            raise ParameterError("higher_rank model needs path.start and path.end (or two roots)")
        return DirectionPath(start, end)

    def family(self) -> HigherRankFamily:
        if self.name != "higher_rank":
            raise ParameterError(f"model '{self.name}' has no direction family")
        multiplicities = self.multiplicities or (1,) * len(self.roots)
        if len(multiplicities) != len(self.roots):
            raise ParameterError(
                f"{len(self.roots)} roots but {len(multiplicities)} multiplicities"
            )
        roots = [RootDatum(covector, mult) for covector, mult in zip(self.roots, multiplicities)]
        family = higher_rank_model(roots, len(self.roots[0]), self.direction_path())
        if self.n is not None and self.n != family.dim_n:
            raise ParameterError(f"n = {self.n} does not match the root data (dimension {family.dim_n})")
        return family

    def build(self) -> CurvatureModel:
        """
        Instantiate the model.

        Returns:
            CurvatureModel; for higher_rank, the constant model along X(s)

        Raises:
            ParameterError: On invalid model parameters
        """
        if self.name == "constant":
            return constant_curvature_model(self.a, self.n)
        if self.name == "rank_one":
            return rank_one_symmetric_model(self.a, self.n, self.r)
        if self.name == "non_anosov":
            bump = BumpSpec(self.bump_center, self.bump_width, self.bump_amplitude)
            return non_anosov_scenario(self.a, self.n, self.r, bump, self.period, self.on_gamma)
        if self.name == "higher_rank":
            return self.family().at(self.s)
        raise ParameterError(f"unknown model '{self.name}'")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    task: str
    c: Optional[float] = None
    T: Optional[float] = None
    step: float = 1e-3
    count: int = 1000
    seed: Optional[int] = None
    reorth_period: float = 0.5
    gap_threshold: Optional[float] = None
    dt: float = 0.01
    beta: Optional[float] = None
    blocks: int = 8
    grid: int = 1573
    output: str = DEFAULT_OUTPUT

    def to_dict(self) -> Dict[str, Any]:
        """Flat key -> value mapping with defaults applied (None omitted)."""
        return {key: value for key, value in _flat_items(self) if value is not None}


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_int(raw: str) -> int:
    value = float(raw)
    if not value.is_integer():
        raise ValueError(raw)
    return int(value)


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(raw)


def _parse_vector(raw: str) -> Tuple[float, ...]:
    parts = [p for p in raw.replace(",", " ").split()]
    if not parts:
        raise ValueError(raw)
    return tuple(float(p) for p in parts)


def _parse_roots(raw: str) -> Tuple[Tuple[float, ...], ...]:
    roots = tuple(_parse_vector(chunk) for chunk in raw.split(";") if chunk.strip())
    if not roots or len({len(root) for root in roots}) != 1:
        raise ValueError(raw)
    return roots


def _parse_ints(raw: str) -> Tuple[int, ...]:
    return tuple(_parse_int(p) for p in raw.replace(",", " ").split())


def _parse_str(raw: str) -> str:
    if not raw:
        raise ValueError(raw)
    return raw


def _format_vector(values: Iterable[float]) -> str:
    return ", ".join(format_float(v) for v in values)


# key -> (parser, formatter, owner, field name)
KEYS: Dict[str, Tuple[Callable[[str], Any], Callable[[Any], str], str, str]] = {
    "model": (_parse_str, str, "model", "name"),
    "n": (_parse_int, str, "model", "n"),
    "r": (_parse_int, str, "model", "r"),
    "a": (_parse_float, format_float, "model", "a"),
    "roots": (_parse_roots, lambda v: "; ".join(_format_vector(x) for x in v), "model", "roots"),
    "multiplicities": (_parse_ints, lambda v: ", ".join(str(x) for x in v), "model", "multiplicities"),
    "path.start": (_parse_vector, _format_vector, "model", "path_start"),
    "path.end": (_parse_vector, _format_vector, "model", "path_end"),
    "s": (_parse_float, format_float, "model", "s"),
    "bump.center": (_parse_float, format_float, "model", "bump_center"),
    "bump.width": (_parse_float, format_float, "model", "bump_width"),
    "bump.amplitude": (_parse_float, format_float, "model", "bump_amplitude"),
    "period": (_parse_float, format_float, "model", "period"),
    "on_gamma": (_parse_bool, lambda v: "true" if v else "false", "model", "on_gamma"),
    "task": (_parse_str, str, "experiment", "task"),
    "c": (_parse_float, format_float, "experiment", "c"),
    "T": (_parse_float, format_float, "experiment", "T"),
    "step": (_parse_float, format_float, "experiment", "step"),
    "count": (_parse_int, str, "experiment", "count"),
    "seed": (_parse_int, str, "experiment", "seed"),
    "reorth_period": (_parse_float, format_float, "experiment", "reorth_period"),
    "gap_threshold": (_parse_float, format_float, "experiment", "gap_threshold"),
    "dt": (_parse_float, format_float, "experiment", "dt"),
    "beta": (_parse_float, format_float, "experiment", "beta"),
    "blocks": (_parse_int, str, "experiment", "blocks"),
    "grid": (_parse_int, str, "experiment", "grid"),
    "output": (_parse_str, str, "experiment", "output"),
}

POSITIVE_KEYS = ("a", "c", "T", "step", "reorth_period", "gap_threshold", "dt", "beta",
                 "bump.width", "period")
COUNT_KEYS = ("count", "blocks", "grid")


def _flat_items(config: ExperimentConfig) -> List[Tuple[str, Any]]:
    items = []
    for key, (_, _, owner, name) in KEYS.items():
        source = config.model if owner == "model" else config
        value = getattr(source, name)
        if value == () and name in ("roots", "multiplicities"):
            value = None
        items.append((key, value))
    return items


def _read_pairs(text: str) -> List[Tuple[Optional[int], str, str]]:
    pairs = []
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got '{content}'", line=number)
        key, raw = (part.strip() for part in content.split("=", 1))
        pairs.append((number, key, raw))
    return pairs


def _build(pairs: Iterable[Tuple[Optional[int], str, str]], overrides: Optional[Mapping[str, Any]]) -> ExperimentConfig:
    values: Dict[str, Any] = {}
    lines: Dict[str, Optional[int]] = {}

    def store(line, key, raw):
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'", line=line, key=key)
        parser = KEYS[key][0]
        try:
            values[key] = parser(str(raw).strip())
        except ValueError:
            raise ConfigError(f"malformed value for '{key}': '{raw}'", line=line, key=key)
        lines[key] = line

    for line, key, raw in pairs:
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", line=line, key=key)
        store(line, key, raw)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            store(None, key, raw)

    for key in ("model", "task"):
        if key not in values:
            raise ConfigError(f"missing mandatory key '{key}'", key=key)
    if values["model"] not in MODELS:
        raise ConfigError(f"unknown model '{values['model']}'", line=lines["model"], key="model")
    task = values["task"]
    if task not in TASKS:
        raise ConfigError(f"unknown task '{task}'", line=lines["task"], key="task")

    for key in MODEL_REQUIRED[values["model"]]:
        if key not in values:
            raise ConfigError(f"missing mandatory key '{key}' for model '{values['model']}'", key=key)
    mandatory = [key for key, tasks in (("seed", SEED_TASKS), ("c", C_TASKS)) if task in tasks]
    if task in R_TASKS:
        mandatory.append("r")
    for key in mandatory:
        if key not in values:
            raise ConfigError(f"missing mandatory key '{key}' for task '{task}'", key=key)

    for key in POSITIVE_KEYS:
        if key in values and not values[key] > 0:
            raise ConfigError(f"{key} must be positive", line=lines[key], key=key)
    for key in COUNT_KEYS:
        if key in values and values[key] < 1:
            raise ConfigError(f"{key} must be at least 1", line=lines[key], key=key)
    if "seed" in values and values["seed"] < 0:
        raise ConfigError("seed must be non-negative", line=lines["seed"], key="seed")

    if "T" not in values:
        if task == "badset":
            values["T"] = values.get("period", 10.0)
        elif task in DEFAULT_T:
            values["T"] = DEFAULT_T[task]

    model_fields = {}
    experiment_fields = {}
    for key, value in values.items():
        _, _, owner, name = KEYS[key]
        (model_fields if owner == "model" else experiment_fields)[name] = value
    return ExperimentConfig(model=ModelSpec(**model_fields), **experiment_fields)


def parse_config(text: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Parse a flat `key = value` configuration.

    Args:
        text: Config text; `#` starts a comment
        overrides: Values replacing or adding keys (e.g. seed from the command line)

    Returns:
        ExperimentConfig with defaults applied

    Raises:
        ConfigError: On unknown keys, malformed values, missing mandatory keys
            or unknown model/task, with the offending line when there is one
    """
    return _build(_read_pairs(text), overrides)


def _flatten(mapping: Mapping[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    items = []
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            items.extend(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            if value and all(isinstance(v, (list, tuple)) for v in value):
                items.append((name, "; ".join(", ".join(str(x) for x in v) for v in value)))
            else:
                items.append((name, ", ".join(str(x) for x in value)))
        elif isinstance(value, bool):
            items.append((name, "true" if value else "false"))
        else:
            items.append((name, "" if value is None else str(value)))
    return items


def load_config(path: Path, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Load a configuration file, dispatching on its suffix.

    .yaml/.yml files are read as YAML, .json as JSON; nested mappings give
    dotted keys (bump: {width: 1} is bump.width). Anything else is the flat
    `key = value` format.

    Raises:
        ConfigError: If the file is missing, malformed or invalid
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    suffix = path.suffix.lower()
    text = path.read_text(encoding="utf-8")

    if suffix not in (".yaml", ".yml", ".json"):
        return parse_config(text, overrides)

    try:
        data = yaml.safe_load(text) if suffix in (".yaml", ".yml") else json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Invalid {suffix[1:].upper()} in config: {e}")
    if not isinstance(data, Mapping):
        raise ConfigError("Config must be a mapping of keys to values")
    return _build([(None, key, raw) for key, raw in _flatten(data)], overrides)


def serialize_config(config: ExperimentConfig) -> str:
    """Flat text form; parse_config(serialize_config(c)) == c."""
    lines = []
    for key, value in _flat_items(config):
        if value is None:
            continue
        formatter = KEYS[key][1]
        lines.append(f"{key} = {formatter(value)}")
    return "\n".join(lines) + "\n"
