"""Run configuration: a YAML document whose keys mirror :class:`RunConfig`.

Example::

    season: winter
    inputs:
      feeder_years: data/feeder_years.csv
      regional_years: data/regional_years.csv
      transfer_log: data/transfer_log.csv
    schema:
      econ_columns: [gdp_growth, employment_growth, population_growth, net_migration]
      pve_threshold: 0.95
    model: {cell: gru, mode: many_to_many, hidden: 6, dense_widths: [6]}
    train: {epochs: 200, batch_size: 10, seed: 7}

Missing keys take the dataclass defaults; unknown keys are rejected.
"""
from __future__ import annotations

import enum
import types
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from .errors import ConfigError, LoadSeqError
from .model import CELL, MODE, SEARCH, SEASON
from .seqdata import FeatureSchema
from .synthgrid import SynthConfig
from .training import TrainHyperparams


@dataclass(frozen=True)
class InputPaths:
    feeder_years: Optional[str] = None
    regional_years: Optional[str] = None
    transfer_log: Optional[str] = None
    regional_forecasts: Optional[str] = None


@dataclass(frozen=True)
class ModelSettings:
    cell: CELL = CELL.LSTM
    mode: MODE = MODE.MANY_TO_ONE
    n_steps: int = 3
    hidden: int = 6
    dense_widths: Tuple[int, ...] = (6,)
    output_bias: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell", CELL(self.cell))
        object.__setattr__(self, "mode", MODE.parse(self.mode))
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))
        if self.n_steps < 1 or self.hidden < 1 or any(w < 1 for w in self.dense_widths):
            raise ConfigError("n_steps, hidden and dense widths must be positive")


@dataclass(frozen=True)
class SearchSettings:
    strategy: SEARCH = SEARCH.GRID
    layers: Tuple[int, ...] = (1, 2, 3)
    neurons: Tuple[int, ...] = (10, 15, 20)
    learning_rates: Tuple[float, ...] = ()
    cells: Tuple[CELL, ...] = ()
    modes: Tuple[MODE, ...] = ()
    n_trials: int = 9
    workers: int = 1
    validation: str = "test"
    inner_ratio: float = 0.8

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", SEARCH(self.strategy))
        object.__setattr__(self, "cells", tuple(CELL(c) for c in self.cells))
        object.__setattr__(self, "modes", tuple(MODE.parse(m) for m in self.modes))
        if self.validation not in ("test", "inner"):
            raise ConfigError(f"search.validation must be 'test' or 'inner', got {self.validation!r}")
        if self.n_trials < 1 or self.workers < 1:
            raise ConfigError("search.n_trials and search.workers must be >= 1")

    def space(self) -> Dict[str, Tuple[Any, ...]]:
        params: Dict[str, Tuple[Any, ...]] = {"layers": self.layers, "neurons": self.neurons}
        if self.learning_rates:
            params["learning_rate"] = self.learning_rates
        if self.cells:
            params["cell"] = self.cells
        if self.modes:
            params["mode"] = self.modes
        return params


@dataclass(frozen=True)
class RunConfig:
    season: SEASON = SEASON.SUMMER
    out_dir: str = "out"
    inputs: InputPaths = field(default_factory=InputPaths)
    schema: FeatureSchema = field(default_factory=FeatureSchema)
    model: ModelSettings = field(default_factory=ModelSettings)
    train: TrainHyperparams = field(default_factory=TrainHyperparams)
    search: SearchSettings = field(default_factory=SearchSettings)
    synth: SynthConfig = field(default_factory=SynthConfig)
    split_ratio: float = 0.8
    split_seed: int = 0
    virtual_feeders: bool = True
    bin_width: float = 2.0
    threshold: float = 10.0
    ar_order: int = 2
    temp_margin: float = 1.0
    horizon: int = 3
    event_margin: float = 0.0
    timing: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "season", SEASON(self.season))
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Apply dotted-path overrides (``"train.epochs": 50``); None values are skipped."""
        config = self
        for path, value in overrides.items():
            if value is None:
                continue
            config = _set_path(config, path.split("."), value)
        return config


def _coerce(tp: Any, value: Any, where: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or origin is types.UnionType:
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where) if len(inner) == 1 else value
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        item = args[0] if args else Any
        return tuple(_coerce(item, v, where) for v in value)
    if isinstance(tp, type) and is_dataclass(tp):
        if not isinstance(value, Mapping):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
        return _build(tp, value, where)
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        if tp is MODE:
            return MODE.parse(value)
        return tp(value)
    if tp is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if tp is int and isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _build(cls: type, data: Mapping[str, Any], where: str = "config") -> Any:
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(
            f"{where}: unknown key(s) {unknown}.\n  Tip: valid keys are {sorted(known)}"
        )
    try:
        kwargs = {name: _coerce(hints[name], value, f"{where}.{name}") for name, value in data.items()}
        return cls(**kwargs)
    except (TypeError, ValueError, LoadSeqError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def _set_path(obj: Any, path: list, value: Any) -> Any:
    name = path[0]
    valid = {f.name for f in fields(obj)}
    if name not in valid:
        raise ConfigError(f"unknown setting {name!r} on {type(obj).__name__}; expected one of {sorted(valid)}")
    if len(path) > 1:
        return replace(obj, **{name: _set_path(getattr(obj, name), path[1:], value)})
    hint = typing.get_type_hints(type(obj))[name]
    try:
        return replace(obj, **{name: _coerce(hint, value, name)})
    except (TypeError, ValueError, LoadSeqError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: {exc}") from exc


def config_from_dict(data: Optional[Mapping[str, Any]]) -> RunConfig:
    return _build(RunConfig, data or {})


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def config_to_dict(config: Any) -> Any:
    """Plain-data view (enums as values, tuples as lists) for manifests and YAML dumps."""
    if is_dataclass(config):
        return {f.name: config_to_dict(getattr(config, f.name)) for f in fields(config)}
    if isinstance(config, enum.Enum):
        return config.value
    if isinstance(config, (list, tuple)):
        return [config_to_dict(v) for v in config]
    return config


def dump_run_config(config: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=True)
