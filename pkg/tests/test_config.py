import pytest
import yaml

from loadseq.config import (
    ModelSettings,
    RunConfig,
    SearchSettings,
    config_from_dict,
    config_to_dict,
    dump_run_config,
    load_run_config,
)
from loadseq.errors import ConfigError
from loadseq.model import CELL, MODE, OPTIMIZER, SEARCH, SEASON


def test_defaults():
    config = config_from_dict(None)

    assert config == RunConfig()
    assert config.model.cell is CELL.LSTM
    assert config.train.optimizer is OPTIMIZER.ADAM
    assert config.split_ratio == 0.8
    assert config.schema.pve_threshold == 0.95


def test_yaml_document_is_coerced_into_dataclasses(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "season: winter\n"
        "model: {cell: gru, mode: many-to-many, hidden: 8, dense_widths: [8, 4]}\n"
        "train: {epochs: 50, learning_rate: 1, clip_norm: 5}\n"
        "search: {strategy: random, neurons: [5, 10], cells: [lstm]}\n"
        "schema: {econ_columns: [gdp_growth, net_migration], n_components: 1}\n"
    )

    config = load_run_config(path)

    assert config.season is SEASON.WINTER
    assert config.model == ModelSettings(cell=CELL.GRU, mode=MODE.MANY_TO_MANY, hidden=8, dense_widths=(8, 4))
    assert config.train.learning_rate == 1.0 and isinstance(config.train.learning_rate, float)
    assert config.train.clip_norm == 5.0
    assert config.search.strategy is SEARCH.RANDOM
    assert config.search.space() == {"layers": (1, 2, 3), "neurons": (5, 10), "cell": (CELL.LSTM,)}
    assert config.schema.econ_columns == ("gdp_growth", "net_migration")


def test_unknown_keys_are_rejected_with_a_tip():
    with pytest.raises(ConfigError, match=r"(?s)config.model: unknown key\(s\) \[.layers.\].*Tip"):
        config_from_dict({"model": {"layers": 3}})
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"epochs": 3})


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError, match="config.train"):
        config_from_dict({"train": {"batch_size": 0}})
    with pytest.raises(ConfigError, match="expected a list"):
        config_from_dict({"model": {"dense_widths": 6}})
    with pytest.raises(ConfigError, match="split_ratio"):
        config_from_dict({"split_ratio": 1.5})
    with pytest.raises(ConfigError, match="search.validation"):
        SearchSettings(validation="holdout")


def test_bad_yaml_and_non_mapping(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed\n")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")

    with pytest.raises(ConfigError, match="not valid YAML"):
        load_run_config(bad)
    with pytest.raises(ConfigError, match="top level must be a mapping"):
        load_run_config(listing)


def test_dotted_overrides():
    config = RunConfig().with_overrides({
        "train.epochs": 5, "model.mode": "many-to-many", "season": "winter", "horizon": None,
    })

    assert config.train.epochs == 5
    assert config.model.mode is MODE.MANY_TO_MANY
    assert config.season is SEASON.WINTER
    assert config.horizon == RunConfig().horizon
    with pytest.raises(ConfigError, match="unknown setting 'epoch'"):
        RunConfig().with_overrides({"train.epoch": 5})
    with pytest.raises(ConfigError, match="batch_size"):
        RunConfig().with_overrides({"train.batch_size": 0})


def test_dump_round_trips_through_yaml():
    config = RunConfig().with_overrides({"model.cell": "gru", "search.cells": ["lstm", "gru"]})

    data = yaml.safe_load(dump_run_config(config))

    assert data["model"]["cell"] == "gru"
    assert data == config_to_dict(config)
    assert config_from_dict(data) == config
