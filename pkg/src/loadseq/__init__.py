"""loadseq: hybrid long-term feeder peak load forecasting with LSTM/GRU sequence models."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ArtifactError,
    ConfigError,
    ConsistencyError,
    DomainError,
    FitError,
    LoadSeqError,
    NumericError,
    SearchError,
    ShapeError,
    TrainingError,
)
from .model import ACTIVATION, CELL, FNN_VARIANT, MODE, OPTIMIZER, SEARCH, SEASON
from .featlab import (
    FeederYearRecord,
    NormalizationStats,
    PcaTransform,
    RegionalYearRecord,
    TransferEvent,
    apply_normalizer,
    build_virtual_feeder,
    fit_normalizer,
    fit_pca,
    invert_normalizer,
    load_composition,
    project_pca,
    proportion_variance_explained,
    resolve_virtual_feeders,
    select_component_count,
)
from .cells import CellState, GruCellParams, LstmCellParams, gru_step, lstm_step
from .seqnet import (
    NetworkParams,
    compute_gradients,
    forward_batch,
    forward_sequence,
    init_network,
    parameter_count,
    sequence_loss,
)
from .training import TrainHyperparams, train
from .seqdata import (
    FeatureSchema,
    SequenceSample,
    build_sequence_samples,
    chain_forecast,
    flatten_sample,
    normalize_temperature_scenario,
    retro_normalize_history,
    split_dataset,
)
from .pipeline import FeaturePipeline, fit_pipeline
from .baselines import bottom_up_forecast, fit_ar, fit_ar2, forecast_ar, forecast_ar2
from .evalkit import EvalReport, build_report, compare_reports, cumulative_within, error_histogram, mape
from .tuner import SearchSpace, grid_search, random_search
from .synthgrid import SynthConfig, generate_synthetic_grid, inject_load_transfers, synthesize
from .config import RunConfig, load_run_config

__all__ = [
    "__version__",
    "LoadSeqError", "ShapeError", "DomainError", "ConsistencyError", "ConfigError", "ArtifactError",
    "FitError", "SearchError", "NumericError", "TrainingError",
    "ACTIVATION", "CELL", "FNN_VARIANT", "MODE", "OPTIMIZER", "SEARCH", "SEASON",
    "FeederYearRecord", "RegionalYearRecord", "TransferEvent", "NormalizationStats", "PcaTransform",
    "load_composition", "build_virtual_feeder", "resolve_virtual_feeders",
    "fit_normalizer", "apply_normalizer", "invert_normalizer",
    "fit_pca", "proportion_variance_explained", "select_component_count", "project_pca",
    "CellState", "LstmCellParams", "GruCellParams", "lstm_step", "gru_step",
    "NetworkParams", "init_network", "forward_batch", "forward_sequence", "sequence_loss",
    "compute_gradients", "parameter_count", "TrainHyperparams", "train",
    "FeatureSchema", "SequenceSample", "build_sequence_samples", "split_dataset", "flatten_sample",
    "normalize_temperature_scenario", "retro_normalize_history", "chain_forecast",
    "FeaturePipeline", "fit_pipeline",
    "bottom_up_forecast", "fit_ar", "fit_ar2", "forecast_ar", "forecast_ar2",
    "EvalReport", "mape", "cumulative_within", "error_histogram", "build_report", "compare_reports",
    "SearchSpace", "grid_search", "random_search",
    "SynthConfig", "generate_synthetic_grid", "inject_load_transfers", "synthesize",
    "RunConfig", "load_run_config",
]
