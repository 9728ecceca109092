"""Named record-level forecasters: every model the evaluation and comparison commands can score.

Each forecaster is fitted on raw training samples and predicts the final-year
peak (amperes) of each raw sample it is given.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence

import numpy as np

from .baselines import (
    FnnModel,
    bottom_up_forecast,
    fit_ar,
    fnn_forward_batch,
    fnn_inputs,
    fnn_rows,
    fnn_train,
    forecast_ar,
    init_fnn,
)
from .config import ModelSettings
from .debug import log
from .errors import ConfigError, DomainError
from .model import CELL, FNN_VARIANT
from .pipeline import FeaturePipeline
from .seqdata import SequenceSample, with_config
from .seqnet import NetworkParams, forward_batch, init_network
from .training import TrainHyperparams, train


@dataclass(frozen=True)
class ForecastContext:
    pipeline: FeaturePipeline
    hyper: TrainHyperparams = field(default_factory=TrainHyperparams)
    settings: ModelSettings = field(default_factory=ModelSettings)
    peaks: Mapping[str, Mapping[int, float]] = field(default_factory=dict)
    ar_order: int = 2


class Forecaster(Protocol):
    name: str
    def fit(self, train_set: Sequence[SequenceSample], ctx: ForecastContext) -> None: ...
    def predict(self, samples: Sequence[SequenceSample], ctx: ForecastContext) -> np.ndarray: ...


_FORECASTERS: Dict[str, Callable[[], Forecaster]] = {}


def register_forecaster(name: str, factory: Callable[[], Forecaster]) -> None:
    _FORECASTERS[name] = factory


def get_forecaster(name: str) -> Forecaster:
    try:
        return _FORECASTERS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown model {name!r}.\n  Tip: choose one of {available_forecasters()}"
        ) from None


def available_forecasters() -> List[str]:
    return sorted(_FORECASTERS)


def sequence_predictions(net: NetworkParams, pipeline: FeaturePipeline,
                         samples: Sequence[SequenceSample]) -> np.ndarray:
    """Final-year peak in amperes for each raw sample."""
    if not samples:
        return np.zeros(0)
    X = np.stack([pipeline.transform_steps(s.steps) for s in samples])
    out = forward_batch(net, X)[:, -1]
    return pipeline.denormalize_targets(out)


# ---------------------------------------------------------------------------
# Built-in forecasters
# ---------------------------------------------------------------------------

class BottomUpForecaster:
    name = "bottom-up"

    def fit(self, train_set, ctx):
        pass

    def predict(self, samples, ctx):
        lc = ctx.pipeline.schema.raw_columns().index("large_customer_net_change")
        return np.array([bottom_up_forecast(s.steps[-1][0], s.steps[-1][lc]) for s in samples])


class ArForecaster:
    """Per-feeder AR fit on every actual peak before the forecast year."""
    name = "ar2"

    def fit(self, train_set, ctx):
        pass

    def predict(self, samples, ctx):
        out = []
        for s in samples:
            target = s.forecast_years[-1]
            history = ctx.peaks.get(s.feeder_id, {})
            series = []
            year = target - 1
            while year in history:
                series.append(history[year])
                year -= 1
            series.reverse()
            if len(series) < 2 * ctx.ar_order + 1:
                if not series:
                    raise DomainError(f"no peak history before {target} for feeder {s.feeder_id}")
                log("INFO", f"feeder {s.feeder_id}: {len(series)} points before {target}, using persistence")
                out.append(series[-1])
                continue
            model = fit_ar(series, ctx.ar_order)
            out.append(forecast_ar(model, series[-ctx.ar_order:], 1)[0])
        return np.array(out)


class FnnForecaster:
    def __init__(self, variant: FNN_VARIANT) -> None:
        self.variant = FNN_VARIANT(variant)
        self.name = "fnn-" + self.variant.value.replace("_", "-")
        self.model: Optional[FnnModel] = None
        self.history: List[float] = []

    def fit(self, train_set, ctx):
        X, Y = fnn_rows(self.variant, train_set, ctx.pipeline)
        model = init_fnn(self.variant, input_width=X.shape[1], seed=ctx.hyper.seed,
                         output_bias=ctx.settings.output_bias)
        self.model, self.history = fnn_train(model, X, Y, ctx.hyper)

    def predict(self, samples, ctx):
        if self.model is None:
            raise DomainError(f"{self.name} must be fitted before predicting")
        out = fnn_forward_batch(self.model, fnn_inputs(self.variant, samples, ctx.pipeline))
        return ctx.pipeline.denormalize_targets(out)


class SequenceForecaster:
    def __init__(self, cell: CELL, net: Optional[NetworkParams] = None) -> None:
        self.cell = CELL(cell)
        self.name = self.cell.value
        self.net = net
        self.history: List[float] = []

    def fit(self, train_set, ctx):
        s = ctx.settings
        net = init_network(self.cell, s.mode, n_steps=s.n_steps, input_width=ctx.pipeline.input_width,
                           hidden=s.hidden, dense_widths=s.dense_widths, seed=ctx.hyper.seed,
                           output_bias=s.output_bias)
        self.net, self.history = train(net, ctx.pipeline.transform([_retarget(x, s) for x in train_set]), ctx.hyper)

    def predict(self, samples, ctx):
        if self.net is None:
            raise DomainError(f"{self.name} must be fitted before predicting")
        return sequence_predictions(self.net, ctx.pipeline, samples)


def _retarget(sample: SequenceSample, settings: ModelSettings) -> SequenceSample:
    return sample if sample.config is settings.mode else with_config(sample, settings.mode)


register_forecaster("bottom-up", BottomUpForecaster)
register_forecaster("ar2", ArForecaster)
register_forecaster("fnn-one-year", lambda: FnnForecaster(FNN_VARIANT.ONE_YEAR))
register_forecaster("fnn-three-year", lambda: FnnForecaster(FNN_VARIANT.THREE_YEAR))
register_forecaster("lstm", lambda: SequenceForecaster(CELL.LSTM))
register_forecaster("gru", lambda: SequenceForecaster(CELL.GRU))
