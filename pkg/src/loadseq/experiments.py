"""Comparative studies on synthetic grids, plus the prepare/evaluate helpers the CLI shares.

Studies:

* ``bakeoff``          every cell x configuration pair on one grid
* ``virtual-feeders``  best sequence model with and without virtual feeders, per grid seed
* ``ranking``          best sequence model against bottom-up, AR and both FNN variants
* ``speed``            GRU and LSTM training wall-clock at identical architecture
"""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .config import ModelSettings, RunConfig
from .dataset import peak_table
from .debug import log
from .errors import DomainError
from .evalkit import EvalReport, build_report, compare_reports, render_comparison
from .featlab import FeederYearRecord, RegionalYearRecord, TransferEvent, resolve_virtual_feeders
from .forecasters import ForecastContext, Forecaster, get_forecaster
from .model import CELL, MODE
from .pipeline import FeaturePipeline, fit_pipeline
from .seqdata import DatasetSplit, SequenceSample, build_sequence_samples, split_dataset
from .seqnet import init_network
from .synthgrid import SyntheticGrid, synthesize
from .training import train

BASELINES = ("bottom-up", "ar2", "fnn-one-year", "fnn-three-year")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class Prepared:
    feeder_years: Tuple[FeederYearRecord, ...]
    samples: Tuple[SequenceSample, ...]
    split: DatasetSplit
    pipeline: FeaturePipeline
    peaks: Mapping[str, Mapping[int, float]]


def prepare(
    feeder_years: Sequence[FeederYearRecord],
    regional: Sequence[RegionalYearRecord],
    transfer_log: Sequence[TransferEvent],
    config: RunConfig,
    *,
    virtual: Optional[bool] = None,
    forecast_regional: Optional[Mapping[int, RegionalYearRecord]] = None,
    n_steps: Optional[int] = None,
) -> Prepared:
    """Virtual feeders, windows, the seeded split and a pipeline fitted on the training part."""
    virtual = config.virtual_feeders if virtual is None else virtual
    records = resolve_virtual_feeders(feeder_years, transfer_log) if virtual else list(feeder_years)
    samples = build_sequence_samples(
        records, regional, config.model.mode, n_steps or config.model.n_steps,
        config.schema, forecast_regional=forecast_regional,
    )
    if len(samples) < 2:
        raise DomainError(
            f"only {len(samples)} sequence sample(s) could be built.\n"
            "  Tip: check that feeder and regional years overlap for at least n_steps + 1 years."
        )
    split = split_dataset(samples, config.split_ratio, config.split_seed)
    pipeline = fit_pipeline(split.train, config.schema)
    log("INFO", f"{len(samples)} samples: {len(split.train)} train / {len(split.test)} test")
    return Prepared(tuple(records), tuple(samples), split, pipeline, peak_table(records))


def prepare_grid(grid: SyntheticGrid, config: RunConfig, *, virtual: Optional[bool] = None) -> Prepared:
    forecasts = {r.year: r for r in grid.regional_forecasts} or None
    return prepare(grid.feeder_years, grid.regional, grid.transfer_log, config,
                   virtual=virtual, forecast_regional=forecasts)


def model_label(name: str, settings: ModelSettings) -> str:
    if name in (c.value for c in CELL):
        return f"{name}-{settings.mode.value.replace('_', '-')}"
    return name


def evaluate_forecaster(
    name: str,
    prepared: Prepared,
    config: RunConfig,
    *,
    settings: Optional[ModelSettings] = None,
    forecaster: Optional[Forecaster] = None,
) -> Tuple[EvalReport, Forecaster]:
    """Fit *name* on the training split and score it on the test split."""
    settings = settings or config.model
    forecaster = forecaster or get_forecaster(name)
    ctx = ForecastContext(prepared.pipeline, config.train, settings, prepared.peaks, config.ar_order)
    start = time.perf_counter()
    forecaster.fit(prepared.split.train, ctx)
    elapsed = time.perf_counter() - start
    test = prepared.split.test
    report = build_report(
        model_label(name, settings),
        [s.final_peak for s in test],
        forecaster.predict(test, ctx),
        season=config.season,
        record_ids=[s.record_id for s in test],
        training_time=elapsed if config.timing else None,
        bin_width=config.bin_width,
        threshold=config.threshold,
    )
    log("INFO", f"{report.label}: MAPE {report.mape:.3f}% on {report.n_records} test records")
    return report, forecaster


def _sequence_reports(prepared: Prepared, config: RunConfig) -> List[EvalReport]:
    reports = []
    for cell in CELL:
        for mode in MODE:
            settings = replace(config.model, cell=cell, mode=mode)
            reports.append(evaluate_forecaster(cell.value, prepared, config, settings=settings)[0])
    return reports


def _grid_config(config: RunConfig, seed: int) -> RunConfig:
    return replace(config, synth=replace(config.synth, seed=seed, season=config.season))


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def run_bakeoff(config: RunConfig, grid: Optional[SyntheticGrid] = None) -> List[EvalReport]:
    grid = grid or synthesize(replace(config.synth, season=config.season))
    return _sequence_reports(prepare_grid(grid, config), config)


@dataclass(frozen=True)
class AblationRow:
    seed: int
    with_virtual: float
    without_virtual: float

    @property
    def improved(self) -> bool:
        return self.with_virtual < self.without_virtual


def run_virtual_feeder_ablation(config: RunConfig, seeds: Sequence[int] = DEFAULT_SEEDS) -> List[AblationRow]:
    """Best sequence-model test MAPE on each grid, with and without virtual feeders."""
    rows = []
    for seed in seeds:
        grid = synthesize(_grid_config(config, seed).synth)
        best = {}
        for virtual in (True, False):
            reports = _sequence_reports(prepare_grid(grid, config, virtual=virtual), config)
            best[virtual] = min(r.mape for r in reports)
        rows.append(AblationRow(seed, best[True], best[False]))
    return rows


@dataclass(frozen=True)
class RankingRow:
    seed: int
    mapes: Mapping[str, float]
    best_sequence: str

    def beats(self, baseline: str) -> bool:
        return self.mapes[self.best_sequence] < self.mapes[baseline]


def run_ranking(config: RunConfig, seeds: Sequence[int] = DEFAULT_SEEDS) -> List[RankingRow]:
    rows = []
    for seed in seeds:
        prepared = prepare_grid(synthesize(_grid_config(config, seed).synth), config)
        mapes: Dict[str, float] = {r.label: r.mape for r in _sequence_reports(prepared, config)}
        best = min(mapes, key=lambda k: (mapes[k], k))
        for name in BASELINES:
            mapes[name] = evaluate_forecaster(name, prepared, config)[0].mape
        rows.append(RankingRow(seed, mapes, best))
    return rows


@dataclass(frozen=True)
class SpeedResult:
    lstm_seconds: Tuple[float, ...]
    gru_seconds: Tuple[float, ...]

    @property
    def lstm_median(self) -> float:
        return statistics.median(self.lstm_seconds)

    @property
    def gru_median(self) -> float:
        return statistics.median(self.gru_seconds)


def run_speed(config: RunConfig, runs: int = 5, grid: Optional[SyntheticGrid] = None) -> SpeedResult:
    """Wall-clock training time per cell on one prepared dataset, same seed and epochs."""
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs}")
    prepared = prepare_grid(grid or synthesize(replace(config.synth, season=config.season)), config)
    train_set = prepared.pipeline.transform(prepared.split.train)
    s = config.model
    timings: Dict[CELL, List[float]] = {CELL.LSTM: [], CELL.GRU: []}
    for _ in range(runs):
        for cell in (CELL.LSTM, CELL.GRU):
            net = init_network(cell, s.mode, n_steps=s.n_steps, input_width=prepared.pipeline.input_width,
                               hidden=s.hidden, dense_widths=s.dense_widths, seed=config.train.seed,
                               output_bias=s.output_bias)
            start = time.perf_counter()
            train(net, train_set, config.train)
            timings[cell].append(time.perf_counter() - start)
    return SpeedResult(tuple(timings[CELL.LSTM]), tuple(timings[CELL.GRU]))


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------

def render_ablation(rows: Sequence[AblationRow]) -> str:
    lines = [f"{'seed':>6}  {'virtual':>9}  {'raw':>9}  improved"]
    for r in rows:
        lines.append(f"{r.seed:>6}  {r.with_virtual:>9.3f}  {r.without_virtual:>9.3f}  {'yes' if r.improved else 'no'}")
    lines.append(f"improved on {sum(r.improved for r in rows)} of {len(rows)} grids")
    return "\n".join(lines) + "\n"


def render_ranking(rows: Sequence[RankingRow]) -> str:
    lines = []
    for r in rows:
        ordered = sorted(r.mapes.items(), key=lambda kv: (kv[1], kv[0]))
        lines.append(f"seed {r.seed}: " + ", ".join(f"{k}={v:.3f}" for k, v in ordered))
    for name in BASELINES:
        lines.append(f"best sequence model beats {name} on {sum(r.beats(name) for r in rows)} of {len(rows)} grids")
    return "\n".join(lines) + "\n"


def render_speed(result: SpeedResult) -> str:
    return (f"lstm median {result.lstm_median:.3f}s over {len(result.lstm_seconds)} runs\n"
            f"gru  median {result.gru_median:.3f}s over {len(result.gru_seconds)} runs\n")


@dataclass(frozen=True)
class Study:
    key: str
    title: str
    run: Callable[[RunConfig], str]


def available_studies() -> List[Study]:
    return [
        Study("bakeoff", "LSTM/GRU x many-to-one/many-to-many on one grid",
              lambda c: render_comparison(compare_reports(run_bakeoff(c)))),
        Study("virtual-feeders", "Best sequence model with and without virtual feeders",
              lambda c: render_ablation(run_virtual_feeder_ablation(c))),
        Study("ranking", "Best sequence model against bottom-up, AR and FNN baselines",
              lambda c: render_ranking(run_ranking(c))),
        Study("speed", "GRU vs LSTM training wall-clock",
              lambda c: render_speed(run_speed(c))),
    ]


def get_study(key: str) -> Study:
    studies = {s.key: s for s in available_studies()}
    if key not in studies:
        raise DomainError(f"unknown study {key!r}; available: {', '.join(sorted(studies))}")
    return studies[key]
