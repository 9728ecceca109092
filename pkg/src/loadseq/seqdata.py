"""Sequence samples, train/test splitting, temperature scenarios and chained forecasts.

A step for forecast year ``t`` carries the feeder's previous-year peak and
composition (year ``t-1``) followed by the forecast-year drivers (year ``t``)::

    prev_peak, prev_residential_pct, prev_commercial_pct,
    <economic columns>, temperature, temperature_change,
    large_customer_net_change, <optional feeder features>

Samples are built in raw units; :mod:`loadseq.pipeline` turns them into the
normalized, PCA-reduced vectors the networks consume.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .debug import log, log_skip
from .errors import ConfigError, ConsistencyError, DomainError, ShapeError
from .featlab import FeederYearRecord, RegionalYearRecord, temperature_changes
from .model import MODE, SEASON
from .seqnet import NetworkParams, forward_batch

if TYPE_CHECKING:
    from .pipeline import FeaturePipeline

OPTIONAL_FEEDER_FEATURES = ("der_growth", "ev_growth")
LEADING_COLUMNS = ("prev_peak", "prev_residential_pct", "prev_commercial_pct")
TRAILING_COLUMNS = ("temperature", "temperature_change", "large_customer_net_change")


@dataclass(frozen=True)
class FeatureSchema:
    econ_columns: Tuple[str, ...] = ("gdp_growth", "employment_growth", "population_growth", "net_migration")
    optional_feeder_features: Tuple[str, ...] = ()
    pve_threshold: float = 0.95
    n_components: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "econ_columns", tuple(self.econ_columns))
        object.__setattr__(self, "optional_feeder_features", tuple(self.optional_feeder_features))
        if not self.econ_columns:
            raise ConfigError("feature schema needs at least one economic/population column")
        unknown = [f for f in self.optional_feeder_features if f not in OPTIONAL_FEEDER_FEATURES]
        if unknown:
            raise ConfigError(
                f"unknown optional feeder features {unknown}; expected a subset of {list(OPTIONAL_FEEDER_FEATURES)}"
            )
        if not 0.0 < self.pve_threshold <= 1.0:
            raise ConfigError(f"pve_threshold must lie in (0, 1], got {self.pve_threshold}")
        if self.n_components is not None and not 1 <= self.n_components <= len(self.econ_columns):
            raise ConfigError(
                f"n_components must lie in [1, {len(self.econ_columns)}], got {self.n_components}"
            )

    def raw_columns(self) -> Tuple[str, ...]:
        return (*LEADING_COLUMNS, *self.econ_columns, *TRAILING_COLUMNS, *self.optional_feeder_features)

    @property
    def econ_slice(self) -> slice:
        return slice(len(LEADING_COLUMNS), len(LEADING_COLUMNS) + len(self.econ_columns))


@dataclass(frozen=True, eq=False)
class SequenceSample:
    record_id: str
    feeder_id: str
    forecast_years: Tuple[int, ...]
    steps: np.ndarray
    targets: Tuple[float, ...]
    config: MODE
    step_peaks: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        years = tuple(int(y) for y in self.forecast_years)
        steps = np.array(self.steps, dtype=np.float64)
        config = MODE.parse(self.config)
        if not years:
            raise ShapeError(f"{self.record_id}: no forecast years")
        if any(b - a != 1 for a, b in zip(years, years[1:])):
            raise ConsistencyError(f"{self.record_id}: forecast years {list(years)} are not consecutive")
        if steps.ndim != 2 or steps.shape[0] != len(years):
            raise ShapeError(f"{self.record_id}: steps shape {steps.shape} does not match {len(years)} years")
        arity = 1 if config is MODE.MANY_TO_ONE else len(years)
        if len(self.targets) != arity:
            raise ShapeError(f"{self.record_id}: {config.value} needs {arity} targets, got {len(self.targets)}")
        if self.step_peaks and len(self.step_peaks) != len(years):
            raise ShapeError(f"{self.record_id}: step_peaks must list one peak per forecast year")
        steps.setflags(write=False)
        object.__setattr__(self, "forecast_years", years)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "config", config)
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        object.__setattr__(self, "step_peaks", tuple(float(p) for p in self.step_peaks))

    @property
    def n_steps(self) -> int:
        return len(self.forecast_years)

    @property
    def input_width(self) -> int:
        return int(self.steps.shape[1])

    @property
    def final_peak(self) -> float:
        return self.step_peaks[-1] if self.step_peaks else self.targets[-1]


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[SequenceSample, ...]
    test: Tuple[SequenceSample, ...]
    seed: int
    ratio: float = 0.8


# ---------------------------------------------------------------------------
# Sample construction
# ---------------------------------------------------------------------------

def raw_step(prev_peak: float, prev_residential: float, prev_commercial: float,
             econ: Sequence[float], temperature: float, temperature_change: float,
             large_customer_net_change: float, optional: Sequence[float] = ()) -> np.ndarray:
    return np.array([prev_peak, prev_residential, prev_commercial, *econ,
                     temperature, temperature_change, large_customer_net_change, *optional],
                    dtype=np.float64)


def _optional_values(rec: FeederYearRecord, schema: FeatureSchema) -> List[float]:
    values = []
    for name in schema.optional_feeder_features:
        value = getattr(rec, name)
        if value is None:
            raise ConsistencyError(
                f"feeder {rec.feeder_id} year {rec.year} lacks {name}, which the schema declares present"
            )
        values.append(float(value))
    return values


def _check_seasons(feeder_years: Sequence[FeederYearRecord], regional: Sequence[RegionalYearRecord]) -> None:
    seasons = {r.season for r in feeder_years} | {r.season for r in regional}
    if len(seasons) > 1:
        raise ConsistencyError(
            f"inputs mix seasons {sorted(s.value for s in seasons)}; summer and winter are separate datasets"
        )


def build_sequence_samples(
    feeder_years: Sequence[FeederYearRecord],
    regional: Sequence[RegionalYearRecord],
    config: MODE | str = MODE.MANY_TO_ONE,
    n_steps: int = 3,
    schema: FeatureSchema = FeatureSchema(),
    forecast_regional: Optional[Mapping[int, RegionalYearRecord]] = None,
) -> List[SequenceSample]:
    """One sample per feeder and window of ``n_steps`` consecutive forecast years.

    Windows slide with stride 1.  A window whose years (or the year before it)
    are missing from the feeder or regional history is skipped and logged.
    When *forecast_regional* holds a record for a window's final year, its
    economic columns replace the actual ones in that final step.
    """
    config = MODE.parse(config)
    if n_steps < 1:
        raise DomainError(f"n_steps must be positive, got {n_steps}")
    _check_seasons(feeder_years, regional)
    regional_by_year = {r.year: r for r in temperature_changes(regional)}
    by_feeder: Dict[str, Dict[int, FeederYearRecord]] = {}
    for rec in feeder_years:
        years = by_feeder.setdefault(rec.feeder_id, {})
        if rec.year in years:
            raise ConsistencyError(f"feeder {rec.feeder_id} lists year {rec.year} twice")
        years[rec.year] = rec

    samples: List[SequenceSample] = []
    for feeder_id in sorted(by_feeder):
        history = by_feeder[feeder_id]
        first, last = min(history), max(history)
        for start in range(first + 1, last - n_steps + 2):
            window = tuple(range(start, start + n_steps))
            missing = [y for y in range(start - 1, start + n_steps) if y not in history]
            if missing:
                log_skip(feeder_id, window, f"missing feeder years {missing}")
                continue
            absent = [y for y in window if y not in regional_by_year
                      or regional_by_year[y].temperature_change is None]
            if absent:
                log_skip(feeder_id, window, f"missing regional years {absent}")
                continue
            steps = []
            for pos, year in enumerate(window):
                prev, cur, reg = history[year - 1], history[year], regional_by_year[year]
                econ_rec = reg
                if forecast_regional is not None and pos == n_steps - 1 and year in forecast_regional:
                    econ_rec = forecast_regional[year]
                steps.append(raw_step(
                    prev.peak_demand, prev.residential_pct, prev.commercial_pct,
                    econ_rec.econ_vector(schema.econ_columns),
                    reg.temperature, reg.temperature_change,
                    cur.large_customer_net_change, _optional_values(cur, schema),
                ))
            peaks = tuple(history[y].peak_demand for y in window)
            samples.append(SequenceSample(
                record_id=f"{feeder_id}:{window[0]}-{window[-1]}",
                feeder_id=feeder_id,
                forecast_years=window,
                steps=np.stack(steps),
                targets=peaks[-1:] if config is MODE.MANY_TO_ONE else peaks,
                config=config,
                step_peaks=peaks,
            ))
    return samples


def with_config(sample: SequenceSample, config: MODE | str) -> SequenceSample:
    """Re-target a sample for the other configuration; step features are untouched."""
    config = MODE.parse(config)
    peaks = sample.step_peaks
    if not peaks:
        raise DomainError(f"{sample.record_id} carries no per-step peaks to re-target")
    return replace(sample, config=config, targets=peaks[-1:] if config is MODE.MANY_TO_ONE else peaks)


def flatten_sample(sample: SequenceSample) -> np.ndarray:
    """Concatenate the steps into one vector (the three-year FNN input)."""
    return sample.steps.reshape(-1).copy()


def unflatten(vector, n_steps: int) -> np.ndarray:
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or n_steps < 1 or v.size % n_steps:
        raise ShapeError(f"cannot split a vector of size {v.size} into {n_steps} steps")
    return v.reshape(n_steps, -1)


def split_dataset(samples: Sequence[SequenceSample], ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then the first ``ceil((1 - ratio) * n)`` records form the test set."""
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    n = len(samples)
    if n == 0:
        raise DomainError("cannot split an empty sample set")
    n_test = math.ceil(round((1.0 - ratio) * n, 9))
    if n >= 2:
        n_test = min(max(n_test, 1), n - 1)
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    test = tuple(samples[i] for i in order[:n_test])
    train = tuple(samples[i] for i in order[n_test:])
    return DatasetSplit(train=train, test=test, seed=seed, ratio=ratio)


# ---------------------------------------------------------------------------
# Temperature scenarios
# ---------------------------------------------------------------------------

def normalize_temperature_scenario(history: Sequence[float], margin: float = 0.0,
                                   season: SEASON | str = SEASON.SUMMER) -> float:
    """Historical extreme (max in summer, min in winter) shifted by *margin*."""
    temps = np.asarray(list(history), dtype=np.float64)
    if temps.size == 0:
        raise DomainError("temperature history is empty")
    extreme = temps.max() if SEASON(season) is SEASON.SUMMER else temps.min()
    return float(extreme) + float(margin)


def apply_temperature_scenario(regional_history: Sequence[RegionalYearRecord],
                               future_econ: Mapping[int, Mapping[str, float]],
                               temperature: float) -> List[RegionalYearRecord]:
    """Future regional records at a fixed scenario temperature.

    The first future year's temperature change is taken against the last
    actual year; later years change by zero.
    """
    if not regional_history:
        raise DomainError("regional history is empty")
    last = max(regional_history, key=lambda r: r.year)
    out = []
    prev_temp = last.temperature
    for year in sorted(future_econ):
        if year <= last.year:
            raise ConsistencyError(f"scenario year {year} is not after the last actual year {last.year}")
        out.append(RegionalYearRecord(
            year=year, econ=future_econ[year], temperature=temperature,
            temperature_change=temperature - prev_temp, season=last.season,
        ))
        prev_temp = temperature
    return out


def estimate_temperature_sensitivity(history: Sequence[FeederYearRecord],
                                     regional: Sequence[RegionalYearRecord]) -> float:
    """Amperes per °C from a least-squares fit of year-over-year peak changes."""
    temps = {r.year: r.temperature for r in regional}
    peaks = {r.year: r.peak_demand for r in history}
    rows = [(temps[y] - temps[y - 1], peaks[y] - peaks[y - 1])
            for y in sorted(peaks) if y - 1 in peaks and y in temps and y - 1 in temps]
    if len(rows) < 2:
        raise DomainError("need at least two year-over-year changes to estimate temperature sensitivity")
    d = np.array(rows)
    design = np.column_stack([np.ones(len(d)), d[:, 0]])
    coef, *_ = np.linalg.lstsq(design, d[:, 1], rcond=None)
    return float(coef[1])


def retro_normalize_history(history: Sequence[FeederYearRecord], regional: Sequence[RegionalYearRecord],
                            reference_temperature: float,
                            sensitivity: Optional[float] = None) -> List[FeederYearRecord]:
    """Restate historical peaks as if every year had seen *reference_temperature*."""
    if sensitivity is None:
        sensitivity = estimate_temperature_sensitivity(history, regional)
    temps = {r.year: r.temperature for r in regional}
    out = []
    for rec in sorted(history, key=lambda r: r.year):
        if rec.year not in temps:
            raise ConsistencyError(f"no temperature recorded for year {rec.year}")
        adjusted = rec.peak_demand + sensitivity * (reference_temperature - temps[rec.year])
        if adjusted <= 0:
            raise DomainError(
                f"feeder {rec.feeder_id} year {rec.year}: temperature restatement gives a nonpositive peak"
            )
        out.append(replace(rec, peak_demand=adjusted))
    return out


# ---------------------------------------------------------------------------
# Chained multi-year forecasts
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainForecast:
    feeder_id: str
    years: Tuple[int, ...]
    peaks: Tuple[float, ...]
    windows: Tuple[np.ndarray, ...] = field(default=(), repr=False)


def chain_forecast(
    network: NetworkParams,
    pipeline: "FeaturePipeline",
    history: Sequence[FeederYearRecord],
    horizon: int,
    regional_history: Sequence[RegionalYearRecord],
    scenario: Sequence[RegionalYearRecord],
    future_lc: Optional[Mapping[int, float]] = None,
    event_margin: float = 0.0,
) -> ChainForecast:
    """Forecast ``horizon`` years past the end of *history*, feeding outputs forward.

    The first year uses actual history only.  Later windows substitute earlier
    forecasts for the previous-year peaks that are not yet observed; the last
    actual composition is carried forward.  ``event_margin`` (amperes) is added
    to every reported forecast but not to the substituted inputs.
    """
    if horizon < 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    if not history:
        raise DomainError("feeder history is empty")
    feeder_ids = {r.feeder_id for r in history}
    if len(feeder_ids) != 1:
        raise ConsistencyError(f"chain_forecast expects one feeder, got {sorted(feeder_ids)}")
    feeder_id = feeder_ids.pop()
    schema = pipeline.schema
    n = network.n_steps
    actual = {r.year: r for r in history}
    last_year = max(actual)
    if horizon == 0:
        return ChainForecast(feeder_id, (), ())
    needed = [y for y in range(last_year - n + 1, last_year + 1) if y not in actual]
    if needed:
        raise DomainError(f"feeder {feeder_id} history lacks years {needed} needed for the first window")

    regional = {r.year: r for r in temperature_changes(regional_history)}
    for rec in scenario:
        regional[rec.year] = rec
    lc = dict(future_lc or {})
    last_rec = actual[last_year]
    carried_optional = _optional_values(last_rec, schema)

    peaks: Dict[int, float] = {y: r.peak_demand for y, r in actual.items()}
    forecasts: List[float] = []
    windows: List[np.ndarray] = []
    for target in range(last_year + 1, last_year + horizon + 1):
        rows = []
        for year in range(target - n + 1, target + 1):
            reg = regional.get(year)
            if reg is None or reg.temperature_change is None:
                raise DomainError(f"no regional drivers (with temperature change) for year {year}")
            prev = actual.get(year - 1, last_rec)
            cur = actual.get(year)
            if cur is not None:
                change = cur.large_customer_net_change
                optional = _optional_values(cur, schema)
            else:
                change = float(lc.get(year, 0.0))
                optional = carried_optional
            rows.append(raw_step(
                peaks[year - 1], prev.residential_pct, prev.commercial_pct,
                reg.econ_vector(schema.econ_columns), reg.temperature, reg.temperature_change,
                change, optional,
            ))
        raw = np.stack(rows)
        windows.append(raw)
        out = forward_batch(network, pipeline.transform_steps(raw)[None, :, :])[0]
        peak = float(pipeline.denormalize_targets(out[-1:])[0])
        peaks[target] = peak
        forecasts.append(peak + float(event_margin))
    log("INFO", f"feeder {feeder_id}: chained {horizon} year(s) past {last_year}")
    return ChainForecast(feeder_id, tuple(range(last_year + 1, last_year + horizon + 1)),
                         tuple(forecasts), tuple(windows))
