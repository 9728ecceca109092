"""Seeded synthetic feeder grids for desk-scale experiments.

Regional drivers follow mean-reverting AR(1) processes around their drifts.
Each feeder's underlying load grows by a composition-weighted, lagged response
to those drivers plus occasional large-customer steps; the observed peak adds a
temperature response and multiplicative noise on top.  Every feeder draws from
its own spawned seed, so generation order never changes the output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .debug import log
from .errors import ConfigError, DomainError
from .featlab import FeederYearRecord, RegionalYearRecord, TransferEvent
from .model import SEASON

BIT_GENERATORS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")
ECON_COLUMNS = ("gdp_growth", "employment_growth", "population_growth", "net_migration")


@dataclass(frozen=True)
class SynthConfig:
    n_feeders: int = 60
    years: int = 14
    start_year: int = 2004
    seed: int = 0
    bit_generator: str = "PCG64"
    season: SEASON = SEASON.SUMMER
    n_steps: int = 3
    # regional drivers: drift and volatility per economic column, in percent (migration in thousands)
    econ_drifts: Tuple[float, ...] = (2.0, 1.2, 1.5, 8.0)
    econ_volatilities: Tuple[float, ...] = (1.5, 1.0, 0.6, 6.0)
    econ_persistence: float = 0.6
    forecast_error: float = 0.3
    temperature_mean: float = 33.0
    temperature_spread: float = 1.5
    # feeders
    base_peak_range: Tuple[float, float] = (150.0, 600.0)
    residential_range: Tuple[float, float] = (0.3, 0.9)
    commercial_max: float = 0.4
    composition_drift: float = 0.005
    econ_sensitivity: float = 1.0
    sensitivity_spread: float = 0.3
    lag_weights: Tuple[float, ...] = (0.5, 0.3, 0.2)
    temperature_sensitivity: float = 4.0
    winter_temperature_factor: float = 0.5
    noise: float = 0.01
    lc_rate: float = 0.15
    lc_range: Tuple[float, float] = (-30.0, 60.0)
    der_trend: float = 0.0
    ev_trend: float = 0.0
    # load transfers
    transfer_fraction: float = 0.4
    transfer_magnitude: Tuple[float, float] = (0.1, 0.3)
    multi_feeder_share: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "season", SEASON(self.season))
        for name in ("econ_drifts", "econ_volatilities", "base_peak_range", "residential_range",
                     "lag_weights", "lc_range", "transfer_magnitude"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.n_feeders < 1:
            raise DomainError(f"n_feeders must be >= 1, got {self.n_feeders}")
        if self.years < self.n_steps + 2:
            raise DomainError(f"years must be >= n_steps + 2 = {self.n_steps + 2}, got {self.years}")
        if self.bit_generator not in BIT_GENERATORS:
            raise ConfigError(f"unknown bit generator {self.bit_generator!r}; expected one of {list(BIT_GENERATORS)}")
        if len(self.econ_drifts) != len(ECON_COLUMNS) or len(self.econ_volatilities) != len(ECON_COLUMNS):
            raise ConfigError(f"econ drifts and volatilities need {len(ECON_COLUMNS)} entries each")
        spreads = (*self.econ_volatilities, self.temperature_spread, self.noise, self.composition_drift,
                   self.forecast_error, self.sensitivity_spread)
        if any(v < 0 for v in spreads):
            raise DomainError("volatilities, spreads and noise must be >= 0")
        if not 0.0 <= self.lc_rate <= 1.0 or not 0.0 <= self.transfer_fraction <= 1.0:
            raise DomainError("lc_rate and transfer_fraction must lie in [0, 1]")
        lo, hi = self.transfer_magnitude
        if not 0.0 <= lo <= hi < 1.0:
            raise DomainError("transfer_magnitude must be a fraction range within [0, 1)")
        if not self.lag_weights:
            raise ConfigError("lag_weights needs at least one entry")

    @property
    def year_range(self) -> range:
        return range(self.start_year, self.start_year + self.years)


@dataclass(frozen=True)
class FeederSensitivity:
    feeder_id: str
    residential: float
    commercial: float
    industrial: float
    temperature: float


@dataclass(frozen=True)
class SyntheticGrid:
    regional: Tuple[RegionalYearRecord, ...]
    feeder_years: Tuple[FeederYearRecord, ...]
    sensitivities: Mapping[str, FeederSensitivity]
    regional_forecasts: Tuple[RegionalYearRecord, ...] = ()
    transfer_log: Tuple[TransferEvent, ...] = ()
    clean_feeder_years: Tuple[FeederYearRecord, ...] = field(default=(), repr=False)


def _rng(config: SynthConfig, seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(getattr(np.random, config.bit_generator)(seq))


def _regional(config: SynthConfig, rng: np.random.Generator):
    n_lags = len(config.lag_weights) - 1
    total = config.years + n_lags
    drifts = np.array(config.econ_drifts)
    vols = np.array(config.econ_volatilities)
    econ = np.empty((total, len(ECON_COLUMNS)))
    x = drifts + vols * rng.standard_normal(len(ECON_COLUMNS))
    for t in range(total):
        if t:
            x = drifts + config.econ_persistence * (x - drifts) + vols * rng.standard_normal(len(ECON_COLUMNS))
        econ[t] = x
    temps = config.temperature_mean + config.temperature_spread * rng.standard_normal(config.years)
    forecast_noise = config.forecast_error * rng.standard_normal((config.years, len(ECON_COLUMNS)))
    regional, forecasts = [], []
    for i, year in enumerate(config.year_range):
        row = econ[n_lags + i]
        regional.append(RegionalYearRecord(year, dict(zip(ECON_COLUMNS, row.tolist())),
                                           float(temps[i]), season=config.season))
        forecasts.append(RegionalYearRecord(year, dict(zip(ECON_COLUMNS, (row + forecast_noise[i]).tolist())),
                                            float(temps[i]), season=config.season))
    return econ, temps, regional, forecasts


def _feeder(config: SynthConfig, feeder_id: str, econ: np.ndarray, temps: np.ndarray,
            rng: np.random.Generator) -> Tuple[List[FeederYearRecord], FeederSensitivity]:
    n_lags = len(config.lag_weights) - 1
    spread = config.sensitivity_spread
    s_res, s_com, s_ind = config.econ_sensitivity * (1.0 + spread * rng.uniform(-1.0, 1.0, size=3))
    temp_sign = 1.0 if config.season is SEASON.SUMMER else -config.winter_temperature_factor
    s_temp = temp_sign * config.temperature_sensitivity * (1.0 + spread * rng.uniform(-1.0, 1.0))
    base = rng.uniform(*config.base_peak_range)
    res = rng.uniform(*config.residential_range)
    com = rng.uniform(0.0, min(config.commercial_max, 1.0 - res))
    der = ev = 0.0

    # composition-weighted response: residential to population, commercial to employment, industrial to GDP
    gdp, emp, pop = econ[:, 0], econ[:, 1], econ[:, 2]
    records = []
    for i, year in enumerate(config.year_range):
        t = n_lags + i
        ind = 1.0 - res - com
        growth = 0.0
        for lag, w in enumerate(config.lag_weights):
            growth += w * (res * s_res * pop[t - lag] + com * s_com * emp[t - lag] + ind * s_ind * gdp[t - lag])
        lc = 0.0
        if i and rng.uniform() < config.lc_rate:
            lc = float(rng.uniform(*config.lc_range))
        if i:
            base = max(base * (1.0 + growth / 100.0) + lc, 1.0)
        der += config.der_trend
        ev += config.ev_trend
        temp_response = s_temp * (temps[i] - config.temperature_mean)
        peak = max(base + temp_response + config.noise * base * rng.standard_normal(), 1.0)
        records.append(FeederYearRecord(
            feeder_id=feeder_id, year=year, peak_demand=float(peak),
            residential_pct=float(res), commercial_pct=float(com),
            large_customer_net_change=lc,
            der_growth=der if config.der_trend else None,
            ev_growth=ev if config.ev_trend else None,
            season=config.season,
        ))
        res = float(np.clip(res + config.composition_drift * rng.standard_normal(), 0.0, 1.0))
        com = float(np.clip(com + config.composition_drift * rng.standard_normal(), 0.0, 1.0 - res))
    return records, FeederSensitivity(feeder_id, float(s_res), float(s_com), float(s_ind), float(s_temp))


def feeder_ids(config: SynthConfig) -> List[str]:
    return [str(1001 + i) for i in range(config.n_feeders)]


def generate_synthetic_grid(config: SynthConfig) -> SyntheticGrid:
    """Regional drivers, clean feeder histories and the true sensitivities."""
    children = np.random.SeedSequence(config.seed).spawn(config.n_feeders + 2)
    econ, temps, regional, forecasts = _regional(config, _rng(config, children[0]))
    feeder_years: List[FeederYearRecord] = []
    sensitivities: Dict[str, FeederSensitivity] = {}
    for idx, fid in enumerate(feeder_ids(config)):
        records, sens = _feeder(config, fid, econ, temps, _rng(config, children[idx + 1]))
        feeder_years.extend(records)
        sensitivities[fid] = sens
    log("INFO", f"synthesized {config.n_feeders} feeders x {config.years} years ({config.season.value})")
    return SyntheticGrid(tuple(regional), tuple(feeder_years), sensitivities, tuple(forecasts),
                         (), tuple(feeder_years))


def random_transfer_events(config: SynthConfig, feeder_years: Sequence[FeederYearRecord]
                           ) -> Tuple[List[TransferEvent], List[float]]:
    """Disjoint transfer groups touching ``transfer_fraction`` of the feeders.

    Each group is a donor followed by one (sometimes two) recipients; the
    magnitude is a fraction of the donor's smallest peak from the event year on.
    """
    rng = _rng(config, np.random.SeedSequence(config.seed).spawn(config.n_feeders + 2)[-1])
    ids = sorted({r.feeder_id for r in feeder_years})
    peaks = {(r.feeder_id, r.year): r.peak_demand for r in feeder_years}
    years = sorted({r.year for r in feeder_years})
    touched = min(len(ids), math.ceil(config.transfer_fraction * len(ids)))
    pool = [ids[i] for i in rng.permutation(len(ids))[:touched]]
    candidates = years[2:-1] or years[1:]
    events, magnitudes = [], []
    while len(pool) >= 2:
        size = 3 if len(pool) >= 3 and rng.uniform() < config.multi_feeder_share else 2
        group, pool = tuple(pool[:size]), pool[size:]
        year = int(candidates[int(rng.integers(len(candidates)))])
        donor_floor = min(peaks[(group[0], y)] for y in years if y >= year and (group[0], y) in peaks)
        events.append(TransferEvent(year, group))
        magnitudes.append(float(rng.uniform(*config.transfer_magnitude)) * donor_floor)
    return events, magnitudes


def inject_load_transfers(feeder_years: Sequence[FeederYearRecord], events: Sequence[TransferEvent],
                          magnitudes: Sequence[float]) -> Tuple[List[FeederYearRecord], List[TransferEvent]]:
    """Move load from each event's first feeder to the others from the event year on.

    The moved branch carries the donor's composition, so the donor's shares are
    unchanged and each recipient's shares are re-weighted by peak.
    """
    if len(events) != len(magnitudes):
        raise DomainError(f"{len(events)} events but {len(magnitudes)} magnitudes")
    table = {(r.feeder_id, r.year): r for r in feeder_years}
    for event, delta in sorted(zip(events, magnitudes), key=lambda pair: pair[0].year):
        donor, recipients = event.feeder_ids[0], event.feeder_ids[1:]
        for fid in event.feeder_ids:
            if not any(key[0] == fid for key in table):
                raise DomainError(f"transfer event in {event.year} names unknown feeder {fid}")
        share = delta / len(recipients)
        for key in sorted(k for k in table if k[0] == donor and k[1] >= event.year):
            rec = table[key]
            if delta >= rec.peak_demand:
                raise DomainError(
                    f"transfer of {delta:.3f} A is not below donor {donor}'s {rec.year} peak {rec.peak_demand:.3f} A"
                )
            for fid in recipients:
                other = table.get((fid, rec.year))
                if other is None:
                    raise DomainError(f"recipient {fid} has no {rec.year} record to receive the transfer")
                total = other.peak_demand + share
                table[(fid, rec.year)] = replace(
                    other,
                    peak_demand=total,
                    residential_pct=(other.residential_pct * other.peak_demand + rec.residential_pct * share) / total,
                    commercial_pct=(other.commercial_pct * other.peak_demand + rec.commercial_pct * share) / total,
                )
            table[key] = replace(rec, peak_demand=rec.peak_demand - delta)
    out = sorted(table.values(), key=lambda r: (r.feeder_id, r.year))
    return out, list(events)


def synthesize(config: SynthConfig) -> SyntheticGrid:
    """Generate a grid and inject random load transfers into it."""
    grid = generate_synthetic_grid(config)
    if config.transfer_fraction <= 0.0:
        return grid
    events, magnitudes = random_transfer_events(config, grid.feeder_years)
    modified, log_ = inject_load_transfers(grid.feeder_years, events, magnitudes)
    return replace(grid, feeder_years=tuple(modified), transfer_log=tuple(log_))
