"""CSV input/output for feeder-years, regional-years, transfer logs, samples and forecasts."""
from __future__ import annotations

import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, ConsistencyError
from .featlab import FeederYearRecord, RegionalYearRecord, TransferEvent
from .model import MODE, SEASON
from .seqdata import ChainForecast, SequenceSample

FEEDER_COLUMNS = ("feeder_id", "year", "season", "peak_demand_A", "residential_pct",
                  "commercial_pct", "large_customer_net_change_A")
OPTIONAL_COLUMNS = ("der_growth", "ev_growth")


def _require(df: pd.DataFrame, columns: Iterable[str], path) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ConfigError(f"{os.fspath(path)} lacks required columns {missing}; found {list(df.columns)}")


def _season_filter(df: pd.DataFrame, season: Optional[SEASON | str]) -> pd.DataFrame:
    if season is None or "season" not in df.columns:
        return df
    return df[df["season"].astype(str).str.lower() == SEASON(season).value]


def _optional(value) -> Optional[float]:
    return None if pd.isna(value) else float(value)


def read_feeder_years(path, season: Optional[SEASON | str] = None) -> List[FeederYearRecord]:
    df = pd.read_csv(path, float_precision="round_trip", dtype={"feeder_id": str})
    _require(df, FEEDER_COLUMNS, path)
    df = _season_filter(df, season)
    out = []
    for row in df.itertuples(index=False):
        rec = row._asdict()
        out.append(FeederYearRecord(
            feeder_id=rec["feeder_id"],
            year=int(rec["year"]),
            peak_demand=float(rec["peak_demand_A"]),
            residential_pct=float(rec["residential_pct"]),
            commercial_pct=float(rec["commercial_pct"]),
            large_customer_net_change=float(rec["large_customer_net_change_A"]),
            der_growth=_optional(rec.get("der_growth")),
            ev_growth=_optional(rec.get("ev_growth")),
            season=SEASON(str(rec["season"]).lower()),
        ))
    return out


def write_feeder_years(records: Sequence[FeederYearRecord], path) -> None:
    rows = []
    optional = [c for c in OPTIONAL_COLUMNS if any(getattr(r, c) is not None for r in records)]
    for r in sorted(records, key=lambda r: (r.feeder_id, r.year)):
        row = {
            "feeder_id": r.feeder_id, "year": r.year, "season": r.season.value,
            "peak_demand_A": r.peak_demand, "residential_pct": r.residential_pct,
            "commercial_pct": r.commercial_pct, "large_customer_net_change_A": r.large_customer_net_change,
        }
        for c in optional:
            row[c] = getattr(r, c)
        rows.append(row)
    pd.DataFrame(rows, columns=[*FEEDER_COLUMNS, *optional]).to_csv(path, index=False)


def read_regional_years(path, econ_columns: Sequence[str],
                        season: Optional[SEASON | str] = None) -> List[RegionalYearRecord]:
    df = pd.read_csv(path, float_precision="round_trip")
    _require(df, ("year", "season", "temperature_C", *econ_columns), path)
    df = _season_filter(df, season)
    out = []
    for row in df.itertuples(index=False):
        rec = row._asdict()
        out.append(RegionalYearRecord(
            year=int(rec["year"]),
            econ={c: float(rec[c]) for c in econ_columns},
            temperature=float(rec["temperature_C"]),
            season=SEASON(str(rec["season"]).lower()),
        ))
    years = [r.year for r in out]
    if len(years) != len(set(years)):
        raise ConsistencyError(f"{os.fspath(path)} lists a year twice for one season")
    return sorted(out, key=lambda r: r.year)


def write_regional_years(records: Sequence[RegionalYearRecord], path, econ_columns: Sequence[str]) -> None:
    with_components = any(r.components for r in records)
    rows = []
    for r in sorted(records, key=lambda r: r.year):
        row = {"year": r.year, "season": r.season.value}
        row.update({c: r.econ[c] for c in econ_columns})
        row["temperature_C"] = r.temperature
        if with_components:
            row["temperature_change_C"] = r.temperature_change
            row.update({f"pc{i + 1}": v for i, v in enumerate(r.components)})
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False)


def read_transfer_log(path) -> List[TransferEvent]:
    df = pd.read_csv(path, float_precision="round_trip", dtype={"feeder_ids": str})
    _require(df, ("year", "feeder_ids"), path)
    return [
        TransferEvent(int(row.year), tuple(f.strip() for f in str(row.feeder_ids).split(",") if f.strip()))
        for row in df.itertuples(index=False)
    ]


def write_transfer_log(events: Sequence[TransferEvent], path) -> None:
    rows = [{"year": e.year, "feeder_ids": ",".join(e.feeder_ids)} for e in events]
    pd.DataFrame(rows, columns=["year", "feeder_ids"]).to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Samples (one CSV row per sample step)
# ---------------------------------------------------------------------------

def write_samples(splits: Mapping[str, Sequence[SequenceSample]], path, raw_columns: Sequence[str]) -> None:
    rows = []
    for split, samples in splits.items():
        for s in samples:
            for step, (year, vector) in enumerate(zip(s.forecast_years, s.steps)):
                row = {"record_id": s.record_id, "feeder_id": s.feeder_id, "split": split,
                       "step": step, "year": year,
                       "peak_A": s.step_peaks[step] if s.step_peaks else np.nan}
                row.update({f"raw_{c}": float(v) for c, v in zip(raw_columns, vector)})
                rows.append(row)
    columns = ["record_id", "feeder_id", "split", "step", "year", "peak_A", *(f"raw_{c}" for c in raw_columns)]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)


def read_samples(path, raw_columns: Sequence[str],
                 config: MODE | str = MODE.MANY_TO_ONE) -> Dict[str, List[SequenceSample]]:
    """Samples grouped by split label, in file order."""
    config = MODE.parse(config)
    df = pd.read_csv(path, float_precision="round_trip", dtype={"record_id": str, "feeder_id": str, "split": str})
    feature_cols = [f"raw_{c}" for c in raw_columns]
    _require(df, ("record_id", "feeder_id", "split", "step", "year", "peak_A", *feature_cols), path)
    out: Dict[str, List[SequenceSample]] = {}
    for record_id, group in df.groupby("record_id", sort=False):
        group = group.sort_values("step")
        peaks = tuple(float(p) for p in group["peak_A"])
        out.setdefault(str(group["split"].iloc[0]), []).append(SequenceSample(
            record_id=str(record_id),
            feeder_id=str(group["feeder_id"].iloc[0]),
            forecast_years=tuple(int(y) for y in group["year"]),
            steps=group[feature_cols].to_numpy(dtype=np.float64),
            targets=peaks[-1:] if config is MODE.MANY_TO_ONE else peaks,
            config=config,
            step_peaks=peaks,
        ))
    return out


def write_forecasts(chains: Sequence[ChainForecast], path) -> None:
    rows = [{"feeder_id": c.feeder_id, "year": y, "forecast_peak_A": p}
            for c in chains for y, p in zip(c.years, c.peaks)]
    pd.DataFrame(rows, columns=["feeder_id", "year", "forecast_peak_A"]).to_csv(path, index=False)


def peak_table(records: Sequence[FeederYearRecord]) -> Dict[str, Dict[int, float]]:
    out: Dict[str, Dict[int, float]] = {}
    for r in records:
        out.setdefault(r.feeder_id, {})[r.year] = r.peak_demand
    return out


def sample_peak_table(samples: Sequence[SequenceSample]) -> Dict[str, Dict[int, float]]:
    """Peak history recovered from raw windows: each step's peak plus the prev_peak it carries."""
    out: Dict[str, Dict[int, float]] = {}
    for s in samples:
        table = out.setdefault(s.feeder_id, {})
        for step, year in enumerate(s.forecast_years):
            table[year - 1] = float(s.steps[step][0])  # prev_peak leads every raw step
            if s.step_peaks and np.isfinite(s.step_peaks[step]):
                table[year] = s.step_peaks[step]
    return out
