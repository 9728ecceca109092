"""Accuracy reporting: MAPE, threshold coverage, error histograms and model comparisons."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .debug import log
from .errors import ArtifactError, ConsistencyError, DomainError, ShapeError
from .model import SEASON

DEFAULT_BIN_WIDTH = 2.0
DEFAULT_THRESHOLD = 10.0


def percentage_errors(actuals: Sequence[float], forecasts: Sequence[float]) -> np.ndarray:
    A = np.asarray(actuals, dtype=np.float64).reshape(-1)
    F = np.asarray(forecasts, dtype=np.float64).reshape(-1)
    if A.size != F.size:
        raise ShapeError(f"{A.size} actuals but {F.size} forecasts")
    if A.size == 0:
        raise DomainError("no records to score")
    if np.any(A <= 0):
        raise DomainError("actual peaks must be > 0 for percentage errors")
    return np.abs(A - F) / A * 100.0


def mape(actuals: Sequence[float], forecasts: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    return float(np.mean(percentage_errors(actuals, forecasts)))


def cumulative_within(errors: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> float:
    """Percentage of records whose error is at most *threshold*."""
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    if e.size == 0:
        raise DomainError("no errors to summarize")
    return 100.0 * float(np.count_nonzero(e <= threshold)) / e.size


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    counts: Tuple[int, ...]
    empty: bool = False

    @property
    def edges(self) -> Tuple[float, ...]:
        return tuple(i * self.bin_width for i in range(len(self.counts) + 1))

    @property
    def total(self) -> int:
        return int(sum(self.counts))


def error_histogram(errors: Sequence[float], bin_width: float = DEFAULT_BIN_WIDTH) -> Histogram:
    """Counts over half-open bins [i*w, (i+1)*w) from 0 through the largest error."""
    if not bin_width > 0:
        raise DomainError(f"bin_width must be > 0, got {bin_width}")
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    if e.size == 0:
        log("WARN", "error histogram requested for zero records")
        return Histogram(float(bin_width), (), empty=True)
    if np.any(e < 0):
        raise DomainError("percentage errors cannot be negative")
    n_bins = int(math.floor(float(e.max()) / bin_width)) + 1
    idx = np.minimum(np.floor(e / bin_width).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return Histogram(float(bin_width), tuple(int(c) for c in counts))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    label: str
    season: SEASON
    record_ids: Tuple[str, ...]
    errors: Tuple[float, ...]
    mape: float
    cumulative_within: float
    histogram: Histogram
    threshold: float = DEFAULT_THRESHOLD
    training_time_seconds: Optional[float] = None

    @property
    def n_records(self) -> int:
        return len(self.errors)


def build_report(label: str, actuals: Sequence[float], forecasts: Sequence[float], *,
                 season: SEASON | str = SEASON.SUMMER, record_ids: Sequence[str] = (),
                 training_time: Optional[float] = None, bin_width: float = DEFAULT_BIN_WIDTH,
                 threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    errs = percentage_errors(actuals, forecasts)
    ids = tuple(str(r) for r in record_ids) or tuple(str(i) for i in range(errs.size))
    if len(ids) != errs.size:
        raise ShapeError(f"{len(ids)} record ids for {errs.size} records")
    return EvalReport(
        label=label,
        season=SEASON(season),
        record_ids=ids,
        errors=tuple(float(e) for e in errs),
        mape=float(np.mean(errs)),
        cumulative_within=cumulative_within(errs, threshold),
        histogram=error_histogram(errs, bin_width),
        threshold=float(threshold),
        training_time_seconds=training_time,
    )


def render_text(report: EvalReport) -> str:
    lines = [
        f"model     {report.label}",
        f"season    {report.season.value}",
        f"records   {report.n_records}",
        f"MAPE(%)   {report.mape:.4f}",
        f"<= {report.threshold:g}%   {report.cumulative_within:.2f}",
    ]
    if report.training_time_seconds is not None:
        lines.append(f"train(s)  {report.training_time_seconds:.3f}")
    lines.append("")
    lines.append(f"{'bin (%)':>16}  count")
    edges = report.histogram.edges
    for i, count in enumerate(report.histogram.counts):
        span = f"[{edges[i]:g}, {edges[i + 1]:g})"
        lines.append(f"{span:>16}  {count}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: EvalReport) -> Dict[str, object]:
    data = asdict(report)
    data["season"] = report.season.value
    data["histogram"] = {"bin_width": report.histogram.bin_width,
                         "counts": list(report.histogram.counts),
                         "empty": report.histogram.empty}
    data["record_ids"] = list(report.record_ids)
    data["errors"] = list(report.errors)
    return data


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> EvalReport:
    try:
        data = json.loads(text)
        hist = data["histogram"]
        return EvalReport(
            label=str(data["label"]),
            season=SEASON(data["season"]),
            record_ids=tuple(data["record_ids"]),
            errors=tuple(float(e) for e in data["errors"]),
            mape=float(data["mape"]),
            cumulative_within=float(data["cumulative_within"]),
            histogram=Histogram(float(hist["bin_width"]), tuple(int(c) for c in hist["counts"]),
                                bool(hist.get("empty", False))),
            threshold=float(data.get("threshold", DEFAULT_THRESHOLD)),
            training_time_seconds=data.get("training_time_seconds"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed report document: {exc}") from exc


# ---------------------------------------------------------------------------
# Comparison grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonGrid:
    labels: Tuple[str, ...]
    seasons: Tuple[SEASON, ...]
    cells: Mapping[Tuple[str, SEASON], float] = field(default_factory=dict)

    def best(self, season: SEASON) -> Optional[str]:
        scored = [(self.cells[(label, season)], label) for label in self.labels if (label, season) in self.cells]
        return min(scored)[1] if scored else None


def compare_reports(reports: Iterable[EvalReport]) -> ComparisonGrid:
    """Model x season MAPE grid; a (model, season) pair may appear once."""
    cells: Dict[Tuple[str, SEASON], float] = {}
    for report in reports:
        key = (report.label, report.season)
        if key in cells:
            raise ConsistencyError(f"two reports for model {report.label!r} in {report.season.value}")
        cells[key] = report.mape
    labels = tuple(sorted({label for label, _ in cells}))
    seasons = tuple(s for s in SEASON if any(season is s for _, season in cells))
    return ComparisonGrid(labels, seasons, cells)


def render_comparison(grid: ComparisonGrid) -> str:
    width = max([len("model"), *(len(label) for label in grid.labels)])
    header = f"{'model':<{width}}" + "".join(f"  {s.value + ' MAPE(%)':>16}" for s in grid.seasons)
    lines = [header, "-" * len(header)]
    best = {s: grid.best(s) for s in grid.seasons}
    for label in grid.labels:
        row = f"{label:<{width}}"
        for season in grid.seasons:
            value = grid.cells.get((label, season))
            cell = "-" if value is None else f"{value:.2f}" + ("*" if best[season] == label else "")
            row += f"  {cell:>16}"
        lines.append(row)
    return "\n".join(lines) + "\n"
