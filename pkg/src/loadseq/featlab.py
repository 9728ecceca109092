"""Feature engineering: load composition, virtual feeders, min-max scaling and PCA."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .debug import log
from .errors import ConsistencyError, DomainError, ShapeError
from .model import SEASON

COMPOSITION_TOL = 1e-9


@dataclass(frozen=True)
class FeederYearRecord:
    feeder_id: str
    year: int
    peak_demand: float
    residential_pct: float
    commercial_pct: float
    large_customer_net_change: float = 0.0
    der_growth: Optional[float] = None
    ev_growth: Optional[float] = None
    season: SEASON = SEASON.SUMMER

    def __post_init__(self) -> None:
        object.__setattr__(self, "feeder_id", str(self.feeder_id))
        object.__setattr__(self, "year", int(self.year))
        object.__setattr__(self, "season", SEASON(self.season))
        if not self.peak_demand > 0:
            raise DomainError(f"feeder {self.feeder_id} year {self.year}: peak_demand must be > 0, got {self.peak_demand}")
        for name in ("residential_pct", "commercial_pct"):
            value = getattr(self, name)
            if not -COMPOSITION_TOL <= value <= 1.0 + COMPOSITION_TOL:
                raise DomainError(f"feeder {self.feeder_id} year {self.year}: {name}={value} outside [0, 1]")
        if self.residential_pct + self.commercial_pct > 1.0 + COMPOSITION_TOL:
            raise ConsistencyError(
                f"feeder {self.feeder_id} year {self.year}: residential + commercial share exceeds 1"
            )
        for name in ("der_growth", "ev_growth"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise DomainError(f"feeder {self.feeder_id} year {self.year}: {name} must be nonnegative")

    @property
    def industrial_pct(self) -> float:
        return 1.0 - self.residential_pct - self.commercial_pct


@dataclass(frozen=True)
class RegionalYearRecord:
    """Top-down drivers for one region-year.

    ``econ`` holds the economic/population columns by name; ``components`` is
    filled once a PCA transform has been applied.
    """
    year: int
    econ: Mapping[str, float]
    temperature: float
    temperature_change: Optional[float] = None
    components: Tuple[float, ...] = ()
    season: SEASON = SEASON.SUMMER

    def __post_init__(self) -> None:
        object.__setattr__(self, "year", int(self.year))
        object.__setattr__(self, "econ", dict(self.econ))
        object.__setattr__(self, "season", SEASON(self.season))

    def econ_vector(self, columns: Sequence[str]) -> np.ndarray:
        missing = [c for c in columns if c not in self.econ]
        if missing:
            raise ConsistencyError(f"regional year {self.year} lacks columns {missing}")
        return np.array([float(self.econ[c]) for c in columns])


@dataclass(frozen=True)
class TransferEvent:
    year: int
    feeder_ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        ids = tuple(str(f) for f in self.feeder_ids)
        object.__setattr__(self, "feeder_ids", ids)
        if len(ids) < 2:
            raise DomainError(f"transfer event in {self.year} needs at least 2 feeders, got {list(ids)}")
        if len(set(ids)) != len(ids):
            raise DomainError(f"transfer event in {self.year} lists a feeder twice: {list(ids)}")


# ---------------------------------------------------------------------------
# Load composition and virtual feeders
# ---------------------------------------------------------------------------

def load_composition(feeder_peak: float, residential_loads: Iterable[float],
                     commercial_loads: Iterable[float]) -> Tuple[float, float, float]:
    """Residential/commercial shares of the feeder peak; industrial is the residual."""
    if not feeder_peak > 0:
        raise DomainError(f"feeder_peak must be > 0, got {feeder_peak}")
    res = float(np.sum(np.asarray(list(residential_loads), dtype=np.float64)))
    com = float(np.sum(np.asarray(list(commercial_loads), dtype=np.float64)))
    if res + com > feeder_peak * (1.0 + COMPOSITION_TOL):
        raise ConsistencyError(
            f"residential ({res}) + commercial ({com}) loads exceed the feeder peak {feeder_peak}"
        )
    r = res / feeder_peak
    c = com / feeder_peak
    return r, c, 1.0 - r - c


def virtual_feeder_id(feeder_ids: Iterable[str]) -> str:
    return "V:" + "+".join(sorted(str(f) for f in feeder_ids))


def _mean_optional(values: List[Optional[float]], name: str) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    if len(present) != len(values):
        raise ConsistencyError(f"{name} is present for some virtual-feeder members but not others")
    return float(np.sum(present)) / len(values)


def build_virtual_feeder(members: Sequence[FeederYearRecord]) -> FeederYearRecord:
    """Average the members of a transfer group into one record.

    Peak, large-customer change and DER/EV growth are plain means; residential
    and commercial shares are peak-weighted.
    """
    p = len(members)
    if p < 2:
        raise DomainError(f"a virtual feeder needs at least 2 members, got {p}")
    years = {m.year for m in members}
    if len(years) != 1:
        raise ConsistencyError(f"virtual-feeder members span several years: {sorted(years)}")
    seasons = {m.season for m in members}
    if len(seasons) != 1:
        raise ConsistencyError("virtual-feeder members mix seasons")
    ordered = sorted(members, key=lambda m: m.feeder_id)
    peaks = np.array([m.peak_demand for m in ordered])
    total = float(np.sum(peaks))
    p_v = total / p
    r_v = float(np.sum(np.array([m.residential_pct for m in ordered]) * peaks)) / total
    c_v = float(np.sum(np.array([m.commercial_pct for m in ordered]) * peaks)) / total
    return FeederYearRecord(
        feeder_id=virtual_feeder_id(m.feeder_id for m in ordered),
        year=ordered[0].year,
        peak_demand=p_v,
        residential_pct=r_v,
        commercial_pct=c_v,
        large_customer_net_change=float(np.sum([m.large_customer_net_change for m in ordered])) / p,
        der_growth=_mean_optional([m.der_growth for m in ordered], "der_growth"),
        ev_growth=_mean_optional([m.ev_growth for m in ordered], "ev_growth"),
        season=ordered[0].season,
    )


def transfer_groups(events: Sequence[TransferEvent]) -> List[Tuple[str, ...]]:
    """Connected components of feeders linked by any transfer event."""
    parent: Dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for event in events:
        for fid in event.feeder_ids:
            parent.setdefault(fid, fid)
        root = find(event.feeder_ids[0])
        for fid in event.feeder_ids[1:]:
            other = find(fid)
            if other != root:
                lo, hi = sorted((root, other))
                parent[hi] = lo
                root = lo
    groups: Dict[str, List[str]] = {}
    for fid in parent:
        groups.setdefault(find(fid), []).append(fid)
    return sorted(tuple(sorted(g)) for g in groups.values())


def resolve_virtual_feeders(feeder_years: Sequence[FeederYearRecord],
                            transfer_log: Sequence[TransferEvent]) -> List[FeederYearRecord]:
    """Replace every transfer group by one virtual feeder per commonly covered year."""
    by_feeder: Dict[str, Dict[int, FeederYearRecord]] = {}
    for rec in feeder_years:
        by_feeder.setdefault(rec.feeder_id, {})[rec.year] = rec

    replaced = set()
    out: List[FeederYearRecord] = []
    for group in transfer_groups(transfer_log):
        present = [fid for fid in group if fid in by_feeder]
        absent = [fid for fid in group if fid not in by_feeder]
        if absent:
            log("WARN", f"transfer log names feeders with no history: {absent}")
        if len(present) < 2:
            continue
        common = set.intersection(*(set(by_feeder[fid]) for fid in present))
        dropped = set.union(*(set(by_feeder[fid]) for fid in present)) - common
        if dropped:
            log("INFO", f"virtual feeder {virtual_feeder_id(present)} drops years {sorted(dropped)} "
                        "not covered by every member")
        for year in sorted(common):
            out.append(build_virtual_feeder([by_feeder[fid][year] for fid in present]))
        replaced.update(present)

    out.extend(rec for rec in feeder_years if rec.feeder_id not in replaced)
    return sorted(out, key=lambda r: (r.feeder_id, r.year))


# ---------------------------------------------------------------------------
# Min-max normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray
    columns: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        lo = np.array(self.minimum, dtype=np.float64).reshape(-1)
        hi = np.array(self.maximum, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ShapeError(f"min {lo.shape} and max {hi.shape} differ")
        if np.any(hi < lo):
            raise ConsistencyError("normalization max below min")
        if self.columns and len(self.columns) != lo.size:
            raise ShapeError(f"{len(self.columns)} column names for {lo.size} columns")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def width(self) -> int:
        return int(self.minimum.size)

    @property
    def degenerate(self) -> np.ndarray:
        return self.maximum == self.minimum


def _as_matrix(matrix, name: str = "feature matrix") -> np.ndarray:
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {X.shape}")
    return X


def fit_normalizer(feature_matrix, columns: Sequence[str] = ()) -> NormalizationStats:
    X = _as_matrix(feature_matrix)
    if X.shape[0] == 0:
        raise DomainError("cannot fit a normalizer on an empty matrix")
    stats = NormalizationStats(X.min(axis=0), X.max(axis=0), tuple(columns))
    if np.any(stats.degenerate):
        names = [columns[i] if columns else str(i) for i in np.flatnonzero(stats.degenerate)]
        log("INFO", f"degenerate normalization columns (map to 0): {names}")
    return stats


def _check_width(stats: NormalizationStats, X: np.ndarray) -> None:
    if X.shape[1] != stats.width:
        raise ShapeError(f"matrix has {X.shape[1]} columns, normalizer was fitted on {stats.width}")


def apply_normalizer(stats: NormalizationStats, feature_matrix) -> np.ndarray:
    """Map each column to (x - min) / (max - min); degenerate columns map to 0."""
    X = _as_matrix(feature_matrix)
    _check_width(stats, X)
    span = stats.maximum - stats.minimum
    safe = np.where(stats.degenerate, 1.0, span)
    return np.where(stats.degenerate, 0.0, (X - stats.minimum) / safe)


def invert_normalizer(stats: NormalizationStats, normalized) -> np.ndarray:
    X = _as_matrix(normalized)
    _check_width(stats, X)
    return X * (stats.maximum - stats.minimum) + stats.minimum


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PcaTransform:
    column_means: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    selected_count: int

    def __post_init__(self) -> None:
        means = np.array(self.column_means, dtype=np.float64).reshape(-1)
        P = np.array(self.components, dtype=np.float64)
        lam = np.array(self.eigenvalues, dtype=np.float64).reshape(-1)
        k = means.size
        if P.shape != (k, k) or lam.shape != (k,):
            raise ShapeError(f"PCA of width {k} got components {P.shape} and eigenvalues {lam.shape}")
        if not 1 <= int(self.selected_count) <= k:
            raise DomainError(f"selected_count must lie in [1, {k}], got {self.selected_count}")
        for arr in (means, P, lam):
            arr.setflags(write=False)
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "components", P)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "selected_count", int(self.selected_count))

    @property
    def width(self) -> int:
        return int(self.column_means.size)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v


def fit_pca(feature_matrix, selected_count: Optional[int] = None,
            pve_threshold: Optional[float] = None) -> PcaTransform:
    """Eigendecomposition of XᵀX for the mean-shifted matrix X.

    Components are ordered by descending eigenvalue (ties broken by the
    component entries) and signed so their largest-magnitude entry is positive.
    ``selected_count`` wins over ``pve_threshold``; with neither, all components
    are kept.
    """
    X = _as_matrix(feature_matrix)
    if X.shape[0] < 2:
        raise DomainError(f"PCA needs at least 2 rows, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise DomainError("PCA needs at least one column")
    means = X.mean(axis=0)
    Xc = X - means
    lam, vecs = np.linalg.eigh(Xc.T @ Xc)
    lam = np.where(lam < 0.0, 0.0, lam)
    cols = [_fix_sign(vecs[:, j]) for j in range(vecs.shape[1])]
    order = sorted(range(len(cols)), key=lambda j: (-lam[j], tuple(cols[j])))
    P = np.column_stack([cols[j] for j in order])
    lam = lam[order]
    k = X.shape[1]
    transform = PcaTransform(means, P, lam, k)
    if selected_count is not None:
        return replace(transform, selected_count=selected_count)
    if pve_threshold is not None:
        return replace(transform, selected_count=select_component_count(transform, pve_threshold))
    return transform


def proportion_variance_explained(transform: PcaTransform, t: int) -> float:
    k = transform.width
    if not 1 <= t <= k:
        raise DomainError(f"t must lie in [1, {k}], got {t}")
    total = float(np.sum(transform.eigenvalues))
    if total <= 0.0:
        raise DomainError("all eigenvalues are zero (constant data); PVE is undefined")
    if t == k:
        return 1.0
    return float(np.sum(transform.eigenvalues[:t])) / total


def select_component_count(transform: PcaTransform, pve_threshold: float = 0.95) -> int:
    """Smallest t whose PVE reaches *pve_threshold*."""
    if not 0.0 < pve_threshold <= 1.0:
        raise DomainError(f"pve_threshold must lie in (0, 1], got {pve_threshold}")
    if float(np.sum(transform.eigenvalues)) <= 0.0:
        log("WARN", "economic columns are constant; keeping a single principal component")
        return 1
    for t in range(1, transform.width + 1):
        if proportion_variance_explained(transform, t) >= pve_threshold:
            return t
    return transform.width


def project_pca(transform: PcaTransform, feature_matrix) -> np.ndarray:
    """Mean-shift, rotate onto the principal axes and keep the selected columns."""
    X = np.asarray(feature_matrix, dtype=np.float64)
    single = X.ndim == 1
    X = _as_matrix(X[None, :] if single else X)
    if X.shape[1] != transform.width:
        raise ShapeError(f"matrix has {X.shape[1]} columns, PCA was fitted on {transform.width}")
    T = (X - transform.column_means) @ transform.components[:, :transform.selected_count]
    return T[0] if single else T


# ---------------------------------------------------------------------------
# Regional helpers
# ---------------------------------------------------------------------------

def temperature_changes(records: Sequence[RegionalYearRecord]) -> List[RegionalYearRecord]:
    """Fill ``temperature_change`` from the preceding calendar year; None without one."""
    ordered = sorted(records, key=lambda r: r.year)
    by_year = {r.year: r for r in ordered}
    if len(by_year) != len(ordered):
        raise ConsistencyError("regional history lists a year twice")
    out = []
    for rec in ordered:
        prev = by_year.get(rec.year - 1)
        change = None if prev is None else rec.temperature - prev.temperature
        out.append(replace(rec, temperature_change=change))
    return out


def attach_components(records: Sequence[RegionalYearRecord], columns: Sequence[str],
                      stats: NormalizationStats, transform: PcaTransform) -> List[RegionalYearRecord]:
    """Normalize each year's economic columns and store its principal-component scores."""
    if not records:
        return []
    raw = np.stack([r.econ_vector(columns) for r in records])
    scores = project_pca(transform, apply_normalizer(stats, raw))
    return [replace(r, components=tuple(float(v) for v in row)) for r, row in zip(records, scores)]
