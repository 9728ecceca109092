"""Fitted feature pipeline: raw step vectors in, network-ready vectors out.

Fitting order: economic columns are min-max scaled and reduced by PCA using
the training samples only; the engineered step columns are then min-max
scaled as a whole.  Targets share the scaling of the previous-year peak column.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .debug import log
from .errors import DomainError, ShapeError
from .featlab import (
    NormalizationStats,
    PcaTransform,
    apply_normalizer,
    fit_normalizer,
    fit_pca,
    project_pca,
    proportion_variance_explained,
)
from .seqdata import LEADING_COLUMNS, TRAILING_COLUMNS, FeatureSchema, SequenceSample

PEAK_COLUMN = 0


@dataclass(frozen=True, eq=False)
class FeaturePipeline:
    schema: FeatureSchema
    econ_stats: NormalizationStats
    pca: PcaTransform
    step_stats: NormalizationStats

    def __post_init__(self) -> None:
        if self.econ_stats.width != len(self.schema.econ_columns):
            raise ShapeError("economic normalizer width does not match the schema")
        if self.pca.width != len(self.schema.econ_columns):
            raise ShapeError("PCA width does not match the schema")
        if self.step_stats.width != self.input_width:
            raise ShapeError(
                f"step normalizer covers {self.step_stats.width} columns, pipeline emits {self.input_width}"
            )

    @property
    def raw_width(self) -> int:
        return len(self.schema.raw_columns())

    @property
    def input_width(self) -> int:
        return len(self.columns)

    @property
    def columns(self) -> Tuple[str, ...]:
        pcs = tuple(f"pc{i + 1}" for i in range(self.pca.selected_count))
        return (*LEADING_COLUMNS, *pcs, *TRAILING_COLUMNS, *self.schema.optional_feeder_features)

    def engineer_steps(self, raw) -> np.ndarray:
        """Swap the raw economic columns for their principal-component scores."""
        X = np.asarray(raw, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.raw_width:
            raise ShapeError(f"raw steps must have {self.raw_width} columns, got shape {X.shape}")
        econ = self.schema.econ_slice
        scores = project_pca(self.pca, apply_normalizer(self.econ_stats, X[:, econ]))
        return np.hstack([X[:, :econ.start], scores, X[:, econ.stop:]])

    def transform_steps(self, raw) -> np.ndarray:
        return apply_normalizer(self.step_stats, self.engineer_steps(raw))

    def normalize_targets(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        lo = self.step_stats.minimum[PEAK_COLUMN]
        span = self.step_stats.maximum[PEAK_COLUMN] - lo
        if span == 0.0:
            return np.zeros_like(v)
        return (v - lo) / span

    def denormalize_targets(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        lo = self.step_stats.minimum[PEAK_COLUMN]
        return v * (self.step_stats.maximum[PEAK_COLUMN] - lo) + lo

    def transform(self, samples: Sequence[SequenceSample]) -> List[SequenceSample]:
        return [
            replace(s, steps=self.transform_steps(s.steps),
                    targets=tuple(self.normalize_targets(s.targets).tolist()))
            for s in samples
        ]


def fit_pipeline(train_samples: Sequence[SequenceSample], schema: FeatureSchema) -> FeaturePipeline:
    if not train_samples:
        raise DomainError("cannot fit a feature pipeline without training samples")
    raw_width = len(schema.raw_columns())
    stacked = np.concatenate([s.steps for s in train_samples], axis=0)
    if stacked.shape[1] != raw_width:
        raise ShapeError(f"samples have {stacked.shape[1]} raw columns, schema declares {raw_width}")

    # one row per distinct economic vintage, so long-lived feeders do not weight the fit
    econ_rows = np.unique(stacked[:, schema.econ_slice], axis=0)
    econ_stats = fit_normalizer(econ_rows, schema.econ_columns)
    normalized = apply_normalizer(econ_stats, econ_rows)
    if schema.n_components is not None:
        pca = fit_pca(normalized, selected_count=schema.n_components)
    else:
        pca = fit_pca(normalized, pve_threshold=schema.pve_threshold)
    if float(np.sum(pca.eigenvalues)) > 0.0:
        pve = proportion_variance_explained(pca, pca.selected_count)
        log("INFO", f"PCA keeps {pca.selected_count} of {pca.width} economic components (PVE {pve:.3f})")

    draft = FeaturePipeline(schema, econ_stats, pca, NormalizationStats(
        np.zeros(raw_width - len(schema.econ_columns) + pca.selected_count),
        np.zeros(raw_width - len(schema.econ_columns) + pca.selected_count),
    ))
    engineered = draft.engineer_steps(stacked)
    step_stats = fit_normalizer(engineered, draft.columns)
    return replace(draft, step_stats=step_stats)
