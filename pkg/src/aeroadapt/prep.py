"""Shared preprocessing path: normalization statistics from the training
block, [0,1] scaling, MICE completion and window building."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

from .core import NormalizationSpec, fit_normalizer, normalize
from .features import (TIME_FEATURES, FeatureSchema, WindowSample,
                       build_windows)
from .impute import ImputationReport, MiceConfig, mice_impute
from .ingest import FIELD_NAMES, StationDataset

TRAIN_FRACTION_HOURS = 0.8


def default_schema() -> FeatureSchema:
    return FeatureSchema(list(FIELD_NAMES) + list(TIME_FEATURES))


@dataclass
class PreparedData:
    station_id: str
    timestamps: list[datetime]
    values: np.ndarray           # (n, 11) normalized, completed
    normalizer: NormalizationSpec
    schema: FeatureSchema
    imputation: ImputationReport
    samples: list[WindowSample]


def fit_station_normalizer(matrix: np.ndarray,
                           train_hours: Optional[int] = None) -> NormalizationSpec:
    """Min/max per physical column from the chronological training block
    only (no test leakage); falls back to the full column when the block is
    entirely missing."""
    n = matrix.shape[0]
    if train_hours is None:
        train_hours = int(n * TRAIN_FRACTION_HOURS)
    columns = {}
    for j, name in enumerate(FIELD_NAMES):
        block = matrix[:train_hours, j]
        vals = block[~np.isnan(block)]
        if len(vals) == 0:
            full = matrix[:, j]
            vals = full[~np.isnan(full)]
        if len(vals) == 0:
            raise ValueError(f"column {name!r} has no observed values")
        columns[name] = vals.tolist()
    return fit_normalizer(columns)


def normalize_matrix(matrix: np.ndarray, normalizer: NormalizationSpec) -> np.ndarray:
    out = np.full_like(matrix, np.nan)
    for j, name in enumerate(FIELD_NAMES):
        entry = normalizer.ranges[name]
        col = matrix[:, j]
        ok = ~np.isnan(col)
        out[ok, j] = [normalize(v, entry) for v in col[ok]]
    return out


def prepare_station(dataset: StationDataset, *,
                    schema: Optional[FeatureSchema] = None,
                    normalizer: Optional[NormalizationSpec] = None,
                    mice_config: Optional[MiceConfig] = None,
                    build: bool = True) -> PreparedData:
    matrix = dataset.to_matrix()
    if normalizer is None:
        normalizer = fit_station_normalizer(matrix)
    scaled = normalize_matrix(matrix, normalizer)
    completed, report = mice_impute(scaled, mice_config or MiceConfig(),
                                    column_names=FIELD_NAMES)
    schema = schema or default_schema()
    timestamps = dataset.timestamps
    samples = (build_windows(completed, timestamps, schema, normalizer)
               if build else [])
    return PreparedData(dataset.station_id, timestamps, completed, normalizer,
                        schema, report, samples)
