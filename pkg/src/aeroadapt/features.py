"""Feature ranking/selection and conversion of completed station data into
supervised window samples."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

from . import baselines
from .core import NormalizationSpec, PollutantKind, classify_level, denormalize
from .ingest import FIELD_NAMES

log = logging.getLogger(__name__)

TARGET_FIELDS = ["pm25", "pm10", "no2"]
TARGET_POLLUTANTS = [PollutantKind.PM2_5, PollutantKind.PM10, PollutantKind.NO2]
TIME_FEATURES = ["hour", "month"]
DEFAULT_HORIZONS = [4, 8, 12, 16, 20, 24]
DEFAULT_WINDOW = 24

RANKING_METHODS = ("forest_importance", "backward_elimination", "forward_construction")


@dataclass
class FeatureSchema:
    features: list[str]
    window: int = DEFAULT_WINDOW
    horizons: list[int] = field(default_factory=lambda: list(DEFAULT_HORIZONS))
    targets: list[str] = field(default_factory=lambda: list(TARGET_FIELDS))

    def __post_init__(self):
        if len(set(self.features)) != len(self.features):
            raise ValueError("duplicate feature names in schema")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def n_features(self) -> int:
        return len(self.features)

    def to_dict(self) -> dict:
        return {"features": list(self.features), "window": self.window,
                "horizons": list(self.horizons), "targets": list(self.targets)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(list(d["features"]), int(d["window"]),
                   [int(h) for h in d["horizons"]], list(d["targets"]))


@dataclass
class WindowSample:
    inputs: np.ndarray            # (W, F) in [0,1]
    targets_regression: np.ndarray  # (H, 3) normalized concentrations
    targets_class: np.ndarray       # (H, 3) int class indices
    anchor: datetime


def correlation_matrix(values: np.ndarray) -> np.ndarray:
    """Pearson correlations between columns; constant columns correlate 0
    with everything by convention (unit diagonal)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] < 2:
        raise ValueError("need at least 2 complete rows")
    n, p = values.shape
    std = values.std(axis=0)
    constant = std == 0
    if constant.any():
        log.warning("constant columns in correlation matrix: %s",
                    np.nonzero(constant)[0].tolist())
    corr = np.zeros((p, p))
    ok = ~constant
    if ok.any():
        sub = np.corrcoef(values[:, ok], rowvar=False)
        corr[np.ix_(ok, ok)] = np.atleast_2d(sub)
    np.fill_diagonal(corr, 1.0)
    return corr


def _ranking_design(values: np.ndarray, names: Sequence[str],
                    candidates: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Rows = candidate features at hour t, target = PM2.5 at t+4."""
    lead = 4
    cols = [list(names).index(f) for f in candidates]
    target_col = list(names).index("pm25")
    X = values[:-lead][:, cols]
    y = values[lead:, target_col]
    return X, y


def _val_rmse(X: np.ndarray, y: np.ndarray, cols: Sequence[int], seed: int) -> float:
    n = len(y)
    split = int(n * 0.75)
    config = baselines.ForestConfig(n_trees=15, max_depth=6, min_samples_leaf=2,
                                    seed=seed)
    forest = baselines.fit_random_forest(X[:split][:, cols], y[:split], config)
    pred = baselines.forest_predict(forest, X[split:][:, cols])
    return float(np.sqrt(np.mean((pred - y[split:]) ** 2)))


def rank_features(values: np.ndarray, names: Sequence[str],
                  method: str = "forest_importance", *, seed: int = 0,
                  candidates: Optional[Sequence[str]] = None
                  ) -> list[tuple[str, float]]:
    """Total order over candidate features, best first.

    forest_importance scores by Random Forest impurity decrease; the wrapper
    methods score by validation RMSE of a small forest predicting PM2.5 four
    hours ahead. All methods are deterministic given the seed, with ties
    broken by feature name.
    """
    if method not in RANKING_METHODS:
        raise ValueError(f"unknown ranking method {method!r}")
    if candidates is None:
        candidates = [f for f in names]
    # Canonical name order makes results independent of input column order.
    candidates = sorted(candidates)
    if len(candidates) < 2:
        raise ValueError("need at least 2 candidate features to rank")
    X, y = _ranking_design(values, names, candidates)

    if method == "forest_importance":
        config = baselines.ForestConfig(n_trees=30, max_depth=8,
                                        min_samples_leaf=2, seed=seed)
        forest = baselines.fit_random_forest(X, y, config)
        scores = baselines.feature_importance(forest)
        order = sorted(range(len(candidates)),
                       key=lambda i: (-scores[i], candidates[i]))
        return [(candidates[i], float(scores[i])) for i in order]

    if method == "backward_elimination":
        remaining = list(candidates)
        removed: list[tuple[str, float]] = []
        while len(remaining) > 1:
            trials = []
            for f in remaining:
                kept = [candidates.index(g) for g in remaining if g != f]
                trials.append((_val_rmse(X, y, kept, seed), f))
            rmse, worst = min(trials, key=lambda t: (t[0], t[1]))
            remaining.remove(worst)
            removed.append((worst, -rmse))
        survivor_rmse = _val_rmse(X, y, [candidates.index(remaining[0])], seed)
        removed.append((remaining[0], -survivor_rmse))
        return list(reversed(removed))

    # forward_construction
    selected: list[tuple[str, float]] = []
    chosen_idx: list[int] = []
    pool = list(candidates)
    while pool:
        trials = []
        for f in pool:
            cols = chosen_idx + [candidates.index(f)]
            trials.append((_val_rmse(X, y, cols, seed), f))
        rmse, best = min(trials, key=lambda t: (t[0], t[1]))
        pool.remove(best)
        chosen_idx.append(candidates.index(best))
        selected.append((best, -rmse))
    return selected


def select_features(ranked: Sequence[tuple[str, float]], corr: np.ndarray,
                    names: Sequence[str], *, redundancy_threshold: float = 0.95,
                    top_k: Optional[int] = None) -> FeatureSchema:
    """Greedily keep the highest-ranked features whose correlation with every
    already-kept feature stays below the threshold; hour and month time
    features are always appended."""
    names = list(names)
    top_k = top_k if top_k is not None else len(ranked)
    kept: list[str] = []
    for name, _score in ranked:
        if len(kept) >= top_k:
            break
        i = names.index(name)
        if any(abs(corr[i, names.index(k)]) >= redundancy_threshold for k in kept):
            continue
        kept.append(name)
    return FeatureSchema(kept + TIME_FEATURES)


def assemble_inputs(values: np.ndarray, timestamps: Sequence[datetime],
                    schema: FeatureSchema) -> np.ndarray:
    """(n, F) input matrix in schema feature order; values holds the
    normalized physical columns in FIELD_NAMES order."""
    n = len(timestamps)
    cols = []
    for name in schema.features:
        if name == "hour":
            cols.append(np.array([t.hour / 23.0 for t in timestamps]))
        elif name == "month":
            cols.append(np.array([(t.month - 1) / 11.0 for t in timestamps]))
        else:
            cols.append(values[:, FIELD_NAMES.index(name)])
    out = np.column_stack(cols)
    if out.shape != (n, schema.n_features):
        raise ValueError("input assembly shape mismatch")
    return out


def build_windows(values: np.ndarray, timestamps: Sequence[datetime],
                  schema: FeatureSchema, normalizer: NormalizationSpec
                  ) -> list[WindowSample]:
    """One sample per anchor hour t: inputs over [t-W+1, t], regression and
    class targets at t+4 ... t+24."""
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise ValueError("window building requires a completed (imputed) dataset")
    n = len(timestamps)
    W = schema.window
    max_h = max(schema.horizons)
    minimum = W + max_h
    if n < minimum:
        raise ValueError(f"dataset too short: {n} hours, need at least {minimum}")

    inputs_all = assemble_inputs(values, timestamps, schema)
    target_cols = [FIELD_NAMES.index(f) for f in schema.targets]
    target_norm = values[:, target_cols]

    samples = []
    for t in range(W - 1, n - max_h):
        inputs = inputs_all[t - W + 1:t + 1]
        reg = np.stack([target_norm[t + h] for h in schema.horizons])
        cls = np.empty_like(reg, dtype=int)
        for hi in range(reg.shape[0]):
            for pi, (fname, kind) in enumerate(zip(schema.targets, TARGET_POLLUTANTS)):
                conc = denormalize(reg[hi, pi], normalizer.ranges[fname])
                cls[hi, pi] = classify_level(kind, max(conc, 0.0)).class_index
        samples.append(WindowSample(inputs, reg, cls, timestamps[t]))
    return samples
