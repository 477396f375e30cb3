"""Orchestration: chronological splits, training with early stopping,
regression/classification evaluation, the weekly adaptive loop and seasonal
reporting."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (NormalizationSpec, Season, classify_level, denormalize,
                   season_of_month)
from .features import TARGET_POLLUTANTS, FeatureSchema, WindowSample
from .ingest import POLLUTANT_FIELDS, StationDataset
from .nn.model import (ModelConfig, ModelParams, clip_gradients, forward_full,
                       group_softmax, init_model, loss_and_grads, loss_value)
from .nn.optim import AdamState, adam_step

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, message: str, last_finite_epoch: int):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    n_val: int
    n_test: int

    @property
    def train(self) -> slice:
        return slice(0, self.n_train)

    @property
    def val(self) -> slice:
        return slice(self.n_train, self.n_train + self.n_val)

    @property
    def test(self) -> slice:
        return slice(self.n_train + self.n_val, self.n_train + self.n_val + self.n_test)


def split_dataset(n_samples: int) -> SplitSpec:
    """Chronological 64/16/20 split by floor, remainder to test."""
    if n_samples < 10:
        raise ValueError(f"need at least 10 samples to split, got {n_samples}")
    n_train = int(np.floor(0.64 * n_samples))
    n_val = int(np.floor(0.16 * n_samples))
    return SplitSpec(n_train, n_val, n_samples - n_train - n_val)


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 0.001
    max_epochs: int = 200
    patience: int = 10
    grad_clip: float = 5.0
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


def stack_samples(samples: Sequence[WindowSample], task: str
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(n, W, F) inputs plus flat regression targets or (n, H, 3) class
    targets."""
    X = np.stack([s.inputs for s in samples])
    if task == "regression":
        Y = np.stack([s.targets_regression.ravel() for s in samples])
    else:
        Y = np.stack([s.targets_class for s in samples])
    return X, Y


def _dataset_loss(params: ModelParams, X: np.ndarray, Y: np.ndarray) -> float:
    out, _ = forward_full(X, params, mode="eval")
    return loss_value(out, Y, params)


def train(samples: Sequence[WindowSample], split: SplitSpec,
          model_config: ModelConfig, train_config: TrainConfig,
          schema: FeatureSchema, normalizer: NormalizationSpec,
          initial: Optional[ModelParams] = None
          ) -> tuple[ModelParams, list[dict]]:
    """Mini-batch Adam with seeded per-epoch shuffling and early stopping on
    validation loss; returns the best-validation weights and the per-epoch
    history. ``initial`` warm-starts instead of fresh initialization."""
    train_config.validate()
    task = model_config.task
    X, Y = stack_samples(samples, task)
    Xtr, Ytr = X[split.train], Y[split.train]
    Xval, Yval = X[split.val], Y[split.val]
    if len(Xtr) == 0:
        raise ValueError("empty training split")

    rng = np.random.default_rng(train_config.seed)
    if initial is None:
        params = init_model(model_config, schema, rng, normalizer)
    else:
        params = initial.copy()
    opt = AdamState(alpha=train_config.learning_rate)

    history: list[dict] = []
    best_val = np.inf
    best_params = params.copy()
    best_epoch = -1
    stall = 0
    for epoch in range(train_config.max_epochs):
        perm = rng.permutation(len(Xtr))
        for start in range(0, len(Xtr), train_config.batch_size):
            idx = perm[start:start + train_config.batch_size]
            loss, grads = loss_and_grads(params, Xtr[idx], Ytr[idx],
                                         mode="train", rng=rng)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}", last_finite_epoch=epoch - 1)
            grads = clip_gradients(grads, train_config.grad_clip)
            adam_step(params, grads, opt)
        train_loss = _dataset_loss(params, Xtr, Ytr)
        val_loss = (_dataset_loss(params, Xval, Yval)
                    if len(Xval) else train_loss)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise DivergenceError(
                f"non-finite loss at epoch {epoch}", last_finite_epoch=epoch - 1)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= train_config.patience:
                break
    log.debug("training stopped after %d epochs (best epoch %d, val %.6g)",
              len(history), best_epoch, best_val)
    return best_params, history


def history_to_csv(history: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write("epoch,train_loss,val_loss\n")
    for row in history:
        buf.write(f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    task: str
    # keyed (target_field, horizon)
    cells: dict[tuple[str, int], dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "cells": [
                {"pollutant": t, "horizon": h, **metrics}
                for (t, h), metrics in sorted(self.cells.items())
            ],
        }

    def to_csv(self) -> str:
        rows = self.to_dict()["cells"]
        keys = sorted({k for r in rows for k in r if k not in ("pollutant", "horizon")})
        buf = io.StringIO()
        buf.write(",".join(["pollutant", "horizon"] + keys) + "\n")
        for r in rows:
            cols = [str(r["pollutant"]), str(r["horizon"])]
            cols += [repr(r[k]) if isinstance(r.get(k), float) else str(r.get(k, ""))
                     for k in keys]
            buf.write(",".join(cols) + "\n")
        return buf.getvalue()


def rmse(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(truth)) ** 2)))


def r2_standard(pred: np.ndarray, truth: np.ndarray) -> Optional[float]:
    """1 - SS_res/SS_tot; None when the targets have zero variance."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    return 1.0 - float(np.sum((pred - truth) ** 2)) / ss_tot


def r2_ratio(pred: np.ndarray, truth: np.ndarray) -> Optional[float]:
    """Ratio of explained to total dispersion around the observed mean."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    denom = float(np.sum((truth - truth.mean()) ** 2))
    if denom == 0.0:
        return None
    return float(np.sum((pred - truth.mean()) ** 2)) / denom


def predict_regression(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Raw head outputs clamped to [0,1] (the trained target domain)."""
    out, _ = forward_full(X, params, mode="eval")
    return np.clip(out, 0.0, 1.0)


def predict_classes(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """(n, H, 3) class predictions from the classification head."""
    out, _ = forward_full(X, params, mode="eval")
    probs = group_softmax(out, params.head_layout)
    layout = params.head_layout
    n = len(out)
    pred = np.empty((n, layout.n_horizons, len(layout.targets)), dtype=int)
    for hi, pi, sl in layout.group_slices:
        pred[:, hi, pi] = np.argmax(probs[:, sl], axis=1)
    return pred


def evaluate_regression(params: ModelParams,
                        samples: Sequence[WindowSample]) -> EvalReport:
    """RMSE and both determination coefficients on denormalized
    concentrations, per pollutant per horizon."""
    if len(samples) < 2:
        raise ValueError("need at least 2 test samples")
    schema = params.schema
    normalizer = params.normalizer
    X, Y = stack_samples(samples, "regression")
    pred = predict_regression(params, X)
    report = EvalReport(task="regression")
    H, P = len(schema.horizons), len(schema.targets)
    pred = pred.reshape(-1, H, P)
    truth = Y.reshape(-1, H, P)
    for pi, fname in enumerate(schema.targets):
        entry = normalizer.ranges[fname]
        for hi, horizon in enumerate(schema.horizons):
            p = np.array([denormalize(v, entry) for v in pred[:, hi, pi]])
            t = np.array([denormalize(v, entry) for v in truth[:, hi, pi]])
            r2 = r2_standard(p, t)
            ratio = r2_ratio(p, t)
            report.cells[(fname, horizon)] = {
                "rmse": rmse(p, t),
                "r2": r2,
                "r2_ratio": ratio,
                "flags": [] if r2 is not None else ["zero_variance_targets"],
            }
    return report


def _classification_cell(pred: np.ndarray, truth: np.ndarray,
                         k: int) -> dict:
    """Accuracy plus per-class precision/recall/F1 from the confusion
    matrix; zero-denominator metrics report 0 with a flag."""
    n = len(truth)
    confusion = np.zeros((k, k), dtype=int)
    for t, p in zip(truth, pred):
        confusion[t, p] += 1
    accuracy = float(np.trace(confusion)) / n
    per_class = []
    flags = []
    for c in range(k):
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum() - tp)
        fn = int(confusion[c, :].sum() - tp)
        if tp + fp == 0:
            precision = 0.0
            flags.append(f"class{c}_precision_undefined")
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall = 0.0
            flags.append(f"class{c}_recall_undefined")
        else:
            recall = tp / (tp + fn)
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class.append({"class": c, "tp": tp, "fp": fp, "fn": fn,
                          "precision": precision, "recall": recall, "f1": f1})
    return {
        "n": n,
        "accuracy": accuracy,
        "macro_precision": float(np.mean([c["precision"] for c in per_class])),
        "macro_recall": float(np.mean([c["recall"] for c in per_class])),
        "macro_f1": float(np.mean([c["f1"] for c in per_class])),
        "per_class": per_class,
        "confusion": confusion.tolist(),
        "flags": flags,
    }


def _class_report(pred: np.ndarray, truth: np.ndarray,
                  schema: FeatureSchema) -> EvalReport:
    from .core import n_classes as ncls
    report = EvalReport(task="classification")
    for pi, fname in enumerate(schema.targets):
        k = ncls(TARGET_POLLUTANTS[pi])
        for hi, horizon in enumerate(schema.horizons):
            report.cells[(fname, horizon)] = _classification_cell(
                pred[:, hi, pi], truth[:, hi, pi], k)
    return report


def evaluate_classification(params: ModelParams,
                            samples: Sequence[WindowSample]) -> EvalReport:
    if len(samples) < 1:
        raise ValueError("need at least 1 test sample")
    X, Yc = stack_samples(samples, "classification")
    pred = predict_classes(params, X)
    return _class_report(pred, Yc, params.schema)


def classify_from_regressor(params: ModelParams,
                            samples: Sequence[WindowSample]) -> EvalReport:
    """Denormalize regression predictions, band them into levels and score
    them as a classifier."""
    if params.config.task != "regression":
        raise ValueError("classify_from_regressor needs a regression model")
    schema = params.schema
    X, _ = stack_samples(samples, "regression")
    truth = np.stack([s.targets_class for s in samples])
    out = predict_regression(params, X)
    H, P = len(schema.horizons), len(schema.targets)
    out = out.reshape(-1, H, P)
    pred = np.empty_like(truth)
    for pi, fname in enumerate(schema.targets):
        entry = params.normalizer.ranges[fname]
        kind = TARGET_POLLUTANTS[pi]
        for hi in range(H):
            for si in range(out.shape[0]):
                conc = max(denormalize(out[si, hi, pi], entry), 0.0)
                pred[si, hi, pi] = classify_level(kind, conc).class_index
    return _class_report(pred, truth, schema)


# ---------------------------------------------------------------------------
# Adaptive loop


@dataclass
class PeriodRecord:
    period: int
    loss: float
    checkpoint: ModelParams


@dataclass
class OnlineState:
    current: ModelParams
    history: list[PeriodRecord] = field(default_factory=list)
    cursor: int = 0


@dataclass
class ComparativeReport:
    period_hours: int
    adaptive_rmse: list[float]
    frozen_rmse: list[float]

    def to_dict(self) -> dict:
        return {
            "period_hours": self.period_hours,
            "periods": [
                {"period": i, "adaptive_rmse": a, "frozen_rmse": f}
                for i, (a, f) in enumerate(zip(self.adaptive_rmse, self.frozen_rmse))
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("period,adaptive_rmse,frozen_rmse\n")
        for i, (a, f) in enumerate(zip(self.adaptive_rmse, self.frozen_rmse)):
            buf.write(f"{i},{a!r},{f!r}\n")
        return buf.getvalue()


def _period_rmse(params: ModelParams, samples: Sequence[WindowSample]) -> float:
    X, Y = stack_samples(samples, "regression")
    pred = predict_regression(params, X)
    return rmse(pred, Y)


def adaptive_run(initial: ModelParams, samples: Sequence[WindowSample],
                 anchors_hour_index: Sequence[int], initial_hours: int,
                 train_config: TrainConfig, *, period_hours: int = 168,
                 retrain_epochs: int = 20, warm_start: bool = True,
                 update_pool: bool = True, loss_guard: bool = True
                 ) -> tuple[OnlineState, ComparativeReport]:
    """Replay the stream period by period: forecast with the current model,
    record the suffered loss, grow the training pool and retrain.

    ``samples`` cover the whole timeline; ``anchors_hour_index`` gives each
    sample's anchor position on the hourly grid. Samples anchored before
    ``initial_hours`` form the starting pool. ``update_pool=False`` is the
    ablation switch: the model never sees stream data and must reproduce the
    frozen model's metrics. ``loss_guard`` rejects retrained weights that
    score worse than their warm start on the training pool.
    """
    if not samples:
        raise ValueError("no samples supplied")
    max_h = max(initial.schema.horizons)
    anchors = np.asarray(anchors_hour_index)
    last_anchor = int(anchors.max())
    n_periods = (last_anchor + max_h + 1 - initial_hours) // period_hours
    if n_periods < 1:
        raise ValueError("stream shorter than one period")

    state = OnlineState(current=initial.copy())
    frozen = initial.copy()
    adaptive_rmse: list[float] = []
    frozen_rmse: list[float] = []

    for p in range(n_periods):
        start = initial_hours + p * period_hours
        end = start + period_hours
        in_period = (anchors >= start) & (anchors < end)
        period_samples = [s for s, m in zip(samples, in_period) if m]
        if not period_samples:
            continue
        loss_p = _period_rmse(state.current, period_samples)
        adaptive_rmse.append(loss_p)
        frozen_rmse.append(_period_rmse(frozen, period_samples))
        state.history.append(PeriodRecord(p, loss_p, state.current.copy()))
        state.cursor = end

        # Pool: every sample whose targets are fully observed by period end.
        if update_pool:
            pool_mask = anchors + max_h < end
        else:
            pool_mask = anchors + max_h < initial_hours
        pool = [s for s, m in zip(samples, pool_mask) if m]
        if len(pool) < 10:
            continue
        if not update_pool:
            # Ablation: nothing new to learn from, keep the model as is.
            continue
        retrain_config = TrainConfig(
            batch_size=train_config.batch_size,
            learning_rate=train_config.learning_rate,
            max_epochs=retrain_epochs,
            patience=train_config.patience,
            grad_clip=train_config.grad_clip,
            seed=train_config.seed + p + 1,
        )
        split = split_dataset(len(pool))
        # Fold test into train for retraining: all past data is fair game.
        split = SplitSpec(split.n_train + split.n_test, split.n_val, 0)
        pool_sorted = list(pool)
        warm = state.current if warm_start else None
        candidate, _hist = train(pool_sorted, split, initial.config,
                                 retrain_config, initial.schema,
                                 initial.normalizer, initial=warm)
        if loss_guard:
            Xp, Yp = stack_samples(pool_sorted, initial.config.task)
            before = _dataset_loss(state.current, Xp, Yp)
            after = _dataset_loss(candidate, Xp, Yp)
            if after <= before:
                state.current = candidate
        else:
            state.current = candidate

    report = ComparativeReport(period_hours, adaptive_rmse, frozen_rmse)
    return state, report


# ---------------------------------------------------------------------------
# Seasonal reporting


def seasonal_summary(dataset: StationDataset) -> dict[str, dict[str, dict]]:
    """Per-season, per-pollutant mean concentration and sample count;
    missing values excluded, empty seasons omitted."""
    seasons_present = {season_of_month(o.timestamp.month) for o in dataset.observations}
    if len(seasons_present) < 2:
        raise ValueError("dataset must span at least 2 seasons")
    matrix = dataset.to_matrix()
    season_rows: dict[Season, list[int]] = {}
    for i, obs in enumerate(dataset.observations):
        season_rows.setdefault(season_of_month(obs.timestamp.month), []).append(i)
    out: dict[str, dict[str, dict]] = {}
    for season in Season:
        rows = season_rows.get(season)
        if not rows:
            continue
        sub = matrix[rows]
        entry = {}
        for j, fname in enumerate(POLLUTANT_FIELDS):
            col = sub[:, j]
            ok = ~np.isnan(col)
            entry[fname] = {
                "mean": float(col[ok].mean()) if ok.any() else None,
                "count": int(ok.sum()),
            }
        out[season.value] = entry
    return out


def seasonal_summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    buf.write("season,pollutant,mean,count\n")
    for season, entry in summary.items():
        for fname, stats in entry.items():
            mean = "" if stats["mean"] is None else repr(stats["mean"])
            buf.write(f"{season},{fname},{mean},{stats['count']}\n")
    return buf.getvalue()
