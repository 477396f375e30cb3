"""Command-line entry point: dataset plumbing, training, evaluation, the
adaptive simulation, one-shot forecasts, serving and reporting."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, config as cfgmod, pipeline, report as reportmod
from .core import NormalizationSpec
from .features import (RANKING_METHODS, FeatureSchema, correlation_matrix,
                       rank_features, select_features)
from .impute import MiceConfig
from .ingest import (FIELD_NAMES, ParseError, StationDataset, SyntheticConfig,
                     dataset_to_csv, generate_synthetic, parse_observations)
from .nn.checkpoint import (CheckpointError, deserialize_forest,
                            deserialize_model, serialize_forest,
                            serialize_model)
from .nn.model import ModelConfig
from .prep import default_schema, normalize_matrix, prepare_station

log = logging.getLogger(__name__)

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, default=None,
                   help="key=value config file")
    p.add_argument("--out", type=Path, default=Path("."),
                   help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="aeroadapt",
                     description="Adaptive air pollution forecasting")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--hours", type=int, default=2000)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--drift-start", type=int, default=None)
    p.add_argument("--drift-slope", type=float, default=0.0)
    p.add_argument("--station", default="synth-01")
    _add_common(p)

    p = sub.add_parser("ingest", help="parse a station CSV into canonical form")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("impute", help="fill missing values via chained regressions")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("features", help="rank and select input features")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--method", choices=RANKING_METHODS,
                   default="forest_importance")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("train", help="train a forecasting model")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--task", choices=["reg", "cls", "forest"], default="reg")
    p.add_argument("--station", default="station-01")
    p.add_argument("--schema", type=Path, default=None,
                   help="feature schema JSON from the features command")
    _add_common(p)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on held-out data")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("adapt", help="run the weekly adaptive simulation")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--initial-hours", type=int, required=True)
    p.add_argument("--period", type=int, default=168)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("forecast", help="one-shot forecast from a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True,
                   help="recent hours CSV (at least one window)")
    p.add_argument("--station", default="station-01")
    _add_common(p)

    p = sub.add_parser("serve", help="start the forecast endpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--buffer", type=Path, required=True)
    p.add_argument("--station", default="station-01")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--poll-interval", type=float, default=60.0)
    _add_common(p)

    p = sub.add_parser("report", help="seasonal summary, metric CSVs and charts")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--station", default="station-01")
    _add_common(p)

    return parser


def _load_dataset(path: Path, station: str) -> StationDataset:
    with path.open() as fh:
        dataset, issues = parse_observations(fh, station)
    for issue in issues:
        log.info("%s: %s", path.name, issue)
    return dataset


def _model_config_from(cfg: dict[str, str], task: str) -> ModelConfig:
    return ModelConfig(
        hidden_sizes=cfgmod.get_int_list(cfg, "hidden_sizes", [64]),
        attention_size=cfgmod.get_int(cfg, "attention_size", 32),
        bidirectional=cfgmod.get_bool(cfg, "bidirectional", True),
        use_attention=cfgmod.get_bool(cfg, "use_attention", True),
        dropout_rate=cfgmod.get_float(cfg, "dropout_rate", 0.2),
        task=task,
        literal_candidate=cfgmod.get_bool(cfg, "literal_candidate", False),
    )


def _train_config_from(cfg: dict[str, str], seed: int) -> pipeline.TrainConfig:
    return pipeline.TrainConfig(
        batch_size=cfgmod.get_int(cfg, "batch_size", 64),
        learning_rate=cfgmod.get_float(cfg, "learning_rate", 0.001),
        max_epochs=cfgmod.get_int(cfg, "max_epochs", 200),
        patience=cfgmod.get_int(cfg, "patience", 10),
        grad_clip=cfgmod.get_float(cfg, "grad_clip", 5.0),
        seed=seed,
    )


def _mice_config_from(cfg: dict[str, str], seed: int) -> MiceConfig:
    return MiceConfig(
        n_iterations=cfgmod.get_int(cfg, "mice_iterations", 10),
        convergence_tol=cfgmod.get_float(cfg, "mice_tol", 1e-4),
        seed=seed,
    )


def _prepare(args, cfg, schema=None, normalizer=None):
    dataset = _load_dataset(args.data, args.station)
    return prepare_station(dataset, schema=schema, normalizer=normalizer,
                           mice_config=_mice_config_from(cfg, args.seed))


def cmd_synth(args, cfg) -> int:
    synth_cfg = SyntheticConfig(
        n_hours=args.hours, seed=args.seed,
        missing_rate=args.missing_rate,
        drift_start_hour=args.drift_start, drift_slope=args.drift_slope,
        diurnal_amplitude=cfgmod.get_float(cfg, "diurnal_amplitude", 25.0),
        seasonal_amplitude=cfgmod.get_float(cfg, "seasonal_amplitude", 40.0),
        noise_std=cfgmod.get_float(cfg, "noise_std", 6.0),
        seasonal_phase_days=cfgmod.get_float(cfg, "seasonal_phase_days", 0.0),
        station_id=args.station,
    )
    masked, truth = generate_synthetic(synth_cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "dataset.csv").write_text(dataset_to_csv(masked))
    (args.out / "ground_truth.csv").write_text(dataset_to_csv(truth))
    print(f"wrote {args.out / 'dataset.csv'} ({args.hours} hours)")
    return 0


def cmd_ingest(args, cfg) -> int:
    dataset = _load_dataset(args.data, args.station)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "canonical.csv").write_text(dataset_to_csv(dataset))
    with args.data.open() as fh:
        _, issues = parse_observations(fh, args.station)
    (args.out / "issues.json").write_text(json.dumps(issues, indent=2))
    print(f"wrote {args.out / 'canonical.csv'} "
          f"({len(dataset)} hours, {len(issues)} issues)")
    return 0


def cmd_impute(args, cfg) -> int:
    prepared = _prepare(args, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "imputation_report.json").write_text(
        json.dumps(prepared.imputation.to_dict(), indent=2))
    # Completed matrix back in physical units.
    from .core import denormalize
    rows = ["timestamp," + ",".join(FIELD_NAMES)]
    for ts, row in zip(prepared.timestamps, prepared.values):
        cells = [ts.strftime("%Y-%m-%dT%H:%M")]
        for j, name in enumerate(FIELD_NAMES):
            cells.append(repr(denormalize(row[j], prepared.normalizer.ranges[name])))
        rows.append(",".join(cells))
    (args.out / "completed.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {args.out / 'completed.csv'}")
    return 0


def cmd_features(args, cfg) -> int:
    prepared = _prepare(args, cfg)
    ranked = rank_features(prepared.values, FIELD_NAMES, args.method,
                           seed=args.seed)
    corr = correlation_matrix(prepared.values)
    schema = select_features(
        ranked, corr, FIELD_NAMES,
        redundancy_threshold=cfgmod.get_float(cfg, "redundancy_threshold", 0.95),
        top_k=args.top_k)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "ranking.json").write_text(json.dumps(
        {"method": args.method, "ranked": [[n, s] for n, s in ranked]},
        indent=2))
    (args.out / "schema.json").write_text(json.dumps(schema.to_dict(), indent=2))
    print(f"wrote {args.out / 'schema.json'} ({len(schema.features)} features)")
    return 0


def _train_forest(prepared, args, cfg) -> int:
    schema = prepared.schema
    X = np.stack([s.inputs.ravel() for s in prepared.samples])
    forest_cfg = baselines.ForestConfig(
        n_trees=cfgmod.get_int(cfg, "n_trees", 50),
        max_depth=cfgmod.get_int(cfg, "max_depth", 12),
        min_samples_leaf=cfgmod.get_int(cfg, "min_samples_leaf", 2),
        seed=args.seed)
    split = pipeline.split_dataset(len(prepared.samples))
    args.out.mkdir(parents=True, exist_ok=True)
    for pi, fname in enumerate(schema.targets):
        y = np.array([s.targets_regression[0, pi] for s in prepared.samples])
        forest = baselines.fit_random_forest(X[split.train], y[split.train],
                                             forest_cfg)
        blob = serialize_forest(forest, schema, prepared.normalizer)
        (args.out / f"forest_{fname}.ckpt").write_bytes(blob)
    print(f"wrote forest checkpoints to {args.out}")
    return 0


def cmd_train(args, cfg) -> int:
    schema = None
    if args.schema is not None:
        schema = FeatureSchema.from_dict(json.loads(args.schema.read_text()))
    prepared = _prepare(args, cfg, schema=schema)
    if args.task == "forest":
        return _train_forest(prepared, args, cfg)
    task = "regression" if args.task == "reg" else "classification"
    model_cfg = _model_config_from(cfg, task)
    train_cfg = _train_config_from(cfg, args.seed)
    split = pipeline.split_dataset(len(prepared.samples))
    params, history = pipeline.train(prepared.samples, split, model_cfg,
                                     train_cfg, prepared.schema,
                                     prepared.normalizer)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "model.ckpt").write_bytes(serialize_model(params))
    (args.out / "history.csv").write_text(pipeline.history_to_csv(history))
    print(f"wrote {args.out / 'model.ckpt'} ({len(history)} epochs)")
    return 0


def cmd_evaluate(args, cfg) -> int:
    blob = args.checkpoint.read_bytes()
    args.out.mkdir(parents=True, exist_ok=True)
    result: dict = {}
    params = deserialize_model(blob)
    prepared = _prepare(args, cfg, schema=params.schema,
                        normalizer=params.normalizer)
    samples = prepared.samples
    if params.config.task == "regression":
        reg = pipeline.evaluate_regression(params, samples)
        cls = pipeline.classify_from_regressor(params, samples)
        result = {"regression": reg.to_dict(),
                  "levels_from_regressor": cls.to_dict()}
        (args.out / "regression.csv").write_text(reg.to_csv())
    else:
        cls = pipeline.evaluate_classification(params, samples)
        result = {"classification": cls.to_dict()}
    (args.out / "evaluation.json").write_text(json.dumps(result, indent=2))
    print(f"wrote {args.out / 'evaluation.json'}")
    return 0


def cmd_adapt(args, cfg) -> int:
    params = deserialize_model(args.checkpoint.read_bytes())
    prepared = _prepare(args, cfg, schema=params.schema,
                        normalizer=params.normalizer)
    W = params.schema.window
    anchors = [W - 1 + i for i in range(len(prepared.samples))]
    train_cfg = _train_config_from(cfg, args.seed)
    state, comparative = pipeline.adaptive_run(
        params, prepared.samples, anchors, args.initial_hours, train_cfg,
        period_hours=args.period,
        retrain_epochs=cfgmod.get_int(cfg, "retrain_epochs", 20))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "adaptive_report.json").write_text(
        json.dumps(comparative.to_dict(), indent=2))
    (args.out / "adaptive_report.csv").write_text(comparative.to_csv())
    (args.out / "model_adapted.ckpt").write_bytes(serialize_model(state.current))
    print(f"wrote {args.out / 'adaptive_report.json'} "
          f"({len(comparative.adaptive_rmse)} periods)")
    return 0


def cmd_forecast(args, cfg) -> int:
    from .server import build_forecast_response
    params = deserialize_model(args.checkpoint.read_bytes())
    dataset = _load_dataset(args.data, args.station)
    matrix = normalize_matrix(dataset.to_matrix(), params.normalizer)
    response = build_forecast_response(params, args.station,
                                       dataset.timestamps, matrix)
    text = json.dumps(response, indent=2, sort_keys=True)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "forecast.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_serve(args, cfg) -> int:
    from .server import serve
    serve(args.checkpoint, args.buffer, args.station, args.host, args.port,
          args.poll_interval)
    return 0


def cmd_report(args, cfg) -> int:
    dataset = _load_dataset(args.data, args.station)
    args.out.mkdir(parents=True, exist_ok=True)
    summary = pipeline.seasonal_summary(dataset)
    (args.out / "seasonal_summary.csv").write_text(
        pipeline.seasonal_summary_csv(summary))
    (args.out / "seasonal_summary.json").write_text(
        json.dumps(summary, indent=2))
    if args.checkpoint is not None:
        params = deserialize_model(args.checkpoint.read_bytes())
        prepared = prepare_station(dataset, schema=params.schema,
                                   normalizer=params.normalizer,
                                   mice_config=_mice_config_from(cfg, args.seed))
        samples = prepared.samples
        reg = pipeline.evaluate_regression(params, samples)
        (args.out / "metrics.csv").write_text(reg.to_csv())
        from .core import denormalize
        from .pipeline import predict_regression, stack_samples
        X, Y = stack_samples(samples, "regression")
        pred = predict_regression(params, X)
        H, P = len(params.schema.horizons), len(params.schema.targets)
        pred = pred.reshape(-1, H, P)
        truth = Y.reshape(-1, H, P)
        per_target = {}
        for pi, fname in enumerate(params.schema.targets):
            entry = params.normalizer.ranges[fname]
            per_target[fname] = (
                [denormalize(v, entry) for v in truth[:, 0, pi]],
                [denormalize(v, entry) for v in pred[:, 0, pi]],
            )
        reportmod.write_prediction_charts(args.out, per_target,
                                          params.schema.horizons[0])
    print(f"wrote report files to {args.out}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "impute": cmd_impute,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "adapt": cmd_adapt,
    "forecast": cmd_forecast,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ParseError, CheckpointError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
