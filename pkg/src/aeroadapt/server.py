"""Read-only forecast endpoint: GET /forecast/<station_id> and /health.

A single service object owns an immutable model snapshot and a rolling
hourly buffer read from a CSV file; a background thread polls for buffer
growth and replacement checkpoints and swaps snapshots atomically. Responses
are cached until the buffer gains a new hour or the model changes."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

import numpy as np

from .core import classify_level, denormalize
from .features import TARGET_POLLUTANTS, assemble_inputs
from .ingest import FIELD_NAMES, parse_observations
from .nn.checkpoint import deserialize_model
from .nn.model import ModelParams
from .prep import normalize_matrix

log = logging.getLogger(__name__)


class BufferTooShort(RuntimeError):
    def __init__(self, have: int, need: int):
        super().__init__(f"need {need}, have {have}")
        self.have = have
        self.need = need


def _fill_window(matrix: np.ndarray) -> np.ndarray:
    """Forward-fill missing cells, then fall back to 0.5 (mid-range in
    normalized units); serving cannot wait for full imputation."""
    out = matrix.copy()
    for j in range(out.shape[1]):
        last = np.nan
        for i in range(out.shape[0]):
            if np.isnan(out[i, j]):
                out[i, j] = last
            else:
                last = out[i, j]
    out[np.isnan(out)] = 0.5
    return out


def build_forecast_response(params: ModelParams, station_id: str,
                            timestamps, values_norm: np.ndarray) -> dict:
    """ForecastResponse dict from the last window of the normalized buffer."""
    schema = params.schema
    W = schema.window
    if len(timestamps) < W:
        raise BufferTooShort(len(timestamps), W)
    tail_ts = timestamps[-W:]
    tail = _fill_window(values_norm[-W:])
    inputs = assemble_inputs(tail, tail_ts, schema)
    from .pipeline import predict_regression
    out = predict_regression(params, inputs[None])[0]
    H, P = len(schema.horizons), len(schema.targets)
    out = out.reshape(H, P)
    horizons = []
    for hi, horizon in enumerate(schema.horizons):
        row: dict = {"horizon_hours": horizon, "pollutants": {}}
        for pi, fname in enumerate(schema.targets):
            conc = max(denormalize(float(out[hi, pi]),
                                   params.normalizer.ranges[fname]), 0.0)
            level = classify_level(TARGET_POLLUTANTS[pi], conc)
            row["pollutants"][fname] = {
                "concentration": conc,
                "level": level.class_index,
                "level_name": level.name,
            }
        horizons.append(row)
    return {
        "station_id": station_id,
        "generated_at": tail_ts[-1].strftime("%Y-%m-%dT%H:%M"),
        "horizons": horizons,
    }


class ForecastService:
    """Serving state: model snapshot, buffer, cached response bytes."""

    def __init__(self, checkpoint_path: Path, buffer_csv: Path,
                 station_id: str, poll_interval: float = 60.0):
        self.checkpoint_path = Path(checkpoint_path)
        self.buffer_csv = Path(buffer_csv)
        self.station_id = station_id
        self.poll_interval = poll_interval
        self._lock = threading.Lock()
        self._params = deserialize_model(self.checkpoint_path.read_bytes())
        self._checkpoint_mtime = self.checkpoint_path.stat().st_mtime_ns
        self._last_buffer_hour = None
        self._cached_body: Optional[bytes] = None
        self._cached_error: Optional[tuple[int, bytes]] = None
        self._stop = threading.Event()
        self.refresh()

    def refresh(self) -> None:
        """Poll checkpoint and buffer; recompute the cached forecast only
        when either changed. Snapshot swap is atomic under the lock."""
        params = None
        mtime = self.checkpoint_path.stat().st_mtime_ns
        if mtime != self._checkpoint_mtime:
            params = deserialize_model(self.checkpoint_path.read_bytes())
            log.info("loaded new checkpoint snapshot")
        with self.buffer_csv.open() as fh:
            dataset, _issues = parse_observations(fh, self.station_id)
        last_hour = dataset.timestamps[-1]
        with self._lock:
            if params is not None:
                self._params = params
                self._checkpoint_mtime = mtime
                self._cached_body = None
            if last_hour != self._last_buffer_hour:
                self._last_buffer_hour = last_hour
                self._cached_body = None
            if self._cached_body is None:
                self._recompute(dataset)

    def _recompute(self, dataset) -> None:
        matrix = normalize_matrix(dataset.to_matrix(), self._params.normalizer)
        try:
            response = build_forecast_response(
                self._params, self.station_id, dataset.timestamps, matrix)
        except BufferTooShort as exc:
            self._cached_error = (409, json.dumps(
                {"error": f"need {exc.need}, have {exc.have}"},
                sort_keys=True).encode())
            self._cached_body = None
            return
        self._cached_error = None
        self._cached_body = json.dumps(response, sort_keys=True).encode()

    def forecast_body(self, station_id: str) -> tuple[int, bytes]:
        if station_id != self.station_id:
            return 404, json.dumps(
                {"error": f"unknown station {station_id!r}"}).encode()
        with self._lock:
            if self._cached_error is not None:
                return self._cached_error
            return 200, self._cached_body

    def health_body(self) -> tuple[int, bytes]:
        with self._lock:
            ready = self._cached_body is not None
        return 200, json.dumps({"status": "ok", "station_id": self.station_id,
                                "ready": ready}, sort_keys=True).encode()

    def _poll_loop(self) -> None:
        while not self._stop.wait(self.poll_interval):
            try:
                self.refresh()
            except Exception:
                log.exception("background refresh failed")

    def start_polling(self) -> threading.Thread:
        thread = threading.Thread(target=self._poll_loop, daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        self._stop.set()


class _Handler(BaseHTTPRequestHandler):
    service: ForecastService

    def do_GET(self):  # noqa: N802 (http.server API)
        if self.path == "/health":
            status, body = self.service.health_body()
        elif self.path.startswith("/forecast/"):
            station = self.path[len("/forecast/"):]
            status, body = self.service.forecast_body(station)
        else:
            status, body = 404, b'{"error": "not found"}'
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)


def make_server(service: ForecastService, host: str = "127.0.0.1",
                port: int = 8080) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve(checkpoint_path: Path, buffer_csv: Path, station_id: str,
          host: str = "127.0.0.1", port: int = 8080,
          poll_interval: float = 60.0) -> None:
    service = ForecastService(checkpoint_path, buffer_csv, station_id,
                              poll_interval)
    service.start_polling()
    server = make_server(service, host, port)
    log.info("serving forecasts for %s on %s:%d", station_id, host, port)
    try:
        server.serve_forever()
    finally:
        service.stop()
        server.server_close()
