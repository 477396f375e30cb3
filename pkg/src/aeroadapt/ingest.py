"""Station CSV ingestion, hourly-grid regularization and the seeded synthetic
generator used for desk-scale experiments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .core import HourlyObservation, PollutantKind, season_of_month

#: Canonical CSV column order (after the leading timestamp column).
FIELD_NAMES = [
    "pm25", "pm10", "no2", "so2", "co", "o3",
    "temperature", "humidity", "wind_speed", "wind_direction", "pressure",
]

POLLUTANT_FIELDS = FIELD_NAMES[:6]
MET_FIELDS = FIELD_NAMES[6:]

_FIELD_TO_POLLUTANT = {p.value: p for p in PollutantKind}

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"


class ParseError(ValueError):
    pass


@dataclass
class StationDataset:
    """Observations on a contiguous hourly grid with per-field coverage."""

    station_id: str
    observations: Sequence[HourlyObservation]

    def __post_init__(self):
        for prev, cur in zip(self.observations, self.observations[1:]):
            if cur.timestamp - prev.timestamp != timedelta(hours=1):
                raise ValueError(
                    f"grid not hourly-contiguous at {cur.timestamp}")

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def timestamps(self) -> list[datetime]:
        return [o.timestamp for o in self.observations]

    def field_value(self, obs: HourlyObservation, name: str) -> Optional[float]:
        if name in _FIELD_TO_POLLUTANT:
            return obs.pollutants.get(_FIELD_TO_POLLUTANT[name])
        return getattr(obs, name)

    def to_matrix(self) -> np.ndarray:
        """(n_hours, 11) float matrix in FIELD_NAMES order, NaN = missing."""
        out = np.full((len(self.observations), len(FIELD_NAMES)), np.nan)
        for i, obs in enumerate(self.observations):
            for j, name in enumerate(FIELD_NAMES):
                v = self.field_value(obs, name)
                if v is not None:
                    out[i, j] = v
        return out

    def coverage(self) -> dict[str, float]:
        """Fraction of non-missing entries per field."""
        m = self.to_matrix()
        n = max(len(self.observations), 1)
        return {name: float(np.sum(~np.isnan(m[:, j]))) / n
                for j, name in enumerate(FIELD_NAMES)}


def _make_observation(station_id: str, ts: datetime,
                      values: dict[str, Optional[float]]) -> HourlyObservation:
    pollutants = {_FIELD_TO_POLLUTANT[f]: values.get(f) for f in POLLUTANT_FIELDS}
    return HourlyObservation(
        station_id=station_id,
        timestamp=ts,
        pollutants=pollutants,
        temperature=values.get("temperature"),
        humidity=values.get("humidity"),
        wind_speed=values.get("wind_speed"),
        wind_direction=values.get("wind_direction"),
        pressure=values.get("pressure"),
    )


def regularize_grid(rows: Sequence[HourlyObservation],
                    station_id: Optional[str] = None) -> StationDataset:
    """Insert all-missing observations for any hours absent between the first
    and last timestamp."""
    if not rows:
        raise ParseError("no rows to regularize")
    station_id = station_id or rows[0].station_id
    by_ts = {r.timestamp: r for r in rows}
    first = min(by_ts)
    last = max(by_ts)
    grid = []
    ts = first
    while ts <= last:
        obs = by_ts.get(ts)
        if obs is None:
            obs = _make_observation(station_id, ts, {})
        grid.append(obs)
        ts += timedelta(hours=1)
    return StationDataset(station_id, grid)


def _parse_cell(raw: str) -> Optional[float]:
    raw = raw.strip()
    if raw == "" or raw.upper() == "NA":
        return None
    return float(raw)


def parse_observations(stream: IO[str], station_id: str
                       ) -> tuple[StationDataset, list[str]]:
    """Parse a station CSV into a contiguous hourly dataset plus a list of
    data-quality issues (unknown columns, duplicates, discarded values)."""
    issues: list[str] = []
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: no header row")
    header = [h.strip() for h in header]
    if "timestamp" not in header:
        raise ParseError("header is missing the required 'timestamp' column")
    ts_col = header.index("timestamp")
    known = {}
    for idx, name in enumerate(header):
        if idx == ts_col:
            continue
        if name in FIELD_NAMES:
            known[idx] = name
        else:
            issues.append(f"ignoring unknown column {name!r}")
    for name in FIELD_NAMES:
        if name not in known.values():
            issues.append(f"column {name!r} absent; field will be 100% missing")

    rows: dict[datetime, HourlyObservation] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            ts = datetime.strptime(row[ts_col].strip(), TIMESTAMP_FORMAT)
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {lineno}: bad timestamp: {exc}") from exc
        if ts.minute != 0:
            raise ParseError(f"line {lineno}: timestamp not on the hour: {ts}")
        values: dict[str, Optional[float]] = {}
        for idx, name in known.items():
            raw = row[idx] if idx < len(row) else ""
            try:
                v = _parse_cell(raw)
            except ValueError:
                issues.append(f"line {lineno}: unreadable {name} cell {raw!r}; treated as missing")
                v = None
            if v is not None and name in POLLUTANT_FIELDS and v < 0:
                issues.append(f"line {lineno}: negative {name} ({v}); treated as missing")
                v = None
            if v is not None and name == "humidity" and not (0 <= v <= 100):
                issues.append(f"line {lineno}: humidity out of range ({v}); treated as missing")
                v = None
            values[name] = v
        if ts in rows:
            issues.append(f"line {lineno}: duplicate hour {ts}; keeping last occurrence")
        rows[ts] = _make_observation(station_id, ts, values)

    if not rows:
        raise ParseError("no data rows")
    dataset = regularize_grid(sorted(rows.values(), key=lambda o: o.timestamp),
                              station_id)
    return dataset, issues


def write_observations(dataset: StationDataset, stream: IO[str]) -> None:
    """Serialize back to the canonical CSV layout (lossless round-trip)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["timestamp"] + FIELD_NAMES)
    for obs in dataset.observations:
        row = [obs.timestamp.strftime(TIMESTAMP_FORMAT)]
        for name in FIELD_NAMES:
            v = dataset.field_value(obs, name)
            row.append("" if v is None else repr(float(v)))
        writer.writerow(row)


def dataset_to_csv(dataset: StationDataset) -> str:
    buf = io.StringIO()
    write_observations(dataset, buf)
    return buf.getvalue()


@dataclass
class SyntheticConfig:
    n_hours: int = 2000
    seed: int = 0
    base_levels: dict[str, float] = field(default_factory=lambda: {
        "pm25": 120.0, "pm10": 220.0, "no2": 55.0,
        "so2": 18.0, "co": 1.5, "o3": 45.0,
    })
    diurnal_amplitude: float = 25.0
    seasonal_amplitude: float = 40.0
    noise_std: float = 6.0
    missing_rate: float = 0.0
    # Optional linear trend injected from drift_start_hour onward.
    drift_start_hour: Optional[int] = None
    drift_slope: float = 0.0
    # Day-of-year offset of the seasonal sinusoid; 76 puts the peak mid-January.
    seasonal_phase_days: float = 0.0
    start: datetime = field(default_factory=lambda: datetime(2017, 1, 1, 0, 0))
    station_id: str = "synth-01"

    def validate(self) -> None:
        if self.n_hours < 48:
            raise ValueError("n_hours must be >= 48")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ValueError("missing_rate must be in [0, 1)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def generate_synthetic(config: SyntheticConfig
                       ) -> tuple[StationDataset, StationDataset]:
    """Generate (masked dataset, complete ground truth).

    Each pollutant follows base + diurnal and seasonal sinusoids + optional
    drift + Gaussian noise; meteorological fields share the seasonal cycle.
    Missing slots are masked uniformly at random at ``missing_rate``.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_hours
    ts0 = config.start
    timestamps = [ts0 + timedelta(hours=h) for h in range(n)]
    hours = np.array([t.hour for t in timestamps], dtype=float)
    doy = np.array([t.timetuple().tm_yday for t in timestamps], dtype=float)
    diurnal = np.sin(2.0 * np.pi * hours / 24.0)
    seasonal = np.sin(2.0 * np.pi * (doy + config.seasonal_phase_days) / 365.0)
    drift = np.zeros(n)
    if config.drift_start_hour is not None:
        h = np.arange(n, dtype=float)
        drift = np.maximum(0.0, h - config.drift_start_hour) * config.drift_slope

    values = np.empty((n, len(FIELD_NAMES)))
    # Per-pollutant amplitudes scaled to the base level so columns stay
    # positive and cross-correlated through the shared sinusoids.
    ref = config.base_levels["pm25"]
    for j, name in enumerate(POLLUTANT_FIELDS):
        base = config.base_levels[name]
        scale = base / ref
        noise = rng.normal(0.0, config.noise_std * scale, size=n)
        col = (base
               + config.diurnal_amplitude * scale * diurnal
               + config.seasonal_amplitude * scale * seasonal
               + drift * scale
               + noise)
        values[:, j] = np.maximum(col, 0.0)

    # Meteorology: temperature anti-phased with the pollutant seasonal cycle,
    # humidity tracking it, plus small noise.
    values[:, FIELD_NAMES.index("temperature")] = (
        25.0 - 8.0 * seasonal + 4.0 * diurnal + rng.normal(0, 1.0, n))
    values[:, FIELD_NAMES.index("humidity")] = np.clip(
        55.0 + 20.0 * seasonal + rng.normal(0, 3.0, n), 0.0, 100.0)
    values[:, FIELD_NAMES.index("wind_speed")] = np.maximum(
        2.5 + 1.0 * diurnal + rng.normal(0, 0.4, n), 0.0)
    values[:, FIELD_NAMES.index("wind_direction")] = (
        180.0 + 120.0 * seasonal + rng.normal(0, 15.0, n)) % 360.0
    values[:, FIELD_NAMES.index("pressure")] = (
        1008.0 + 6.0 * seasonal + rng.normal(0, 1.5, n))

    mask = rng.random(values.shape) < config.missing_rate

    def build(masked: bool) -> StationDataset:
        observations = []
        for i, ts in enumerate(timestamps):
            row = {}
            for j, name in enumerate(FIELD_NAMES):
                if masked and mask[i, j]:
                    row[name] = None
                else:
                    row[name] = float(values[i, j])
            observations.append(_make_observation(config.station_id, ts, row))
        return StationDataset(config.station_id, observations)

    return build(masked=True), build(masked=False)
