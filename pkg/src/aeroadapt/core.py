"""Domain types shared by every stage: pollutants, hourly records, time
encodings, min-max normalization and pollution level thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Mapping, Optional


class PollutantKind(Enum):
    PM2_5 = "pm25"
    PM10 = "pm10"
    NO2 = "no2"
    SO2 = "so2"
    CO = "co"
    O3 = "o3"


#: Pollutants for which concentrations and levels are forecast.
FORECAST_POLLUTANTS = (PollutantKind.PM2_5, PollutantKind.PM10, PollutantKind.NO2)

#: Concentration class boundaries (ug/m3), left-closed / right-open bands.
LEVEL_THRESHOLDS = {
    PollutantKind.PM2_5: (60.0, 150.0),
    PollutantKind.PM10: (100.0, 250.0),
    PollutantKind.NO2: (50.0,),
}

LEVEL_NAMES_3 = ("low", "moderate", "high")
LEVEL_NAMES_2 = ("low", "high")


class Season(Enum):
    WINTER = "winter"
    SPRING = "spring"
    SUMMER = "summer"
    MONSOON = "monsoon"
    AUTUMN = "autumn"


_MONTH_TO_SEASON = {
    12: Season.WINTER, 1: Season.WINTER,
    2: Season.SPRING, 3: Season.SPRING,
    4: Season.SUMMER, 5: Season.SUMMER, 6: Season.SUMMER,
    7: Season.MONSOON, 8: Season.MONSOON, 9: Season.MONSOON,
    10: Season.AUTUMN, 11: Season.AUTUMN,
}


@dataclass(frozen=True)
class TimeFeatures:
    hour_of_day: int
    month: int
    season: Season


@dataclass(frozen=True)
class PollutionLevel:
    pollutant: PollutantKind
    class_index: int

    @property
    def name(self) -> str:
        names = LEVEL_NAMES_2 if self.pollutant is PollutantKind.NO2 else LEVEL_NAMES_3
        return names[self.class_index]


@dataclass(frozen=True)
class HourlyObservation:
    """One station-hour of raw readings; any field may be missing (None)."""

    station_id: str
    timestamp: datetime
    pollutants: Mapping[PollutantKind, Optional[float]] = field(default_factory=dict)
    temperature: Optional[float] = None
    humidity: Optional[float] = None
    wind_speed: Optional[float] = None
    wind_direction: Optional[float] = None
    pressure: Optional[float] = None

    def __post_init__(self):
        if self.timestamp.minute != 0 or self.timestamp.second != 0 or self.timestamp.microsecond != 0:
            raise ValueError(f"timestamp not aligned to an exact hour: {self.timestamp}")
        for kind, value in self.pollutants.items():
            if value is not None and value < 0:
                raise ValueError(f"negative concentration for {kind.value}: {value}")
        if self.humidity is not None and not (0.0 <= self.humidity <= 100.0):
            raise ValueError(f"humidity out of [0, 100]: {self.humidity}")


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-feature (min, max) for the [0,1] mapping, keyed by feature name."""

    ranges: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        for name, (lo, hi) in self.ranges.items():
            if hi < lo:
                raise ValueError(f"max < min for feature {name!r}")

    def to_dict(self) -> dict:
        return {name: [lo, hi] for name, (lo, hi) in self.ranges.items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalizationSpec":
        return cls({name: (float(lo), float(hi)) for name, (lo, hi) in d.items()})


def fit_normalizer(columns: Mapping[str, "list[float]"]) -> NormalizationSpec:
    """Observed min/max per feature; non-finite entries are skipped."""
    ranges = {}
    for name, values in columns.items():
        finite = [v for v in values if v is not None and math.isfinite(v)]
        if not finite:
            raise ValueError(f"no finite values to fit normalizer for feature {name!r}")
        ranges[name] = (min(finite), max(finite))
    return NormalizationSpec(ranges)


def normalize(x: float, entry: tuple[float, float]) -> float:
    """Map x to [0,1] via (x - min)/(max - min); out-of-range clamps, constant
    features map to 0."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite input to normalize: {x}")
    lo, hi = entry
    if hi == lo:
        return 0.0
    return min(1.0, max(0.0, (x - lo) / (hi - lo)))


def denormalize(z: float, entry: tuple[float, float]) -> float:
    if not math.isfinite(z):
        raise ValueError(f"non-finite input to denormalize: {z}")
    lo, hi = entry
    return lo + z * (hi - lo)


def classify_level(pollutant: PollutantKind, concentration: float) -> PollutionLevel:
    """Band a concentration into its pollution class (left-closed bands)."""
    if pollutant not in LEVEL_THRESHOLDS:
        raise ValueError(f"no level classes defined for {pollutant.value}")
    if concentration < 0:
        raise ValueError(f"negative concentration: {concentration}")
    index = 0
    for bound in LEVEL_THRESHOLDS[pollutant]:
        if concentration >= bound:
            index += 1
    return PollutionLevel(pollutant, index)


def n_classes(pollutant: PollutantKind) -> int:
    return len(LEVEL_THRESHOLDS[pollutant]) + 1


def season_of_month(month: int) -> Season:
    return _MONTH_TO_SEASON[month]


def encode_time(timestamp: datetime) -> TimeFeatures:
    return TimeFeatures(
        hour_of_day=timestamp.hour,
        month=timestamp.month,
        season=_MONTH_TO_SEASON[timestamp.month],
    )
