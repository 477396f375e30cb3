import math
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from aeroadapt.core import (FORECAST_POLLUTANTS, PollutantKind, Season,
                            classify_level, denormalize, encode_time,
                            fit_normalizer, normalize, season_of_month)


class TestNormalizer:
    def test_fit_endpoints(self):
        spec = fit_normalizer({"a": [10, 20, 30]})
        assert spec.ranges["a"] == (10, 30)

    def test_fit_singleton(self):
        spec = fit_normalizer({"a": [5]})
        assert spec.ranges["a"] == (5, 5)

    def test_fit_negative(self):
        spec = fit_normalizer({"a": [-1, 0, 3]})
        assert spec.ranges["a"] == (-1, 3)

    def test_empty_feature_names_offender(self):
        with pytest.raises(ValueError, match="bad_col"):
            fit_normalizer({"bad_col": []})

    def test_midpoint(self):
        assert normalize(20, (10, 30)) == 0.5

    def test_lower_endpoint(self):
        assert normalize(10, (10, 30)) == 0.0

    def test_clamping(self):
        assert normalize(35, (10, 30)) == 1.0
        assert normalize(-5, (10, 30)) == 0.0

    def test_constant_feature_maps_to_zero(self):
        assert normalize(5, (5, 5)) == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            normalize(float("nan"), (0, 1))
        with pytest.raises(ValueError):
            denormalize(float("inf"), (0, 1))

    @given(st.floats(10, 30))
    def test_round_trip_identity(self, x):
        assert denormalize(normalize(x, (10, 30)), (10, 30)) == pytest.approx(x, abs=1e-12)

    @given(st.floats(allow_nan=False, allow_infinity=False, width=32))
    def test_output_in_unit_interval(self, x):
        assert 0.0 <= normalize(x, (-3.5, 12.25)) <= 1.0


class TestClassifyLevel:
    @pytest.mark.parametrize("pollutant,conc,expected", [
        (PollutantKind.PM2_5, 160, 2),
        (PollutantKind.PM2_5, 59.9, 0),
        (PollutantKind.PM2_5, 60, 1),
        (PollutantKind.PM2_5, 150, 2),
        (PollutantKind.NO2, 30, 0),
        (PollutantKind.NO2, 50, 1),
        (PollutantKind.PM10, 0, 0),
        (PollutantKind.PM10, 100, 1),
        (PollutantKind.PM10, 250, 2),
    ])
    def test_table_bands(self, pollutant, conc, expected):
        assert classify_level(pollutant, conc).class_index == expected

    def test_unsupported_pollutant(self):
        with pytest.raises(ValueError):
            classify_level(PollutantKind.SO2, 10)

    def test_negative_concentration(self):
        with pytest.raises(ValueError):
            classify_level(PollutantKind.PM2_5, -1)

    @given(st.floats(0, 1000), st.floats(0, 1000))
    def test_monotone(self, a, b):
        lo, hi = sorted([a, b])
        for kind in FORECAST_POLLUTANTS:
            assert (classify_level(kind, lo).class_index
                    <= classify_level(kind, hi).class_index)

    def test_level_names(self):
        assert classify_level(PollutantKind.PM2_5, 10).name == "low"
        assert classify_level(PollutantKind.PM2_5, 70).name == "moderate"
        assert classify_level(PollutantKind.NO2, 70).name == "high"


class TestTime:
    def test_december_is_winter(self):
        tf = encode_time(datetime(2017, 12, 15, 8))
        assert (tf.hour_of_day, tf.month, tf.season) == (8, 12, Season.WINTER)

    def test_august_is_monsoon(self):
        tf = encode_time(datetime(2017, 8, 1, 0))
        assert (tf.hour_of_day, tf.month, tf.season) == (0, 8, Season.MONSOON)

    def test_march_is_spring(self):
        tf = encode_time(datetime(2017, 3, 31, 23))
        assert (tf.hour_of_day, tf.month, tf.season) == (23, 3, Season.SPRING)

    def test_seasons_partition_months(self):
        by_season = {}
        for month in range(1, 13):
            by_season.setdefault(season_of_month(month), []).append(month)
        assert set(by_season) == set(Season)
        assert sum(len(v) for v in by_season.values()) == 12
