import json
import threading
import time
import urllib.request

import numpy as np
import pytest

from aeroadapt.core import NormalizationSpec
from aeroadapt.ingest import FIELD_NAMES, SyntheticConfig, dataset_to_csv, \
    generate_synthetic
from aeroadapt.nn.checkpoint import serialize_model
from aeroadapt.nn.model import ModelConfig, init_model
from aeroadapt.prep import default_schema
from aeroadapt.server import ForecastService, make_server

STATION = "synth-01"


def make_checkpoint(seed=0):
    schema = default_schema()
    config = ModelConfig(hidden_sizes=[3], attention_size=3, dropout_rate=0.0)
    normalizer = NormalizationSpec({f: (0.0, 300.0) for f in FIELD_NAMES})
    params = init_model(config, schema, np.random.default_rng(seed), normalizer)
    return serialize_model(params)


def csv_lines(n_hours=48):
    masked, _ = generate_synthetic(SyntheticConfig(n_hours=n_hours, seed=1))
    return dataset_to_csv(masked).strip().splitlines()


@pytest.fixture()
def paths(tmp_path):
    lines = csv_lines()
    ckpt = tmp_path / "model.ckpt"
    ckpt.write_bytes(make_checkpoint())
    buffer = tmp_path / "buffer.csv"
    buffer.write_text("\n".join(lines[:31]) + "\n")  # header + 30 hours
    return ckpt, buffer, lines


def service_for(ckpt, buffer):
    return ForecastService(ckpt, buffer, STATION, poll_interval=3600.0)


class TestResponses:
    def test_valid_forecast(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        status, body = svc.forecast_body(STATION)
        assert status == 200
        response = json.loads(body)
        assert response["station_id"] == STATION
        assert len(response["horizons"]) == 6
        for row in response["horizons"]:
            for entry in row["pollutants"].values():
                assert entry["concentration"] >= 0.0
                assert entry["level"] in (0, 1, 2)

    def test_generated_at_is_last_buffer_hour(self, paths):
        ckpt, buffer, lines = paths
        svc = service_for(ckpt, buffer)
        _, body = svc.forecast_body(STATION)
        last_ts = lines[30].split(",")[0]
        assert json.loads(body)["generated_at"] == last_ts

    def test_short_buffer_conflict(self, paths):
        ckpt, buffer, lines = paths
        buffer.write_text("\n".join(lines[:24]) + "\n")  # 23 hours only
        svc = service_for(ckpt, buffer)
        status, body = svc.forecast_body(STATION)
        assert status == 409
        assert json.loads(body)["error"] == "need 24, have 23"

    def test_unknown_station(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        status, body = svc.forecast_body("elsewhere")
        assert status == 404
        assert "elsewhere" in json.loads(body)["error"]

    def test_health(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        status, body = svc.health_body()
        assert status == 200
        assert json.loads(body) == {"ready": True, "station_id": STATION,
                                    "status": "ok"}

    def test_health_not_ready_on_short_buffer(self, paths):
        ckpt, buffer, lines = paths
        buffer.write_text("\n".join(lines[:10]) + "\n")
        svc = service_for(ckpt, buffer)
        assert json.loads(svc.health_body()[1])["ready"] is False


class TestCaching:
    def test_repeat_requests_byte_identical(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        _, first = svc.forecast_body(STATION)
        _, second = svc.forecast_body(STATION)
        assert first is second

    def test_refresh_without_change_keeps_cache(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        _, before = svc.forecast_body(STATION)
        svc.refresh()
        _, after = svc.forecast_body(STATION)
        assert before is after


class TestHotReload:
    def test_buffer_growth_updates_forecast(self, paths):
        ckpt, buffer, lines = paths
        svc = service_for(ckpt, buffer)
        _, before = svc.forecast_body(STATION)
        buffer.write_text("\n".join(lines[:32]) + "\n")  # one more hour
        svc.refresh()
        _, after = svc.forecast_body(STATION)
        assert after is not before
        assert (json.loads(after)["generated_at"]
                == lines[31].split(",")[0])

    def test_checkpoint_swap_updates_forecast(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        _, before = svc.forecast_body(STATION)
        time.sleep(0.01)  # ensure a new mtime
        ckpt.write_bytes(make_checkpoint(seed=99))
        svc.refresh()
        _, after = svc.forecast_body(STATION)
        assert json.loads(after) != json.loads(before)

    def test_recovery_after_buffer_fills(self, paths):
        ckpt, buffer, lines = paths
        buffer.write_text("\n".join(lines[:24]) + "\n")
        svc = service_for(ckpt, buffer)
        assert svc.forecast_body(STATION)[0] == 409
        buffer.write_text("\n".join(lines[:31]) + "\n")
        svc.refresh()
        assert svc.forecast_body(STATION)[0] == 200


class TestHttp:
    def test_end_to_end_over_http(self, paths):
        ckpt, buffer, _ = paths
        svc = service_for(ckpt, buffer)
        server = make_server(svc, "127.0.0.1", 0)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            with urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/health") as resp:
                assert resp.status == 200
                assert json.loads(resp.read())["status"] == "ok"
            with urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/forecast/{STATION}") as resp:
                assert resp.status == 200
                assert resp.headers["Content-Type"] == "application/json"
                assert len(json.loads(resp.read())["horizons"]) == 6
            with pytest.raises(urllib.error.HTTPError) as exc:
                urllib.request.urlopen(f"http://127.0.0.1:{port}/nope")
            assert exc.value.code == 404
        finally:
            server.shutdown()
            server.server_close()
            svc.stop()
