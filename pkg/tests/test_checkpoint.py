import numpy as np
import pytest

from aeroadapt.baselines import ForestConfig, fit_random_forest, forest_predict
from aeroadapt.core import NormalizationSpec
from aeroadapt.features import FeatureSchema
from aeroadapt.nn.checkpoint import (MAGIC, CheckpointError, deserialize_forest,
                                     deserialize_model, serialize_forest,
                                     serialize_model)
from aeroadapt.nn.model import network_forward
from tests.conftest import tiny_model, tiny_schema


def attach_normalizer(params):
    names = ["pm25", "pm10", "no2"]
    params.normalizer = NormalizationSpec({n: (0.0, 100.0 + i)
                                           for i, n in enumerate(names)})
    return params


class TestModelRoundTrip:
    @pytest.mark.parametrize("kwargs", [
        {},
        {"task": "classification"},
        {"bidirectional": False},
        {"use_attention": False},
        {"literal_candidate": True},
    ])
    def test_outputs_identical_after_round_trip(self, kwargs):
        params, schema = tiny_model(seed=3, **kwargs)
        attach_normalizer(params)
        restored = deserialize_model(serialize_model(params))
        x = np.random.default_rng(0).random((3, schema.window, schema.n_features))
        a = network_forward(x, params)
        b = network_forward(x, restored)
        assert np.max(np.abs(a - b)) < 1e-12

    def test_arrays_bit_exact(self):
        params, _ = tiny_model(seed=4)
        restored = deserialize_model(serialize_model(params))
        for (name, a), (_, b) in zip(params.named_arrays(),
                                     restored.named_arrays()):
            assert np.array_equal(a, b), name

    def test_normalizer_preserved(self):
        params, _ = tiny_model(seed=5)
        attach_normalizer(params)
        restored = deserialize_model(serialize_model(params))
        assert restored.normalizer.ranges == params.normalizer.ranges

    def test_serialization_deterministic(self):
        params, _ = tiny_model(seed=6)
        assert serialize_model(params) == serialize_model(params)


class TestCorruption:
    def test_bad_magic(self):
        with pytest.raises(CheckpointError, match="checkpoint"):
            deserialize_model(b"NOTMAGIC" + b"\x00" * 64)

    def test_truncated_header(self):
        params, _ = tiny_model()
        blob = serialize_model(params)
        with pytest.raises(CheckpointError, match="truncated|incomplete"):
            deserialize_model(blob[:len(MAGIC) + 12])

    def test_truncated_payload(self):
        params, _ = tiny_model()
        blob = serialize_model(params)
        with pytest.raises(CheckpointError):
            deserialize_model(blob[:-16])

    def test_empty_blob(self):
        with pytest.raises(CheckpointError):
            deserialize_model(b"")

    def test_schema_width_mismatch_detected(self):
        # Rewrite the declared schema to 10 features while the weights were
        # built for 4; loading must fail rather than mispredict.
        import json, struct
        params, _ = tiny_model()
        blob = serialize_model(params)
        off = len(MAGIC)
        (hlen,) = struct.unpack_from("<Q", blob, off)
        header = json.loads(blob[off + 8:off + 8 + hlen])
        header["schema"]["features"] = [f"f{i}" for i in range(10)]
        raw = json.dumps(header, sort_keys=True).encode()
        doctored = MAGIC + struct.pack("<Q", len(raw)) + raw + blob[off + 8 + hlen:]
        with pytest.raises(CheckpointError, match="schema"):
            deserialize_model(doctored)

    def test_forest_blob_rejected_as_model(self):
        rng = np.random.default_rng(0)
        forest = fit_random_forest(rng.random((30, 3)), rng.random(30),
                                   ForestConfig(n_trees=2, seed=0))
        with pytest.raises(CheckpointError, match="network"):
            deserialize_model(serialize_forest(forest))

    def test_model_blob_rejected_as_forest(self):
        params, _ = tiny_model()
        with pytest.raises(CheckpointError, match="forest"):
            deserialize_forest(serialize_model(params))


class TestForestRoundTrip:
    def test_regression_predictions_identical(self):
        rng = np.random.default_rng(1)
        X = rng.random((60, 4))
        forest = fit_random_forest(X, rng.random(60),
                                   ForestConfig(n_trees=5, seed=2))
        restored, schema, norm = deserialize_forest(serialize_forest(forest))
        assert schema is None and norm is None
        Xq = rng.random((20, 4))
        assert np.array_equal(forest_predict(forest, Xq),
                              forest_predict(restored, Xq))

    def test_classification_round_trip_with_metadata(self):
        rng = np.random.default_rng(3)
        X = rng.random((60, 2))
        y = (X[:, 0] > 0.5).astype(int)
        forest = fit_random_forest(X, y, ForestConfig(n_trees=4, seed=4),
                                   task="classification")
        schema = tiny_schema()
        norm = NormalizationSpec({"pm25": (0.0, 250.0)})
        restored, schema2, norm2 = deserialize_forest(
            serialize_forest(forest, schema, norm))
        assert schema2 == schema
        assert norm2.ranges == norm.ranges
        assert np.array_equal(forest_predict(forest, X),
                              forest_predict(restored, X))

    def test_truncated_forest_payload(self):
        rng = np.random.default_rng(5)
        forest = fit_random_forest(rng.random((30, 2)), rng.random(30),
                                   ForestConfig(n_trees=3, seed=6))
        blob = serialize_forest(forest)
        with pytest.raises(CheckpointError):
            deserialize_forest(blob[:-8])
