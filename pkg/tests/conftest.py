import numpy as np
import pytest

from aeroadapt.features import FeatureSchema
from aeroadapt.ingest import SyntheticConfig, generate_synthetic
from aeroadapt.nn.model import ModelConfig, init_model


@pytest.fixture(scope="session")
def synth_pair():
    """Masked + ground-truth synthetic datasets, 20% missing."""
    config = SyntheticConfig(n_hours=1000, seed=42, missing_rate=0.2)
    return generate_synthetic(config)


@pytest.fixture(scope="session")
def clean_dataset():
    masked, truth = generate_synthetic(SyntheticConfig(n_hours=400, seed=7))
    return truth


def tiny_schema(window=6, horizons=(4, 8)):
    return FeatureSchema(["f1", "f2", "f3", "f4"], window=window,
                         horizons=list(horizons),
                         targets=["pm25", "pm10", "no2"])


def tiny_model(task="regression", seed=1, hidden=3, attention=4,
               dropout=0.0, **kw):
    schema = tiny_schema()
    config = ModelConfig(hidden_sizes=[hidden], attention_size=attention,
                         dropout_rate=dropout, task=task, **kw)
    rng = np.random.default_rng(seed)
    return init_model(config, schema, rng), schema
