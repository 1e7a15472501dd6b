import numpy as np
import pytest

from netrca import data, synth


def build_sample(sample_id, values, label=None, t0=0.0, step=10.0,
                 missing=None, provenance=None):
    """Sample from a value matrix (or single column) with a regular clock."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    m, n = values.shape
    ts = t0 + step * np.arange(m, dtype=np.float64)
    if missing is None:
        missing = np.zeros((m, n), dtype=bool)
    return data.Sample(
        sample_id=sample_id,
        timestamps=ts,
        values=values,
        missing=missing,
        label=label,
        provenance=provenance,
    )


@pytest.fixture(scope="session")
def default_schema():
    return synth.default_schema()


@pytest.fixture(scope="session")
def default_graph():
    return synth.default_graph()


@pytest.fixture(scope="session")
def small_dataset(default_graph, default_schema):
    """Quick labeled dataset shared by the integration-leaning tests."""
    cfg = synth.SynthConfig(
        seed=3, n_samples=90, unlabeled_fraction=0.2, missing_rate=0.02
    )
    return synth.generate(cfg, default_graph, default_schema)
