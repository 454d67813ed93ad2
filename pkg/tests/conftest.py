import pytest

from grasptax.config import PipelineConfig
from grasptax.ingestion import write_dataset
from grasptax.synthetic import synthetic_dataset


@pytest.fixture(scope="session")
def synthetic_manifest(tmp_path_factory):
    """A small recording of 10 interactions over 3 grasps, written to disk."""
    directory = tmp_path_factory.mktemp("recording")
    write_dataset(synthetic_dataset(n_interactions=10, n_grasps=3, seed=3), directory)
    return directory / "manifest.json"


@pytest.fixture
def fast_config():
    """Paper defaults with fewer restarts so end-to-end tests stay quick."""
    return PipelineConfig().override(**{
        "engine.gmm.n_init": 4, "engine.gmm.sweep_n_init": 2, "k_range": [2, 5],
    })
