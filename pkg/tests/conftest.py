import numpy as np
import pytest

from quasilocal_lab.constants import OUT_DIR_ENV
from quasilocal_lab.initial_data import build_catalog_data


@pytest.fixture(scope="session")
def flat():
    return build_catalog_data("flat")


@pytest.fixture(scope="session")
def schwarzschild():
    return build_catalog_data("schwarzschild_slice", {"m": 1.0})


@pytest.fixture(scope="session")
def hyperboloid():
    return build_catalog_data("cmc_hyperboloid", {"a": 1.0})


@pytest.fixture(scope="session")
def perturbed():
    return build_catalog_data("perturbed_flat", {"eps": 0.1, "length": 2.0})


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture(autouse=True)
def isolated_out_dir(tmp_path, monkeypatch):
    out = tmp_path / "_results"
    monkeypatch.setenv(OUT_DIR_ENV, str(out))
    return out
