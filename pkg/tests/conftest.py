import numpy as np
import pytest

from sparse_ssrv.core import AnalysisConfig, ConditionLabels, CountTable
from sparse_ssrv.sim import GeneratorSpec, generate


@pytest.fixture
def small_table():
    counts = np.array([[10, 12, 30, 28], [5, 6, 4, 5], [40, 38, 41, 44]])
    return CountTable(["a", "b", "c"], ["s1", "s2", "s3", "s4"], counts)


@pytest.fixture
def small_labels():
    return ConditionLabels(np.array([0, 0, 1, 1]))


@pytest.fixture(scope="session")
def sparse_data():
    return generate(GeneratorSpec(D=80, N=16, depth=40_000, prop_relevant=0.2, seed=11))


@pytest.fixture
def fast_config():
    return AnalysisConfig(num_draws=32, seed=5)
