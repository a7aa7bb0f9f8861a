import pytest

from config.loader import CostParams
from data.manager import load_reference, load_samples


@pytest.fixture
def params() -> CostParams:
    return CostParams()


@pytest.fixture
def example():
    return load_reference()


@pytest.fixture(scope="session")
def samples():
    return load_samples()
