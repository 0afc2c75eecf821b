import pytest

from mrkernel.corpus import build_bundled_corpus


@pytest.fixture(scope="session")
def bundled_dataset():
    return build_bundled_corpus()
