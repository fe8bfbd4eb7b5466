import shutil

import pytest

from eit.annotation import import_labels
from eit.corpus import Store
from eit.embedding import HashedTrigramProvider
from eit.fixtures import fixture_path, load_demo_fixture


@pytest.fixture(scope="session")
def demo_template(tmp_path_factory):
    """Demo corpus + labels, built once; tests copy the sqlite file."""
    d = tmp_path_factory.mktemp("demo-template")
    store = Store.initialize(d)
    load_demo_fixture(store)
    imported, rejected = import_labels(store, fixture_path("labels.csv"))
    assert imported > 0 and not rejected
    store.close()
    return d


@pytest.fixture
def demo_store(demo_template, tmp_path):
    shutil.copy(demo_template / "store.db", tmp_path / "store.db")
    store = Store(tmp_path)
    yield store
    store.close()


@pytest.fixture
def empty_store(tmp_path):
    store = Store.initialize(tmp_path / "data")
    yield store
    store.close()


@pytest.fixture(scope="session")
def provider():
    # 64 dims keeps embedding-heavy tests fast; geometry is still informative
    return HashedTrigramProvider(dimension=64)
