import pytest

from dpsir_miner import fixtures
from dpsir_miner.engine import Engine
from dpsir_miner.store import Workspace


@pytest.fixture
def fixture_workspace(tmp_path):
    return fixtures.generate_fixture_workspace(tmp_path / "ws")


@pytest.fixture
def fixture_engine(fixture_workspace):
    return Engine(fixture_workspace, fixtures.build_fixture_provider())


@pytest.fixture(scope="module")
def mined_workspace(tmp_path_factory):
    """A workspace with all three mining steps already executed."""
    ws = fixtures.generate_fixture_workspace(tmp_path_factory.mktemp("mined") / "ws")
    engine = Engine(ws, fixtures.build_fixture_provider())
    for vid in ("v-ind-1", "v-var-1", "v-link-1"):
        engine.execute(vid, k=fixtures.DEFAULT_K)
    return ws, engine
