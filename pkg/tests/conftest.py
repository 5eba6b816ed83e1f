import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def toy3_path():
    return DATA / "toy3.json"


@pytest.fixture
def toy3(toy3_path):
    from psps.network import load_network
    return load_network(toy3_path)


@pytest.fixture
def toy3_doc(toy3_path):
    return json.loads(toy3_path.read_text())
