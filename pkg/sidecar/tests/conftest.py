import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from model_sidecar.app import create_app
from model_sidecar.backends import DeterministicBackend, DeterministicConfig

SCHEMAS = Path(__file__).resolve().parent.parent / "schemas"


@pytest.fixture(scope="session")
def client():
    return TestClient(create_app(DeterministicBackend()))


@pytest.fixture(scope="session")
def tiny_client():
    config = DeterministicConfig(dim=8, max_tokens=4, context_limit=10)
    return TestClient(create_app(DeterministicBackend(config)))


@pytest.fixture(scope="session")
def schema():
    def _load(name: str) -> dict:
        return json.loads((SCHEMAS / f"{name}.schema.json").read_text())

    return _load
