import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
DATA_DIR = TESTS_DIR / "data"
MOCK_PROVIDER = [sys.executable, str(TESTS_DIR / "mock_provider.py")]


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def mock_provider_cmd() -> list[str]:
    return list(MOCK_PROVIDER)
