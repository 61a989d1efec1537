import os
from pathlib import Path

import pytest


@pytest.fixture
def data_dir():
    return Path(os.environ.get("DG_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))
