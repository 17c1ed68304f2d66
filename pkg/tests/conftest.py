import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "ddmsim" / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def scenario_dir():
    return SCENARIOS


@pytest.fixture
def golden_dir():
    return GOLDEN
