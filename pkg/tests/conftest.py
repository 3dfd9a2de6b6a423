import json
import sys
from pathlib import Path

import pytest

from abcdpiml.pet import attach_pet
from abcdpiml.synthetic import bundled_dataset_path
from abcdpiml.timeseries import parse_forcing_csv

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent / "oracles"))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def bundled_path():
    return Path(str(bundled_dataset_path()))


@pytest.fixture(scope="session")
def bundled_series(bundled_path):
    series, warnings = parse_forcing_csv(bundled_path.read_text(encoding="utf-8"))
    assert warnings == []
    return series


@pytest.fixture(scope="session")
def bundled_forcing(bundled_series):
    return attach_pet(bundled_series)


@pytest.fixture(scope="session")
def golden_step():
    return json.loads((DATA / "golden_step_fig2.json").read_text())
