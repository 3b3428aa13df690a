import json

import pytest
import structlog

from bpslab.services.rsa import Lexicon
from tests.helpers import base_from_row, game_from_column, target_from_rows, tom_from_column


@pytest.fixture(autouse=True)
def reset_logging():
    # main() binds the logger to the current stderr, which capsys closes afterwards
    yield
    structlog.reset_defaults()


@pytest.fixture
def make_game():
    return game_from_column


@pytest.fixture
def make_base():
    return base_from_row


@pytest.fixture
def make_tom():
    return tom_from_column


@pytest.fixture
def make_target():
    return target_from_rows


@pytest.fixture
def glasses_hat():
    return Lexicon.from_mapping({"glasses": ["r1", "r2"], "hat": ["r2", "r3"]}, referents=["r1", "r2", "r3"])


@pytest.fixture
def write_spec(tmp_path):
    """Write a spec object to a JSON file and return its path"""

    def write(data, name="spec.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write
