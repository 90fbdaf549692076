import os
import sys

import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.utils.config_loader import validate_config
from tests.helpers import config_dict, random_system


@pytest.fixture
def make_config(tmp_path):
    """Factory for small validated configs writing under tmp_path."""
    def _make(**sections):
        return validate_config(config_dict(str(tmp_path / "results"), **sections))
    return _make


@pytest.fixture
def system4():
    return random_system(4)
