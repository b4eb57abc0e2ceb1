import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numeric sweeps")


@pytest.fixture
def report_db(tmp_path):
    """Path to a fresh SQLite report database."""
    return str(tmp_path / "reports.db")
