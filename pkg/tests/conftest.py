"""Shared fixtures."""
import numpy as np
import pytest

from core.config import get_settings


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point OUTPUT_DIR at a temporary directory for the settings singleton."""
    settings = get_settings()
    monkeypatch.setattr(settings, "output_dir", str(tmp_path))
    return tmp_path
