"""Shared fixtures for the biotprecond test suite."""

import logging
import os

import pytest

from biotprecond.config import ConfigManager


@pytest.fixture(autouse=True)
def _reset_package_logger():
    """Undo handler and propagation changes made by configure_logging."""
    logger = logging.getLogger("biotprecond")
    handlers, level, propagate = list(logger.handlers), logger.level, logger.propagate
    yield
    for handler in list(logger.handlers):
        if handler not in handlers:
            logger.removeHandler(handler)
            handler.close()
    logger.setLevel(level)
    logger.propagate = propagate


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    """Keep developer BIOTPRECOND_* variables out of the tests."""
    for key in list(os.environ):
        if key.startswith("BIOTPRECOND_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def config_manager():
    return ConfigManager()
