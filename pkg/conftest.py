"""
Shared pytest fixtures and markers.
Tests marked `slow` run Monte Carlo at published-value budgets; skip them with -m "not slow".
"""

import logging

import pytest

from models import AlphaLoss, Model


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks at full sample budgets")


@pytest.fixture(autouse=True)
def quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def hellinger():
    return AlphaLoss(alpha=0.0)


@pytest.fixture
def kl():
    return AlphaLoss(alpha=-1.0)


@pytest.fixture
def unit3():
    """d=3 with unit variances."""
    return Model(d=3, sigma_x2=1.0, sigma_y2=1.0)
