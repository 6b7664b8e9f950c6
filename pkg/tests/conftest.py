"""Shared fixtures. One cached pipeline run serves every test module."""

from pathlib import Path

import pytest

from bianchix.pipeline import run_pipeline

CACHE_DIR = Path(__file__).resolve().parent.parent / ".bianchix-cache"


def pytest_addoption(parser):
    parser.addoption(
        "--slow-invariants", action="store_true", default=False,
        help="also run the multi-minute exhaustive identity checks")
    parser.addoption(
        "--stretch-n2", action="store_true", default=False,
        help="also run the long n = 2 end-to-end criterion")


@pytest.fixture(scope="session")
def pipe():
    """The n = 1 pipeline result, reusing the repository layer cache."""
    return run_pipeline(1, cache_dir=CACHE_DIR)


@pytest.fixture(scope="session")
def rs(pipe):
    return pipe.resolvent


@pytest.fixture(scope="session")
def triple(rs):
    return rs.triple
