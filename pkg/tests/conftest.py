from __future__ import annotations

from pathlib import Path

import pytest

from termlq import solve_lambda, solve_schedule

from golden import example_instance

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def example():
    return example_instance()


@pytest.fixture(scope="session")
def example_schedule(example):
    return solve_schedule(example)


@pytest.fixture(scope="session")
def example_lambda(example, example_schedule):
    return solve_lambda(example_schedule, example)


@pytest.fixture(scope="session")
def fixture_file():
    return REPO_ROOT / "fixtures" / "example_instance.json"
