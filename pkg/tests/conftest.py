import sys
from pathlib import Path

import numpy as np
import pytest

from mapex import FloorPlanConfig, generate_plan

DOUBLES = Path(__file__).parent / "doubles"

# Filled by test_acceptance.py; printed one line per criion at the end of
# the session so every acceptance verdict is visible in the test log.
ACCEPTANCE_RESULTS: list[tuple[int, str, str]] = []


def predictor_double(*args) -> list[str]:
    return [sys.executable, str(DOUBLES / "predictor_double.py"), *args]


def policy_double(*args) -> list[str]:
    return [sys.executable, str(DOUBLES / "policy_double.py"), *args]


@pytest.fixture(scope="session")
def small_plan():
    """A compact multi-room plan shared by integration tests."""
    return generate_plan(FloorPlanConfig(max_width_m=9.0, max_height_m=7.0,
                                         rng_seed=5))


@pytest.fixture(scope="session")
def open_plan():
    """A single large room: big enough that short random walks from the
    centre can never collide."""
    return generate_plan(FloorPlanConfig(max_width_m=12.0, max_height_m=9.0,
                                         min_room_dim_m=7.0,
                                         internal_room_prob=0.0,
                                         furniture_count_range=(0, 0),
                                         rng_seed=2))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[criterion {num:2d}] {status}  {detail}")
