import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from driftopt.paths import PathBatchSpec, generate_paths, make_grid

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_batch():
    grid = make_grid(1.0, 1 / 32)
    return generate_paths(PathBatchSpec(256, seed=7), grid)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
