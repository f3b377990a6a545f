import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ivi", deadline=None, max_examples=60)
settings.load_profile("ivi")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, report_lines
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in report_lines():
            terminalreporter.write_line(line)
