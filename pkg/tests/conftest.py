import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, ok, detail)``.

    ``number`` may carry a letter suffix for sub-criteria ("9a").
    """
    def record(number, title, ok, detail=""):
        line = f"criterion {str(number):>3} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _ACCEPTANCE[str(number)] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(key):
        digits = key.rstrip("abcdefghijklmnopqrstuvwxyz")
        return int(digits), key[len(digits):]
    for number in sorted(_ACCEPTANCE, key=order):
        terminalreporter.write_line(_ACCEPTANCE[number])
