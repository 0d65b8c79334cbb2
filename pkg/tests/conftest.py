import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_parameter_warnings():
    # the published QP parameters deliberately sit below L_g; that warning is tested explicitly
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=r"r \+ 1/lambda")
        yield


def assert_close(a, b, tol):
    assert np.linalg.norm(np.asarray(a) - np.asarray(b)) <= tol


class _Criterion:
    def __init__(self, lines, number, title):
        self.lines, self.number, self.title = lines, number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        note = self.detail if exc_type is None else f"{exc_type.__name__}: {exc}"
        line = f"criterion {self.number:>2} {verdict}  {self.title}"
        if note:
            line += f"  ({note})"
        print(line)
        self.lines.append(line)
        return False


@pytest.fixture
def criterion(request):
    """Context manager that records a one-line verdict for an acceptance criterion."""
    lines = request.config.stash.setdefault(_LINES_KEY, [])
    return lambda number, title: _Criterion(lines, number, title)


_LINES_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
