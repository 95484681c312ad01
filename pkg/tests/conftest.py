import sys

import numpy as np
import pytest

from marlene.drift import DriftConfig
from marlene.learners import NAIVE_BAYES, LearnerConfig


@pytest.fixture
def nb():
    return LearnerConfig(kind=NAIVE_BAYES)


@pytest.fixture
def touchy():
    """A detector configuration that fires on short streams."""
    return DriftConfig(lambda_decay=0.9, min_instances=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
