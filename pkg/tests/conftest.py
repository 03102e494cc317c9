import numpy as np
import pytest

from activegrowth import experiments, mnist

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""

    def _report(criterion, ok, detail=""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


@pytest.fixture(scope="session")
def gridworld_learned():
    """``(source, IngestResult)`` for the canonical gridworld curriculum."""
    return experiments.learn_gridworld()


@pytest.fixture(scope="session")
def hanoi_learned():
    return experiments.learn_hanoi()


@pytest.fixture(scope="session")
def mnist_files(tmp_path_factory):
    return mnist.write_bundled_sample(tmp_path_factory.mktemp("digits"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
