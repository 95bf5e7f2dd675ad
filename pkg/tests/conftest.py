import time

import numpy as np
import pytest

from loadflex import features, ingest, kmeans, synth

_ACCEPTANCE = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def f1():
    """Two 1-D clusters {0, 0.2} and {0.8, 1.0}."""
    x = np.array([[0.0], [0.2], [0.8], [1.0]])
    return x, kmeans.from_assignments(x, [0, 0, 1, 1])


class Corpus:
    def __init__(self, spec):
        start = time.perf_counter()
        self.spec = spec
        slices, self.report = ingest.build_day_slices(synth.generate(spec))
        self.records, self.skipped = features.household_records(slices)
        self.matrix = features.normalize(features.build_matrix(self.records))
        self.build_seconds = time.perf_counter() - start


@pytest.fixture(scope="session")
def default_corpus():
    return Corpus(synth.default_spec())


@pytest.fixture(scope="session")
def small_corpus():
    return Corpus(synth.default_spec(seed=3, households=40, days=30))
