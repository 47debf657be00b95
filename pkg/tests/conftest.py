import numpy as np
import pytest
from hypothesis import settings

from causalrank.data import ColumnSchema, Dataset

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def make_dataset(values, target, names=None):
    values = np.asarray(values, dtype=float)
    names = names or [f"x{i}" for i in range(values.shape[1])]
    schema = [ColumnSchema(n, "continuous") for n in names] + [ColumnSchema("y", "target")]
    return Dataset(schema, tuple(names), ("continuous",) * len(names), values, target, "y")


@pytest.fixture
def write_file(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def blobs():
    """Two well-separated 2-D Gaussian blobs, 100 per class."""
    rng = np.random.default_rng(7)
    X = np.vstack([rng.normal(-2.0, 1.0, (100, 2)), rng.normal(2.0, 1.0, (100, 2))])
    y = np.repeat([0, 1], 100)
    return make_dataset((X - X.mean(0)) / X.std(0), y)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion for the run summary."""

    def _record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
