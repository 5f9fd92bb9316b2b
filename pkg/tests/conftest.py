import numpy as np
import pytest

from pdfair.dataset import ColumnSpec, load_schema, synthesize

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240818)


@pytest.fixture(scope="session")
def kaggle_schema():
    return load_schema("schema_kaggle_default.json")


@pytest.fixture(scope="session")
def small_schema():
    return (
        ColumnSpec("income", "numeric", synth_range=(1000, 9000)),
        ColumnSpec("amount", "numeric"),
        ColumnSpec("area", "categorical", categories=("Rural", "Semiurban", "Urban")),
        ColumnSpec("gender", "sensitive-categorical", categories=("Male", "Female")),
        ColumnSpec("age", "sensitive-numeric", synth_range=(18, 70)),
        ColumnSpec("default", "target"),
    )


@pytest.fixture(scope="session")
def small_frame(small_schema):
    return synthesize(2000, small_schema, 0.2, seed=3, missing_rate=0.05)
