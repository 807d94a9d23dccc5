import pytest

from t800.harness import default_policies
from t800.synth import build_training_dataset
from t800.trainer import stratified_split


@pytest.fixture(scope="session")
def dataset():
    return build_training_dataset(seed=3)


@pytest.fixture(scope="session")
def split(dataset):
    return stratified_split(dataset, 0.7, 3)


@pytest.fixture(scope="session")
def policies():
    """Desk-scale models for every policy code, trained once per session."""
    return default_policies(seed=0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
