import pytest

from socgcf.data import preprocess
from socgcf.synthetic import SyntheticConfig, generate, write_raw_files

SMALL = SyntheticConfig(n_users=150, n_items=200, mean_interactions=30, mean_friends=6, seed=7)
SMALL_RATIO = 3.0


@pytest.fixture(scope="session")
def small_raw():
    return generate(SMALL)


@pytest.fixture(scope="session")
def small_dataset(small_raw):
    raw, social = small_raw
    return preprocess(raw, social, ratio=SMALL_RATIO)


@pytest.fixture(scope="session")
def small_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("raw")
    inter, social = write_raw_files(d, SMALL)
    return inter, social


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
