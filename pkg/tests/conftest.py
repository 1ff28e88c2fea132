import numpy as np
import pytest

from wlsh.metric import Dataset, WeightVector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_weights(rng, count, d, lo=1.0, hi=10.0):
    return [WeightVector(i, rng.uniform(lo, hi, d)) for i in range(count)]


def random_dataset(rng, n, d, lo=0, hi=10000):
    return Dataset(rng.integers(lo, hi, size=(n, d), endpoint=True), (lo, hi))


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
