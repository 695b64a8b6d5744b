import json
from pathlib import Path

import numpy as np
import pytest

from propensity.data import (SplitSpec, SyntheticConfig, clean, encode, expand_date,
                             generate_synthetic, oversample, time_split)

FIXTURES = Path(__file__).parent / "fixtures"
ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def benchmark():
    with open(FIXTURES / "benchmark.json", encoding="utf-8") as fh:
        return json.load(fh)


def encoded_split(n_rows, seed=0, label_noise=True, balance=True):
    """Synthetic rows through clean, date expansion, time split and encoding."""
    ds = generate_synthetic(SyntheticConfig(n_rows=n_rows, label_noise=label_noise), seed)
    ds = expand_date(clean(ds), "due_date")
    train, test = time_split(ds, SplitSpec(seed=seed))
    train_enc, test_enc = encode(train, test)
    if balance:
        train_enc = oversample(train_enc, seed)
    return train_enc, test_enc


@pytest.fixture(scope="session")
def small_split():
    return encoded_split(1500, seed=1)


@pytest.fixture(scope="session")
def separable_split():
    return encoded_split(2000, seed=0, label_noise=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion(request):
    """Record one acceptance line, print it, and fail the test when it is red."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
