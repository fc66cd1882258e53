import sys
from pathlib import Path

import numpy as np
import pytest

from mconcord.core import BlockPrecision, Dataset, NodePartition

sys.path.insert(0, str(Path(__file__).parent))


def random_estimate(part, rng, density=0.7, scale=0.3):
    blocks = {}
    for i, j in part.pairs():
        if rng.uniform() < density:
            blocks[(i, j)] = scale * rng.standard_normal((part.dims[i], part.dims[j]))
    sigma = rng.uniform(0.5, 2.0, part.total_dim)
    return BlockPrecision(sigma, blocks, part)


def random_data(part, n, rng, mix=0.4, center=True):
    d = part.total_dim
    a = np.eye(d) + mix * rng.standard_normal((d, d)) / np.sqrt(d)
    return Dataset.from_array(rng.standard_normal((n, d)) @ a, part, center=center)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_part():
    return NodePartition([1, 2, 2])


@pytest.fixture
def small_problem(rng, small_part):
    data = random_data(small_part, 15, rng)
    return random_estimate(small_part, rng), data


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
