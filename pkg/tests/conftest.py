import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lipgeo import corpus  # noqa: E402
from lipgeo.metric import build_graph  # noqa: E402

ACCEPTANCE = {}


def record(number, passed, detail):
    """Log one part of an acceptance criterion; a criterion passes only if all its parts do."""
    ok, text = ACCEPTANCE.get(number, (True, ""))
    ACCEPTANCE[number] = (ok and bool(passed), f"{text}; {detail}" if text else detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def sampled():
    """Cache of (cloud, graph) per (corpus name, density)."""
    cache = {}

    def get(name, density=None, seed=0):
        key = (name, density, seed)
        if key not in cache:
            cloud = corpus.get(name).sample(density, seed=seed)
            cache[key] = (cloud, build_graph(cloud))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
