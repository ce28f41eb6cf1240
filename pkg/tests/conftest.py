import numpy as np
import pytest

from khi.builder import BuildParams, build_index
from khi.graph import GraphParams
from khi.tree import TreeParams

# Eight objects o1..o8 (ids 0..7) with two attributes each.
EXAMPLE_ATTRS = np.array(
    [[1.0, 1.0], [2.0, 1.4], [3.0, 4.5], [3.4, 5.0], [3.6, 4.2], [3.8, 5.0], [4.5, 6.5], [5.0, 8.0]]
)
# 2-d embeddings chosen so that, for a query at the origin restricted to
# [3,4] x [4,6], the two nearest in-range objects are o3 and o4.
EXAMPLE_VECS = np.array(
    [[0.5, 0.2], [-0.3, -0.5], [1.0, 0.0], [0.0, 1.2], [3.0, 3.0], [-3.0, 2.5], [0.2, -0.6], [5.0, 5.0]],
    dtype=np.float32,
)


@pytest.fixture(scope="session")
def example_index():
    params = BuildParams(tree=TreeParams(3.0, 2), graph=GraphParams(M=2))
    return build_index(EXAMPLE_VECS, EXAMPLE_ATTRS, params)


def uniform_dataset(n, d=16, m=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((n, d), dtype=np.float32), rng.random((n, m))


@pytest.fixture(scope="session")
def small_data():
    return uniform_dataset(1000, d=8, m=3, seed=11)


@pytest.fixture(scope="session")
def small_index(small_data):
    v, a = small_data
    return build_index(v, a, BuildParams(graph=GraphParams(M=16)))


@pytest.fixture(scope="session")
def mid_data():
    return uniform_dataset(10_000, d=16, m=4, seed=5)


@pytest.fixture(scope="session")
def mid_index(mid_data):
    v, a = mid_data
    return build_index(v, a, BuildParams())


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num:>2}. {title}: {detail}")
