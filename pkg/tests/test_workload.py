import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khi.workload import GenerationError, WorkloadSpec, gen_predicate, gen_workload, selectivity


def _brute_selectivity(attrs, pred):
    hits = 0
    for row in attrs:
        hits += all(pred.lo[j] <= row[j] <= pred.hi[j] for j in range(len(row)))
    return hits / len(attrs)


@pytest.fixture(scope="module")
def attrs():
    return np.random.default_rng(0).random((10_000, 4))


def test_sigma_one_full_domain(attrs):
    pred = gen_predicate(attrs, WorkloadSpec(1, 1.0, tol=0.0), np.random.default_rng(0))
    assert selectivity(attrs, pred) == 1.0


def test_bounds_formula():
    assert WorkloadSpec(1, 1 / 16).bounds() == (0.03125, 0.09375)


def test_sigma_64_brute_force(attrs):
    spec = WorkloadSpec(100, 1 / 64, seed=1)
    lo, hi = spec.bounds()
    for q in gen_workload(attrs, np.zeros((100, 2), np.float32), spec):
        assert lo <= _brute_selectivity(attrs, q.predicate) <= hi
        assert q.predicate.cardinality == 4


@pytest.mark.parametrize("sigma", [1 / 16, 1 / 64, 1 / 256])
def test_mean_selectivity(attrs, sigma):
    spec = WorkloadSpec(100, sigma, seed=2)
    lo, hi = spec.bounds()
    sels = [selectivity(attrs, q.predicate) for q in gen_workload(attrs, np.zeros((100, 2), np.float32), spec)]
    assert lo <= np.mean(sels) <= hi
    assert lo <= min(sels) and max(sels) <= hi


def test_partial_cardinality(attrs):
    spec = WorkloadSpec(50, 1 / 8, cardinality=2, seed=3)
    chosen = set()
    for q in gen_workload(attrs, np.zeros((50, 2), np.float32), spec):
        assert q.predicate.cardinality == 2
        chosen.add(tuple(sorted(q.predicate.constrained)))
        assert 1 / 16 <= selectivity(attrs, q.predicate) <= 3 / 16
    assert len(chosen) > 1


def test_empty_and_deterministic(attrs):
    qv = np.random.default_rng(1).random((20, 3), dtype=np.float32)
    assert gen_workload(attrs, qv, WorkloadSpec(0, 0.5)) == []
    a = gen_workload(attrs, qv, WorkloadSpec(20, 1 / 32, seed=9))
    b = gen_workload(attrs, qv, WorkloadSpec(20, 1 / 32, seed=9))
    assert [q.predicate for q in a] == [q.predicate for q in b]
    np.testing.assert_array_equal(a[3].vector, qv[3])
    c = gen_workload(attrs, qv, WorkloadSpec(20, 1 / 32, seed=10))
    assert [q.predicate for q in a] != [q.predicate for q in c]


def test_unattainable():
    attrs = np.zeros((1000, 2))
    attrs[:10] = 1.0  # 99% duplicate mass
    with pytest.raises(GenerationError, match=r"\[0, 1\]"):
        gen_predicate(attrs, WorkloadSpec(1, 1 / 4, tol=0.1), np.random.default_rng(0))


def test_spec_validation():
    with pytest.raises(ValueError):
        WorkloadSpec(1, 0.0)
    with pytest.raises(ValueError):
        WorkloadSpec(1, 0.5, tol=1.0)
    with pytest.raises(ValueError):
        gen_predicate(np.zeros((5, 2)), WorkloadSpec(1, 0.5, cardinality=3), np.random.default_rng(0))
    with pytest.raises(ValueError):
        gen_workload(np.zeros((5, 2)), np.zeros((1, 2)), WorkloadSpec(2, 0.5))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.sampled_from(["uniform", "normal", "lognormal"]))
def test_property_within_bounds(seed, i, kind):
    rng = np.random.default_rng(seed)
    data = {"uniform": rng.random, "normal": rng.standard_normal, "lognormal": lambda s: rng.lognormal(size=s)}[kind]
    attrs = data((2000, 3))
    spec = WorkloadSpec(1, 1 / 2**i, seed=seed)
    pred = gen_predicate(attrs, spec, np.random.default_rng(seed))
    lo, hi = spec.bounds()
    assert lo <= selectivity(attrs, pred) <= hi
