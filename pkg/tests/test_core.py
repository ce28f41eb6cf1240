import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from khi.core import (
    DimensionError,
    InvalidIntervalError,
    InvalidPredicateError,
    Object,
    ObjectSchema,
    RfannsQuery,
    distance,
    full_predicate,
    normalize_predicate,
    satisfies,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestDistance:
    def test_identity(self):
        assert distance([0, 0], [0, 0]) == 0.0

    def test_345(self):
        assert distance([0, 0], [3, 4]) == 5.0

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(3)
        x, y = rng.random(16, dtype=np.float32), rng.random(16, dtype=np.float32)
        naive = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(x, y)))
        assert distance(x, y) == pytest.approx(naive, rel=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            distance([0, 0], [0, 0, 0])

    @given(st.lists(st.tuples(finite, finite, finite), min_size=3, max_size=3))
    def test_triangle_inequality(self, pts):
        a, b, c = (np.array(p) / 1e3 for p in pts)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


class TestPredicates:
    def test_boundary_inclusive(self):
        b = normalize_predicate({0: (3.0, 4.0), 1: (4.0, 6.0)}, 2)
        assert satisfies([3.0, 4.0], b)
        assert not satisfies([2.9, 5.0], b)

    def test_unconstrained_attribute_is_open(self):
        b = normalize_predicate({0: (3.0, 4.0)}, 2)
        assert satisfies([3.5, 9.9], b)

    def test_padding(self):
        b = normalize_predicate({0: (1, 2)}, 3)
        assert b.intervals() == [(1.0, 2.0), (-math.inf, math.inf), (-math.inf, math.inf)]
        assert b.constrained == {0}

    def test_both_constrained(self):
        b = normalize_predicate({0: (3.0, 4.0), 1: (4.0, 6.0)}, ObjectSchema(2, 2))
        assert b.constrained == {0, 1} and b.cardinality == 2

    def test_empty_raw_rejected(self):
        with pytest.raises(InvalidPredicateError):
            normalize_predicate({}, 2)

    def test_bad_intervals(self):
        with pytest.raises(InvalidIntervalError):
            normalize_predicate({0: (2.0, 1.0)}, 2)
        with pytest.raises(InvalidIntervalError):
            normalize_predicate({0: (math.nan, 1.0)}, 2)
        with pytest.raises(InvalidPredicateError):
            normalize_predicate({5: (0.0, 1.0)}, 2)

    def test_arity_mismatch(self):
        with pytest.raises(DimensionError):
            satisfies([1.0], full_predicate(2))

    def test_mask_matches_scalar_scan(self):
        rng = np.random.default_rng(0)
        attrs = rng.random((2000, 3))
        b = normalize_predicate({0: (0.2, 0.7), 2: (0.1, 0.5)}, 3)
        expected = [all(b.lo[j] <= t[j] <= b.hi[j] for j in range(3)) for t in attrs]
        np.testing.assert_array_equal(b.mask(attrs), expected)

    @given(
        st.lists(finite, min_size=2, max_size=2),
        st.tuples(finite, finite),
        st.floats(0, 100),
        st.floats(0, 100),
    )
    def test_widening_is_monotone(self, tup, iv, grow_lo, grow_hi):
        lo, hi = sorted(iv)
        narrow = normalize_predicate({0: (lo, hi)}, 2)
        wide = normalize_predicate({0: (lo - grow_lo, hi + grow_hi)}, 2)
        if satisfies(tup, narrow):
            assert satisfies(tup, wide)

    def test_equality_and_hash(self):
        a = normalize_predicate({0: (1.0, 2.0)}, 2)
        b = normalize_predicate({0: (1.0, 2.0)}, 2)
        assert a == b and hash(a) == hash(b)


class TestObjects:
    def test_create_checks_schema(self):
        s = ObjectSchema(2, 1)
        o = Object.create(0, [1.0, 2.0], [3.0], s)
        assert o.vector.dtype == np.float32 and o.tuple.dtype == np.float64
        with pytest.raises(DimensionError):
            Object.create(0, [1.0], [3.0], s)

    def test_query_needs_positive_k(self):
        with pytest.raises(ValueError):
            RfannsQuery(np.zeros(2), full_predicate(1), k=0)
