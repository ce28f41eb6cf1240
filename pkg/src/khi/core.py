"""Domain types shared across the index: schemas, objects, range predicates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class DimensionError(ValueError):
    """Vector or tuple length does not match the schema."""


class InvalidIntervalError(ValueError):
    pass


class InvalidPredicateError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSchema:
    d: int
    m: int
    attribute_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.d < 1 or self.m < 1:
            raise ValueError(f"schema needs d >= 1 and m >= 1, got d={self.d}, m={self.m}")
        if not self.attribute_names:
            object.__setattr__(self, "attribute_names", tuple(f"a{i}" for i in range(self.m)))
        elif len(self.attribute_names) != self.m:
            raise ValueError("attribute_names must have m entries")


@dataclass(frozen=True)
class Object:
    id: int
    vector: np.ndarray
    tuple: np.ndarray

    @classmethod
    def create(cls, id: int, vector, tuple, schema: ObjectSchema | None = None) -> "Object":
        vec = np.asarray(vector, dtype=np.float32)
        tup = np.asarray(tuple, dtype=np.float64)
        if id < 0:
            raise ValueError("object ids are non-negative")
        if schema is not None:
            if vec.shape != (schema.d,):
                raise DimensionError(f"vector length {vec.size} != d={schema.d}")
            if tup.shape != (schema.m,):
                raise DimensionError(f"tuple length {tup.size} != m={schema.m}")
        if not np.all(np.isfinite(tup)):
            raise ValueError("attribute values must be finite")
        vec.setflags(write=False)
        tup.setflags(write=False)
        return cls(int(id), vec, tup)


@dataclass(frozen=True)
class RangePredicate:
    """Closed per-attribute intervals; unconstrained attributes span (-inf, inf)."""

    lo: np.ndarray
    hi: np.ndarray
    constrained: frozenset[int] = field(default_factory=frozenset)

    @property
    def m(self) -> int:
        return self.lo.shape[0]

    @property
    def cardinality(self) -> int:
        return len(self.constrained)

    def intervals(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]

    def mask(self, attributes: np.ndarray) -> np.ndarray:
        """Vectorised membership over an (n, m) attribute matrix."""
        attributes = np.asarray(attributes, dtype=np.float64)
        return np.all((attributes >= self.lo) & (attributes <= self.hi), axis=1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RangePredicate):
            return NotImplemented
        return (
            self.constrained == other.constrained
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self) -> int:
        return hash((self.constrained, self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True)
class RfannsQuery:
    vector: np.ndarray
    predicate: RangePredicate
    k: int = 10

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "vector", np.ascontiguousarray(self.vector, dtype=np.float32))


def distance(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(math.sqrt(float(np.dot(diff, diff))))


def satisfies(o: Object | np.ndarray | Sequence[float], predicate: RangePredicate) -> bool:
    t = o.tuple if isinstance(o, Object) else np.asarray(o, dtype=np.float64)
    if t.shape[0] != predicate.m:
        raise DimensionError(f"tuple length {t.shape[0]} != predicate arity {predicate.m}")
    return bool(np.all((t >= predicate.lo) & (t <= predicate.hi)))


def normalize_predicate(
    raw: Mapping[int, tuple[float, float]], schema: ObjectSchema | int
) -> RangePredicate:
    """Pad a partial {attribute: (lo, hi)} mapping to a full m-ary predicate."""
    m = schema.m if isinstance(schema, ObjectSchema) else int(schema)
    if not raw:
        raise InvalidPredicateError("a range predicate must constrain at least one attribute")
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    for attr, (a, b) in raw.items():
        if not 0 <= attr < m:
            raise InvalidPredicateError(f"attribute index {attr} out of range for m={m}")
        if math.isnan(a) or math.isnan(b):
            raise InvalidIntervalError(f"NaN bound on attribute {attr}")
        if a > b:
            raise InvalidIntervalError(f"empty interval [{a}, {b}] on attribute {attr}")
        lo[attr] = a
        hi[attr] = b
    lo.setflags(write=False)
    hi.setflags(write=False)
    return RangePredicate(lo, hi, frozenset(int(a) for a in raw))


def full_predicate(m: int) -> RangePredicate:
    """Predicate constraining every attribute to (-inf, inf)."""
    return normalize_predicate({i: (-math.inf, math.inf) for i in range(m)}, m)
