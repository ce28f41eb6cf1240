"""Query workloads with a target predicate selectivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RangePredicate, RfannsQuery, normalize_predicate

MAX_BISECTION_STEPS = 64
MAX_RETRIES = 1000


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class WorkloadSpec:
    query_count: int
    sigma: float
    tol: float = 0.5
    cardinality: int | None = None  # defaults to m
    sample_size: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError(f"sigma must be in (0, 1], got {self.sigma}")
        if not 0.0 <= self.tol < 1.0:
            raise ValueError(f"tol must be in [0, 1), got {self.tol}")
        if self.query_count < 0:
            raise ValueError("query_count must be >= 0")

    def bounds(self) -> tuple[float, float]:
        return self.sigma * (1.0 - self.tol), self.sigma * (1.0 + self.tol)


class QuantileSample:
    """Sorted per-attribute samples of finite values, for quantile lookups."""

    def __init__(self, attributes: np.ndarray, size: int, rng: np.random.Generator) -> None:
        attributes = np.asarray(attributes, np.float64)
        n = attributes.shape[0]
        rows = rng.choice(n, size=size, replace=False) if size < n else np.arange(n)
        self.columns = []
        for j in range(attributes.shape[1]):
            col = attributes[rows, j]
            col = np.sort(col[np.isfinite(col)])
            if col.size == 0:
                raise GenerationError(f"attribute {j} has no finite values")
            self.columns.append(col)

    def lower(self, j: int, q: float) -> float:
        col = self.columns[j]
        return float(col[math.floor(q * (col.size - 1))])

    def upper(self, j: int, q: float) -> float:
        col = self.columns[j]
        return float(col[math.ceil(q * (col.size - 1))])


def selectivity(attributes: np.ndarray, predicate: RangePredicate) -> float:
    return float(np.count_nonzero(predicate.mask(attributes))) / attributes.shape[0]


def gen_predicate(
    attributes: np.ndarray,
    spec: WorkloadSpec,
    rng: np.random.Generator,
    sample: QuantileSample | None = None,
) -> RangePredicate:
    """Draw a predicate whose exact selectivity on ``attributes`` lies within ``spec.bounds()``.

    Every constrained attribute starts from the same quantile width
    sigma**(1/|J|) around a uniformly drawn quantile centre; a shared width
    scale is then bisected until the selectivity lands in range.
    """
    attributes = np.asarray(attributes, np.float64)
    n, m = attributes.shape
    if n == 0:
        raise ValueError("empty dataset")
    card = m if spec.cardinality is None else spec.cardinality
    if not 1 <= card <= m:
        raise ValueError(f"cardinality must be in [1, {m}], got {card}")
    if sample is None:
        sample = QuantileSample(attributes, min(spec.sample_size, n), rng)
    low, high = spec.bounds()
    width = spec.sigma ** (1.0 / card)
    attrs = list(range(m)) if card == m else sorted(rng.choice(m, size=card, replace=False).tolist())
    cols = attributes[:, attrs]

    for _ in range(MAX_RETRIES):
        centers = rng.random(card)

        def make(scale: float) -> tuple[RangePredicate, float]:
            half = width * scale / 2.0
            raw = {}
            for slot, j in enumerate(attrs):
                qa = min(max(centers[slot] - half, 0.0), 1.0)
                qb = min(max(centers[slot] + half, 0.0), 1.0)
                raw[j] = (sample.lower(j, qa), sample.upper(j, qb))
            pred = normalize_predicate(raw, m)
            lo = pred.lo[attrs]
            hi = pred.hi[attrs]
            hits = np.count_nonzero(np.all((cols >= lo) & (cols <= hi), axis=1))
            return pred, hits / n

        s_lo, s_hi = 0.0, 2.0 / width
        scale = 1.0
        for _ in range(MAX_BISECTION_STEPS):
            pred, sel = make(scale)
            if low <= sel <= high:
                return pred
            if sel < low:
                s_lo = scale
            else:
                s_hi = scale
            scale = 0.5 * (s_lo + s_hi)
    raise GenerationError(
        f"could not reach selectivity in [{low:g}, {high:g}] on attributes {attrs} "
        f"after {MAX_RETRIES} retries"
    )


def gen_workload(
    attributes: np.ndarray,
    query_vectors: np.ndarray,
    spec: WorkloadSpec,
    k: int = 10,
) -> list[RfannsQuery]:
    """Pair query vector i with its own predicate, for i < spec.query_count."""
    query_vectors = np.asarray(query_vectors, np.float32)
    if spec.query_count > query_vectors.shape[0]:
        raise ValueError(f"need {spec.query_count} query vectors, got {query_vectors.shape[0]}")
    if spec.query_count == 0:
        return []
    attributes = np.asarray(attributes, np.float64)
    streams = np.random.SeedSequence(spec.seed).spawn(spec.query_count + 1)
    sample = QuantileSample(attributes, min(spec.sample_size, attributes.shape[0]),
                            np.random.default_rng(streams[0]))
    return [
        RfannsQuery(query_vectors[i], gen_predicate(attributes, spec, np.random.default_rng(s), sample), k)
        for i, s in enumerate(streams[1:])
    ]
