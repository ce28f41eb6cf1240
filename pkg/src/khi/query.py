"""Range-filtered search over a built index."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .builder import KhiIndex
from .core import DimensionError, RangePredicate, RfannsQuery

LEAF_TO_ROOT = "leaf"
ROOT_TO_LEAF = "root"


@dataclass(frozen=True)
class QueryParams:
    k: int = 10
    ef: int = 64
    c_e: int | None = None  # defaults to k
    c_n: int | None = None  # defaults to the index's M
    recon_order: str = LEAF_TO_ROOT

    def __post_init__(self) -> None:
        if self.k < 1 or self.ef < self.k:
            raise ValueError(f"need ef >= k >= 1, got k={self.k}, ef={self.ef}")
        if self.c_e is not None and self.c_e < 1:
            raise ValueError("c_e must be >= 1")
        if self.c_n is not None and self.c_n < 1:
            raise ValueError("c_n must be >= 1")
        if self.recon_order not in (LEAF_TO_ROOT, ROOT_TO_LEAF):
            raise ValueError(f"recon_order must be 'leaf' or 'root', got {self.recon_order!r}")

    def resolved(self, M: int) -> tuple[int, int]:
        return (self.c_e if self.c_e is not None else self.k, self.c_n if self.c_n is not None else M)


@dataclass
class SearchResult:
    ids: np.ndarray
    distances: np.ndarray
    dist_comps: int = 0
    hops: int = 0
    trace: np.ndarray | None = field(default=None, repr=False)
    trace_fill: np.ndarray | None = field(default=None, repr=False)  # |R^| after each hop

    def __len__(self) -> int:
        return int(self.ids.size)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(d)) for i, d in zip(self.ids, self.distances)]


class _State(threading.local):
    """Per-thread visited stamps, reused across queries."""

    def __init__(self) -> None:
        self.visited: np.ndarray | None = None
        self.stamp = 0

    def next(self, n: int) -> tuple[np.ndarray, int]:
        if self.visited is None or self.visited.size != n or self.stamp >= 2**31 - 2:
            self.visited = np.zeros(n, np.int32)
            self.stamp = 0
        self.stamp += 1
        return self.visited, self.stamp


_state = _State()


def _bounds(predicate: RangePredicate, m: int) -> tuple[np.ndarray, np.ndarray]:
    if predicate.m != m:
        raise DimensionError(f"predicate has {predicate.m} attributes, index has {m}")
    return np.ascontiguousarray(predicate.lo, np.float64), np.ascontiguousarray(predicate.hi, np.float64)


def range_filter(index: KhiIndex, predicate: RangePredicate, c_e: int) -> list[int]:
    """Entry points (object ids) satisfying ``predicate``, at most ``c_e``."""
    ids, _ = range_filter_ex(index, predicate, c_e)
    return ids


def range_filter_ex(index: KhiIndex, predicate: RangePredicate, c_e: int) -> tuple[list[int], bool]:
    """Like :func:`range_filter` and also reports whether the leaf-scan fallback ran."""
    lo, hi = _bounds(predicate, index.schema.m)
    out = np.empty(c_e, np.int64)
    cnt, fallback = K.range_filter(lo, hi, c_e, index.attributes_pos, index.tree_arrays, out)
    return index.tree.ordered_ids[out[:cnt]].tolist(), bool(fallback)


def recons_nbr(
    index: KhiIndex,
    object_id: int,
    predicate: RangePredicate,
    c_n: int,
    visited: np.ndarray,
    recon_order: str = LEAF_TO_ROOT,
) -> list[int]:
    """In-range, previously unvisited neighbours of ``object_id`` gathered along its tree path.

    ``visited`` is a boolean array indexed by object id and is updated in place:
    every inspected neighbour is marked, including out-of-range ones.
    """
    lo, hi = _bounds(predicate, index.schema.m)
    order = index.tree.ordered_ids
    stamps = visited[order].astype(np.int32)  # position space
    out = np.empty(c_n, np.int64)
    u = int(index.tree.position_of[object_id])
    cnt = K.recons_nbr(u, lo, hi, c_n, recon_order == LEAF_TO_ROOT, index.attributes_pos,
                       index.tree.leaf_level, index.indptr, index.neighbors, stamps, 1, out)
    visited[order[stamps == 1]] = True
    return order[out[:cnt]].tolist()


def _run(index: KhiIndex, query: RfannsQuery, params: QueryParams, want_trace: bool) -> SearchResult:
    q = query.vector
    if q.shape != (index.schema.d,):
        raise DimensionError(f"query vector length {q.size} != d={index.schema.d}")
    lo, hi = _bounds(query.predicate, index.schema.m)
    c_e, c_n = params.resolved(index.params.graph.M)
    k = params.k
    visited, stamp = _state.next(index.n)
    out_i = np.empty(k, np.int64)
    out_d = np.empty(k, np.float32)
    cnt, dcomp, hops, trace, fill = K.search(
        q, lo, hi, k, params.ef, c_e, c_n, params.recon_order == LEAF_TO_ROOT,
        index.vectors_pos, index.attributes_pos, index.tree_arrays, index.tree.leaf_level,
        index.indptr, index.neighbors, visited, stamp, want_trace, out_i, out_d,
    )
    return SearchResult(
        ids=index.tree.ordered_ids[out_i[:cnt]].astype(np.int64),
        distances=out_d[:cnt].copy(),
        dist_comps=int(dcomp),
        hops=int(hops),
        trace=trace.copy() if want_trace else None,
        trace_fill=fill.copy() if want_trace else None,
    )


def search(index: KhiIndex, query: RfannsQuery, params: QueryParams | None = None) -> SearchResult:
    """Approximate k nearest neighbours of ``query.vector`` among objects satisfying its predicate.

    ``params.k`` wins over ``query.k`` when params are given.
    """
    params = params or QueryParams(k=query.k, ef=max(query.k, 64))
    return _run(index, query, params, want_trace=False)


def traced_search(index: KhiIndex, query: RfannsQuery, params: QueryParams) -> SearchResult:
    """Same traversal as :func:`search`, recording the ef-heap threshold after every hop."""
    return _run(index, query, params, want_trace=True)
