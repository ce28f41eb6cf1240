"""Recall/throughput sweeps over ef and per-hop threshold traces."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import RfannsQuery
from .oracle import GroundTruth, recall
from .query import QueryParams, SearchResult, traced_search


class BenchInputError(ValueError):
    pass


@dataclass(frozen=True)
class BenchPoint:
    ef: int
    recall: float
    qps: float
    dist_comps: float
    hops: float
    threads: int


@dataclass
class HopTrace:
    """Threshold (farthest member of the result heap) after each hop."""

    thresholds: np.ndarray
    fill: np.ndarray  # result-heap size after each hop
    ef: int

    def __len__(self) -> int:
        return int(self.thresholds.size)

    def first_full_hop(self) -> int | None:
        """Index of the first hop at which the heap held ef objects, if any."""
        hit = np.flatnonzero(self.fill >= self.ef)
        return int(hit[0]) if hit.size else None

    def rows(self) -> list[tuple[int, float]]:
        return [(h, float(t)) for h, t in enumerate(self.thresholds)]


def _run_batch(searcher, queries, params, executor) -> list[SearchResult]:
    if executor is None:
        return [searcher.search(q, params) for q in queries]
    return list(executor.map(lambda q: searcher.search(q, params), queries))


def run_bench(
    searcher,
    queries: list[RfannsQuery],
    truths: list[GroundTruth],
    ef_list,
    k: int = 10,
    threads: int = 1,
    base: QueryParams | None = None,
) -> list[BenchPoint]:
    """One point per ef.  ``searcher`` is anything with ``search(query, params)``."""
    ef_list = [int(e) for e in ef_list]
    if len(queries) != len(truths):
        raise BenchInputError(f"{len(queries)} queries but {len(truths)} ground-truth entries")
    if not queries:
        raise BenchInputError("empty workload")
    if not ef_list or any(b < a for a, b in zip(ef_list, ef_list[1:])):
        raise BenchInputError(f"ef_list must be non-empty and ascending, got {ef_list}")
    if ef_list[0] < k:
        raise BenchInputError(f"smallest ef {ef_list[0]} is below k={k}")
    if threads < 1:
        raise BenchInputError("threads must be >= 1")
    base = base or QueryParams(k=k, ef=ef_list[0])

    points = []
    executor = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for ef in ef_list:
            params = replace(base, k=k, ef=ef)
            _run_batch(searcher, queries, params, executor)  # warm-up
            t0 = time.perf_counter()
            results = _run_batch(searcher, queries, params, executor)
            elapsed = time.perf_counter() - t0
            points.append(
                BenchPoint(
                    ef=ef,
                    recall=float(np.mean([recall(r, t, k) for r, t in zip(results, truths)])),
                    qps=len(queries) / max(elapsed, 1e-9),
                    dist_comps=float(np.mean([r.dist_comps for r in results])),
                    hops=float(np.mean([r.hops for r in results])),
                    threads=threads,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def hop_trace(index, query: RfannsQuery, params: QueryParams) -> HopTrace:
    res = traced_search(index, query, params)
    return HopTrace(res.trace, res.trace_fill, params.ef)


def write_bench_csv(path, points: list[BenchPoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["ef", "recall", "qps", "dist_comps", "hops", "threads"])
        for p in points:
            w.writerow([p.ef, f"{p.recall:.6g}", f"{p.qps:.6g}", f"{p.dist_comps:.6g}", f"{p.hops:.6g}", p.threads])


def write_trace_csv(path, traces: list[HopTrace]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["query_id", "hop", "threshold"])
        for qid, tr in enumerate(traces):
            for hop, th in tr.rows():
                w.writerow([qid, hop, f"{th:.6g}"])
