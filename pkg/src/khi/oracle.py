"""Exact prefiltering baseline and recall."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RfannsQuery
from .query import SearchResult


@dataclass
class GroundTruth:
    ids: np.ndarray
    distances: np.ndarray
    filtered_size: int  # |O_B|

    def __len__(self) -> int:
        return int(self.ids.size)


def prefilter_knn(vectors: np.ndarray, attributes: np.ndarray, query: RfannsQuery, k: int | None = None) -> GroundTruth:
    """Materialise O_B, then rank it exhaustively.  Ties break by ascending id."""
    k = query.k if k is None else k
    mask = query.predicate.mask(attributes)
    ids = np.flatnonzero(mask)
    diff = np.asarray(vectors[ids], np.float64) - np.asarray(query.vector, np.float64)
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.lexsort((ids, dist))[:k]
    return GroundTruth(ids[order].astype(np.int64), dist[order], int(ids.size))


def ground_truth(vectors, attributes, queries, k: int) -> list[GroundTruth]:
    return [prefilter_knn(vectors, attributes, q, k) for q in queries]


def recall(result, truth: GroundTruth, k: int) -> float:
    """|result & truth| / min(k, |O_B|); 1.0 when nothing satisfies the predicate."""
    denom = min(k, truth.filtered_size)
    if denom == 0:
        return 1.0
    got = result.ids if isinstance(result, SearchResult) else np.asarray([r if np.isscalar(r) else r[0] for r in result])
    hit = np.intersect1d(np.asarray(got, np.int64)[:k], truth.ids[:k]).size
    return hit / denom


class Prefilter:
    """The prefiltering baseline behind the same search interface as the index."""

    def __init__(self, vectors: np.ndarray, attributes: np.ndarray) -> None:
        self.vectors = np.asarray(vectors, np.float32)
        self.attributes = np.asarray(attributes, np.float64)

    def search(self, query: RfannsQuery, params=None) -> SearchResult:
        k = params.k if params is not None else query.k
        gt = prefilter_knn(self.vectors, self.attributes, query, k)
        return SearchResult(gt.ids, gt.distances.astype(np.float32), dist_comps=gt.filtered_size, hops=0)
