"""Single-level proximity graphs: beam search, RNG pruning, leaf build, child merge.

The functions here are the standalone surface over the compiled kernels in
``_kernels``; the index builder drives the same kernels directly over
level-wide arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K


@dataclass(frozen=True)
class GraphParams:
    M: int = 32
    ef_build: int | None = None

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if self.M > 255:
            raise ValueError("M must fit the one-byte degree field (<= 255)")
        if self.ef_build is None:
            object.__setattr__(self, "ef_build", self.M)
        if self.ef_build < 1:
            raise ValueError("ef_build must be >= 1")


@dataclass
class NodeGraph:
    """Adjacency of one tree node, in object ids, as CSR over ``members``."""

    owner: int
    members: np.ndarray
    indptr: np.ndarray
    neighbors: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return int(self.members.size)

    def _local(self, object_id: int) -> int:
        hit = np.flatnonzero(self.members == object_id)
        if hit.size == 0:
            raise KeyError(f"object {object_id} is not in the graph of node {self.owner}")
        return int(hit[0])

    def neighbors_of(self, object_id: int) -> np.ndarray:
        i = self._local(object_id)
        return self.neighbors[self.indptr[i] : self.indptr[i + 1]]

    def distances_of(self, object_id: int) -> np.ndarray:
        i = self._local(object_id)
        return self.distances[self.indptr[i] : self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> dict[int, list[int]]:
        return {
            int(o): self.neighbors[self.indptr[i] : self.indptr[i + 1]].tolist()
            for i, o in enumerate(self.members)
        }

    def edge_count(self) -> int:
        return int(self.indptr[-1])


# ---------------------------------------------------------------------------
# conversion helpers between NodeGraph (object ids) and dense local arrays


def _dense(graph: NodeGraph, lookup: dict[int, int], size: int, M: int, offset: int = 0):
    nbr = np.zeros((size, M), np.int32)
    dst = np.zeros((size, M), np.float32)
    deg = np.zeros(size, np.int32)
    for i in range(len(graph)):
        s, e = graph.indptr[i], graph.indptr[i + 1]
        row = offset + i
        deg[row] = e - s
        nbr[row, : e - s] = [lookup[int(v)] for v in graph.neighbors[s:e]]
        dst[row, : e - s] = graph.distances[s:e]
    return nbr, dst, deg


def _from_dense(owner: int, members: np.ndarray, nbr, dst, deg) -> NodeGraph:
    indptr, flat_i, flat_d = K.dense_to_csr(nbr, dst, deg)
    return NodeGraph(owner, members.copy(), indptr, members[flat_i].astype(np.int64), flat_d)


def _local_vectors(vectors: np.ndarray, members: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(vectors, dtype=np.float32)[members])


# ---------------------------------------------------------------------------
# operations


def rng_prune(vectors: np.ndarray, center: int, candidates, M: int) -> list[tuple[int, float]]:
    """Relative-neighbourhood pruning of ``candidates`` [(id, distance), ...] around ``center``.

    Distances between candidates are computed from ``vectors`` (indexed by id).
    """
    if not candidates:
        return []
    ids = np.array([int(c[0]) for c in candidates], np.int64)
    if np.any(ids == center):
        raise ValueError("candidates must exclude the center")
    vecs = np.ascontiguousarray(vectors, dtype=np.float32)
    cand_i = ids.copy()
    cand_d = np.array([c[1] for c in candidates], np.float32)
    out_i = np.empty(M, np.int64)
    out_d = np.empty(M, np.float32)
    kept = K.rng_prune(vecs, cand_i, cand_d, ids.size, M, out_i, out_d)
    return [(int(out_i[t]), float(out_d[t])) for t in range(kept)]


def greedy_search(graph: NodeGraph, vectors: np.ndarray, query_vector, ef: int, entries) -> list[tuple[int, float]]:
    """Beam search for ``query_vector`` over ``graph``; ascending (id, distance) list of size <= ef."""
    entries = list(entries)
    if not entries:
        raise ValueError("greedy_search needs at least one entry point")
    members = np.asarray(graph.members, np.int64)
    lookup = {int(o): i for i, o in enumerate(members)}
    size = members.size
    M = max(1, int(graph.degrees().max(initial=0)))
    nbr, _, deg = _dense(graph, lookup, size, M)
    vecs = _local_vectors(vectors, members)
    q = np.ascontiguousarray(query_vector, dtype=np.float32)
    ent = np.array([lookup[int(e)] for e in entries], np.int64)
    out_i = np.empty(ef, np.int64)
    out_d = np.empty(ef, np.float32)
    cnt = K.search_layer(
        vecs, q, -1, ent, nbr, deg, 0, ef,
        np.zeros(size, np.int32), 1,
        np.empty(size, np.float32), np.empty(size, np.int64),
        np.empty(ef + 1, np.float32), np.empty(ef + 1, np.int64),
        out_i, out_d,
    )
    return [(int(members[out_i[t]]), float(out_d[t])) for t in range(cnt)]


def build_leaf_graph(vectors: np.ndarray, members, params: GraphParams | None = None, owner: int = -1) -> NodeGraph:
    """Incremental insertion of ``members`` (object ids, slice order)."""
    params = params or GraphParams()
    members = np.asarray(members, np.int64)
    if members.size == 0:
        raise ValueError("a graph needs at least one object")
    size = members.size
    M = params.M
    vecs = _local_vectors(vectors, members)
    nbr = np.zeros((size, M), np.int32)
    dst = np.zeros((size, M), np.float32)
    deg = np.zeros(size, np.int32)
    dummy = np.zeros((1, M), np.int32), np.zeros((1, M), np.float32), np.zeros(1, np.int32)
    K.build_node(vecs, 0, -1, size, M, params.ef_build, nbr, dst, deg, *dummy)
    return _from_dense(owner, members, nbr, dst, deg)


def merge_graphs(
    left: NodeGraph,
    right: NodeGraph,
    vectors: np.ndarray,
    params: GraphParams | None = None,
    owner: int = -1,
    batch_size: int | None = None,
    executor=None,
    threads: int = 1,
) -> NodeGraph:
    """Parent graph from its children: copy ``left``, then insert every object of ``right``.

    With ``batch_size`` set, right-slice insertions run in batches whose
    searches are independent (and may fan out over ``executor``); batch size 1
    reproduces the sequential merge exactly.
    """
    params = params or GraphParams()
    members = np.concatenate([left.members, right.members]).astype(np.int64)
    lookup = {int(o): i for i, o in enumerate(members)}
    size = members.size
    mid = len(left)
    M = params.M
    vecs = _local_vectors(vectors, members)
    cnbr = np.zeros((size, M), np.int32)
    cdst = np.zeros((size, M), np.float32)
    cdeg = np.zeros(size, np.int32)
    for g, off in ((left, 0), (right, mid)):
        a, b, c = _dense(g, lookup, len(g), M)
        cnbr[off : off + len(g)] = a
        cdst[off : off + len(g)] = b
        cdeg[off : off + len(g)] = c
    nbr = np.zeros((size, M), np.int32)
    dst = np.zeros((size, M), np.float32)
    deg = np.zeros(size, np.int32)
    if batch_size is None:
        K.build_node(vecs, 0, mid, size, M, params.ef_build, nbr, dst, deg, cnbr, cdst, cdeg)
    else:
        batched_merge(vecs, 0, mid, size, M, params.ef_build, nbr, dst, deg, cnbr, cdst, cdeg,
                      batch_size, executor, threads)
    return _from_dense(owner, members, nbr, dst, deg)


def batched_merge(vecs, b, mid, e, M, ef, nbr, dst, deg, cnbr, cdst, cdeg, batch_size, executor=None, threads=1):
    """Right-slice insertion in batches: parallel searches, then sequential linking."""
    K.merge_prepare(b, mid, e, nbr, dst, deg, cnbr, cdst, cdeg)
    workers = max(1, threads if executor is not None else 1)
    size = e - b
    visited = [np.zeros(size, np.int32) for _ in range(workers)]
    stamps = [0] * workers
    res_i = np.empty((batch_size, ef), np.int64)
    res_d = np.empty((batch_size, ef), np.float32)
    res_cnt = np.zeros(batch_size, np.int64)
    for s in range(mid, e, batch_size):
        t = min(s + batch_size, e)
        cuts = np.linspace(s, t, workers + 1).astype(np.int64)
        jobs = [(w, int(cuts[w]), int(cuts[w + 1])) for w in range(workers) if cuts[w] < cuts[w + 1]]

        def run(job):
            w, lo, hi = job
            return w, K.merge_search_batch(vecs, b, lo, hi, ef, nbr, deg, visited[w], stamps[w],
                                           res_i, res_d, res_cnt, lo - s)

        results = executor.map(run, jobs) if executor is not None and len(jobs) > 1 else map(run, jobs)
        for w, stamp in results:
            stamps[w] = stamp
        K.merge_link_batch(vecs, mid, s, t, M, nbr, dst, deg, cnbr, cdst, cdeg,
                           res_i[: t - s], res_d[: t - s], res_cnt[: t - s])
