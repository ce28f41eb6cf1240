"""Full index construction: partitioning tree, then bottom-up per-node graphs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import DimensionError, ObjectSchema
from .graph import GraphParams, NodeGraph, batched_merge
from .tree import PartitionTree, TreeParams, build_tree

log = logging.getLogger(__name__)

HEADER_BYTES = 4 + 2 + 6 * 4 + 8 + 2 * 4
NODE_RECORD_BYTES = 5 * 4 + 8 + 8 + 2 * 4


@dataclass(frozen=True)
class BuildParams:
    tree: TreeParams = field(default_factory=TreeParams)
    graph: GraphParams = field(default_factory=GraphParams)
    tau_p: int = 100
    threads: int = 1
    # level-wise parallelism only; output identical to threads=1
    deterministic: bool = False
    # right-slice insertions per batch in the intra-node parallel path
    merge_batch: int = 256

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.tau_p < 0:
            raise ValueError("tau_p must be >= 0")


@dataclass
class KhiIndex:
    schema: ObjectSchema
    vectors: np.ndarray  # (n, d) float32, object-id order
    attributes: np.ndarray  # (n, m) float64, object-id order
    tree: PartitionTree
    indptr: np.ndarray  # (height, n + 1) offsets into neighbors, position space
    neighbors: np.ndarray  # int32 positions
    distances: np.ndarray  # float32
    params: BuildParams
    level_seconds: list[float] = field(default_factory=list)
    build_seconds: float = 0.0

    def __post_init__(self) -> None:
        order = self.tree.ordered_ids
        self.vectors_pos = np.ascontiguousarray(self.vectors[order])
        self.attributes_pos = np.ascontiguousarray(self.attributes[order])
        t = self.tree
        self.tree_arrays = (
            t.left.astype(np.int64), t.right.astype(np.int64), t.split_dim.astype(np.int64),
            t.excluded, t.region_lo, t.region_hi, t.begin, t.end, t.height,
        )

    @property
    def n(self) -> int:
        return self.tree.n

    def graph(self, node: int) -> NodeGraph:
        t = self.tree
        lv = t.level[node]
        b, e = int(t.begin[node]), int(t.end[node])
        ptr = self.indptr[lv, b : e + 1]
        s, f = int(ptr[0]), int(ptr[-1])
        return NodeGraph(
            owner=int(node),
            members=t.ordered_ids[b:e].copy(),
            indptr=(ptr - s).astype(np.int64),
            neighbors=t.ordered_ids[self.neighbors[s:f]].astype(np.int64),
            distances=self.distances[s:f].copy(),
        )

    def graphs(self) -> list[NodeGraph]:
        return [self.graph(p) for p in range(self.tree.node_count)]

    def neighbor_slots(self) -> int:
        return int(self.neighbors.size)

    def search(self, query, params=None):
        from .query import search

        return search(self, query, params)


def _level_parallel(executor, threads, nodes, tree, vecs, M, ef, cur, child):
    chunks = [c for c in np.array_split(nodes, threads) if c.size]
    futures = [
        executor.submit(K.build_nodes, c, tree.begin, tree.end, tree.left, vecs, M, ef, *cur, *child)
        for c in chunks
    ]
    for f in futures:
        f.result()


def build_index(
    vectors: np.ndarray,
    attributes: np.ndarray,
    params: BuildParams | None = None,
    schema: ObjectSchema | None = None,
) -> KhiIndex:
    params = params or BuildParams()
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    attributes = np.ascontiguousarray(attributes, dtype=np.float64)
    if vectors.ndim != 2 or attributes.ndim != 2:
        raise DimensionError("vectors and attributes must be 2-d arrays")
    if vectors.shape[0] != attributes.shape[0]:
        raise DimensionError(f"{vectors.shape[0]} vectors but {attributes.shape[0]} attribute tuples")
    if vectors.shape[0] < 1:
        raise ValueError("cannot index an empty dataset")
    schema = schema or ObjectSchema(vectors.shape[1], attributes.shape[1])
    if (schema.d, schema.m) != (vectors.shape[1], attributes.shape[1]):
        raise DimensionError("dataset shape disagrees with the schema")

    start = time.perf_counter()
    tree = build_tree(attributes, params.tree)
    n = tree.n
    M = params.graph.M
    ef = params.graph.ef_build
    vecs = np.ascontiguousarray(vectors[tree.ordered_ids])
    levels = tree.levels()
    h = tree.height
    csr: list = [None] * h
    level_seconds = [0.0] * h
    child = (np.zeros((1, M), np.int32), np.zeros((1, M), np.float32), np.zeros(1, np.int32))
    executor = ThreadPoolExecutor(params.threads) if params.threads > 1 else None
    try:
        for lv in range(h - 1, -1, -1):
            t0 = time.perf_counter()
            nodes = levels[lv].astype(np.int64)
            cur = (np.empty((n, M), np.int32), np.empty((n, M), np.float32), np.zeros(n, np.int32))
            if executor is None:
                K.build_nodes(nodes, tree.begin, tree.end, tree.left, vecs, M, ef, *cur, *child)
            elif params.deterministic or nodes.size >= params.tau_p:
                _level_parallel(executor, params.threads, nodes, tree, vecs, M, ef, cur, child)
            else:
                for p in nodes:
                    b, e = int(tree.begin[p]), int(tree.end[p])
                    if tree.left[p] < 0:
                        K.build_node(vecs, b, -1, e, M, ef, *cur, *child)
                    else:
                        mid = int(tree.end[tree.left[p]])
                        batched_merge(vecs, b, mid, e, M, ef, *cur, *child,
                                      params.merge_batch, executor, params.threads)
            csr[lv] = K.dense_to_csr(*cur)
            child = cur
            level_seconds[lv] = time.perf_counter() - t0
            log.debug("level %d: %d nodes in %.2fs", lv, nodes.size, level_seconds[lv])
    finally:
        if executor is not None:
            executor.shutdown()

    offsets = np.cumsum([0] + [c[1].size for c in csr])
    indptr = np.stack([c[0] + off for c, off in zip(csr, offsets[:-1])])
    index = KhiIndex(
        schema=schema,
        vectors=vectors,
        attributes=attributes,
        tree=tree,
        indptr=indptr,
        neighbors=np.concatenate([c[1] for c in csr]),
        distances=np.concatenate([c[2] for c in csr]),
        params=params,
        level_seconds=level_seconds,
    )
    index.build_seconds = time.perf_counter() - start
    return index


def graph_bytes(index: KhiIndex) -> int:
    """Serialized adjacency size: one degree byte per (node, object) plus 4 bytes per edge."""
    memberships = int(np.sum(index.tree.end - index.tree.begin))
    return memberships + 4 * index.neighbor_slots()


def tree_bytes(index: KhiIndex) -> int:
    return HEADER_BYTES + 4 * index.n + NODE_RECORD_BYTES * index.tree.node_count


def space_bound_bytes(n: int, M: int, height: int) -> int:
    """Adjacency bytes if each object sat in ``height`` graphs with a full list of M."""
    return n * height * (1 + 4 * M)


def build_report(index: KhiIndex) -> dict:
    return {
        "build_seconds": index.build_seconds,
        "graph_bytes": graph_bytes(index),
        "tree_bytes": tree_bytes(index),
        "per_level_seconds": list(index.level_seconds),
        "height": index.tree.height,
        "node_count": index.tree.node_count,
        "neighbor_slots": index.neighbor_slots(),
    }
