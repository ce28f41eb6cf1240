"""On-disk formats: vector/attribute matrices, index files, workloads, ground truth.

All integers and floats are little-endian.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numba as nb
import numpy as np

from . import _kernels as K
from .builder import HEADER_BYTES, NODE_RECORD_BYTES, BuildParams, KhiIndex
from .core import ObjectSchema, RfannsQuery, normalize_predicate
from .graph import GraphParams
from .oracle import GroundTruth
from .tree import PartitionTree, TreeParams, compute_regions

MAGIC = b"KHI1"
VERSION = 1
_HEADER = struct.Struct("<4sH6Id2I")
_NODE = np.dtype(
    [
        ("level", "<i4"), ("parent", "<i4"), ("left", "<i4"), ("right", "<i4"),
        ("split_dim", "<i4"), ("split_value", "<f8"), ("excluded", "<u8"),
        ("begin", "<u4"), ("end", "<u4"),
    ]
)
assert _HEADER.size == HEADER_BYTES and _NODE.itemsize == NODE_RECORD_BYTES


class FormatError(ValueError):
    """Malformed matrix, workload or ground-truth file."""


class IndexFormatError(ValueError):
    pass


class MagicMismatchError(IndexFormatError):
    pass


class VersionMismatchError(IndexFormatError):
    pass


class DatasetMismatchError(IndexFormatError):
    pass


class DanglingNeighborError(IndexFormatError):
    pass


# ---------------------------------------------------------------------------
# dense matrices: u32 n, u32 cols, then n * cols values row-major


def _write_matrix(path, data: np.ndarray, dtype: str) -> None:
    data = np.ascontiguousarray(data, dtype=dtype)
    if data.ndim != 2:
        raise ValueError("expected a 2-d array")
    with open(path, "wb") as f:
        f.write(struct.pack("<II", *data.shape))
        f.write(data.tobytes())


def _read_matrix(path, dtype: str) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)}")
    n, cols = struct.unpack_from("<II", raw, 0)
    if n == 0 or cols == 0:
        raise FormatError(f"{path}: zero count or dimension (n={n}, cols={cols}) at byte offset 0")
    width = np.dtype(dtype).itemsize
    need = 8 + n * cols * width
    if len(raw) < need:
        raise FormatError(f"{path}: declares {n}x{cols} values but data ends at byte offset {len(raw)} (need {need})")
    if len(raw) > need:
        raise FormatError(f"{path}: {len(raw) - need} trailing bytes after offset {need}")
    return np.frombuffer(raw, dtype=dtype, offset=8, count=n * cols).reshape(n, cols).copy()


def write_vectors(path, vectors: np.ndarray) -> None:
    _write_matrix(path, vectors, "<f4")


def read_vectors(path) -> tuple[int, int, np.ndarray]:
    v = _read_matrix(path, "<f4").astype(np.float32)
    return v.shape[0], v.shape[1], v


def write_attributes(path, attributes: np.ndarray) -> None:
    _write_matrix(path, attributes, "<f8")


def read_attributes(path) -> tuple[int, int, np.ndarray]:
    a = _read_matrix(path, "<f8").astype(np.float64)
    bad = np.argwhere(np.isnan(a))
    if bad.size:
        r, c = bad[0]
        raise FormatError(f"{path}: NaN attribute at row {r}, column {c}")
    return a.shape[0], a.shape[1], a


def read_dataset(vectors_path, attributes_path) -> tuple[np.ndarray, np.ndarray]:
    n, _, vectors = read_vectors(vectors_path)
    n2, _, attributes = read_attributes(attributes_path)
    if n != n2:
        raise FormatError(f"{vectors_path} has {n} rows but {attributes_path} has {n2}")
    return vectors, attributes


# ---------------------------------------------------------------------------
# index files


@nb.njit(cache=True)
def _adjacency_size(levels, begin, end, indptr):
    total = 0
    for p in range(levels.shape[0]):
        lv = levels[p]
        total += (end[p] - begin[p]) + 4 * (indptr[lv, end[p]] - indptr[lv, begin[p]])
    return total


@nb.njit(cache=True)
def _encode_adjacency(levels, begin, end, indptr, neighbors, ordered_ids, out):
    off = 0
    for p in range(levels.shape[0]):
        lv = levels[p]
        for u in range(begin[p], end[p]):
            s = indptr[lv, u]
            e = indptr[lv, u + 1]
            out[off] = e - s
            off += 1
            for j in range(s, e):
                v = ordered_ids[neighbors[j]]
                out[off] = v & 0xFF
                out[off + 1] = (v >> 8) & 0xFF
                out[off + 2] = (v >> 16) & 0xFF
                out[off + 3] = (v >> 24) & 0xFF
                off += 4
    return off


@nb.njit(cache=True)
def _decode_adjacency(buf, levels, begin, end, height, n, position_of, vecs):
    """Returns (indptr, neighbors, distances, consumed, error); error >= 0 is a node id."""
    deg = np.zeros((height, n), np.int64)
    off = 0
    size = buf.shape[0]
    for p in range(levels.shape[0]):
        for u in range(begin[p], end[p]):
            if off >= size:
                return np.zeros((1, 1), np.int64), np.zeros(0, np.int32), np.zeros(0, np.float32), off, p
            dv = buf[off]
            deg[levels[p], u] = dv
            off += 1 + 4 * dv
    if off > size:
        return np.zeros((1, 1), np.int64), np.zeros(0, np.int32), np.zeros(0, np.float32), off, levels.shape[0]
    indptr = np.zeros((height, n + 1), np.int64)
    run = 0
    for lv in range(height):
        indptr[lv, 0] = run
        for u in range(n):
            run += deg[lv, u]
            indptr[lv, u + 1] = run
    neighbors = np.empty(run, np.int32)
    distances = np.empty(run, np.float32)
    off = 0
    for p in range(levels.shape[0]):
        lv = levels[p]
        for u in range(begin[p], end[p]):
            dv = buf[off]
            off += 1
            s = indptr[lv, u]
            for t in range(dv):
                v = np.int64(buf[off]) | (np.int64(buf[off + 1]) << 8) | (np.int64(buf[off + 2]) << 16) | (np.int64(buf[off + 3]) << 24)
                off += 4
                if v >= n:
                    return indptr, neighbors, distances, off, -2 - p
                pos = position_of[v]
                if pos < begin[p] or pos >= end[p] or pos == u:
                    return indptr, neighbors, distances, off, -2 - p
                neighbors[s + t] = pos
                distances[s + t] = K.pair_distance(vecs, u, pos)
    return indptr, neighbors, distances, off, -1


def index_to_bytes(index: KhiIndex) -> bytes:
    t = index.tree
    p = index.params
    header = _HEADER.pack(
        MAGIC, VERSION, index.n, index.schema.d, index.schema.m, p.graph.M,
        p.tree.leaf_capacity, p.tau_p, p.tree.tau, t.node_count, t.height,
    )
    nodes = np.zeros(t.node_count, _NODE)
    nodes["level"] = t.level
    nodes["parent"] = t.parent
    nodes["left"] = t.left
    nodes["right"] = t.right
    nodes["split_dim"] = t.split_dim
    nodes["split_value"] = np.where(t.split_dim >= 0, t.split_value, 0.0)
    nodes["excluded"] = t.excluded
    nodes["begin"] = t.begin
    nodes["end"] = t.end
    levels = t.level.astype(np.int64)
    size = _adjacency_size(levels, t.begin, t.end, index.indptr)
    adj = np.empty(size, np.uint8)
    _encode_adjacency(levels, t.begin, t.end, index.indptr, index.neighbors, t.ordered_ids.astype(np.int64), adj)
    return b"".join([header, t.ordered_ids.astype("<u4").tobytes(), nodes.tobytes(), adj.tobytes()])


def save_index(index: KhiIndex, path) -> int:
    """Write the index (without vectors/attributes); returns bytes written."""
    blob = index_to_bytes(index)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)
    return len(blob)


def load_index(path, vectors, attributes) -> KhiIndex:
    """Read an index file; ``vectors``/``attributes`` are arrays or paths to the dataset files."""
    if not isinstance(vectors, np.ndarray):
        vectors = read_vectors(vectors)[2]
    if not isinstance(attributes, np.ndarray):
        attributes = read_attributes(attributes)[2]
    vectors = np.ascontiguousarray(vectors, np.float32)
    attributes = np.ascontiguousarray(attributes, np.float64)
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < _HEADER.size:
        raise IndexFormatError(f"{path}: truncated header")
    _, version, n, d, m, M, c_l, tau_p, tau, node_count, height = _HEADER.unpack_from(raw, 0)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, this build reads {VERSION}")
    if (n, d, m) != (vectors.shape[0], vectors.shape[1], attributes.shape[1]) or attributes.shape[0] != n:
        raise DatasetMismatchError(
            f"{path}: header says n={n}, d={d}, m={m}; dataset has n={vectors.shape[0]}, "
            f"d={vectors.shape[1]}, m={attributes.shape[1]} (attribute rows {attributes.shape[0]})"
        )
    off = _HEADER.size
    need = off + 4 * n + node_count * _NODE.itemsize
    if len(raw) < need:
        raise IndexFormatError(f"{path}: truncated before adjacency section (offset {len(raw)} < {need})")
    order = np.frombuffer(raw, "<u4", n, off).astype(np.int64)
    off += 4 * n
    if not np.array_equal(np.sort(order), np.arange(n)):
        raise IndexFormatError(f"{path}: ordered ids are not a permutation of 0..{n - 1}")
    nodes = np.frombuffer(raw, _NODE, node_count, off)
    off += node_count * _NODE.itemsize

    left = nodes["left"].astype(np.int32)
    right = nodes["right"].astype(np.int32)
    split_dim = nodes["split_dim"].astype(np.int32)
    split_value = nodes["split_value"].astype(np.float64)
    region_lo, region_hi = compute_regions(attributes[order], left, right, split_dim, split_value)
    tree = PartitionTree(
        TreeParams(tau, c_l), m, order,
        nodes["parent"].astype(np.int32), left, right, nodes["level"].astype(np.int32),
        split_dim, split_value, nodes["excluded"].astype(np.uint64),
        nodes["begin"].astype(np.int64), nodes["end"].astype(np.int64),
        region_lo, region_hi,
    )
    if tree.height != height:
        raise IndexFormatError(f"{path}: header height {height} but nodes span {tree.height} levels")
    buf = np.frombuffer(raw, np.uint8, offset=off)
    vecs_pos = np.ascontiguousarray(vectors[order])
    indptr, neighbors, distances, used, err = _decode_adjacency(
        buf, tree.level.astype(np.int64), tree.begin, tree.end, height, n, tree.position_of, vecs_pos
    )
    if err <= -2:
        raise DanglingNeighborError(f"{path}: node {-2 - err} lists a neighbour outside its object set")
    if err >= 0 or used != buf.size:
        raise IndexFormatError(f"{path}: adjacency section has {buf.size} bytes, layout needs {used}")
    params = BuildParams(tree=TreeParams(tau, c_l), graph=GraphParams(M), tau_p=tau_p)
    return KhiIndex(
        schema=ObjectSchema(d, m), vectors=vectors, attributes=attributes, tree=tree,
        indptr=indptr, neighbors=neighbors, distances=distances, params=params,
    )


# ---------------------------------------------------------------------------
# workloads: "vector_index;attr:lo:hi,attr:lo:hi,..." per line


def _fmt(x: float) -> str:
    return repr(float(x))


def write_workload(path, queries: list[RfannsQuery], vector_indices=None) -> None:
    lines = []
    for i, q in enumerate(queries):
        vi = i if vector_indices is None else int(vector_indices[i])
        parts = [f"{j}:{_fmt(q.predicate.lo[j])}:{_fmt(q.predicate.hi[j])}" for j in sorted(q.predicate.constrained)]
        lines.append(f"{vi};{','.join(parts)}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_workload(path, m: int) -> list[tuple[int, object]]:
    """Parse a workload file into (vector_index, RangePredicate) pairs."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            head, body = line.split(";", 1)
            raw = {}
            for item in body.split(","):
                attr, lo, hi = item.split(":")
                raw[int(attr)] = (float(lo), float(hi))
            out.append((int(head), normalize_predicate(raw, m)))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def load_queries(path, query_vectors: np.ndarray, m: int, k: int) -> list[RfannsQuery]:
    entries = read_workload(path, m)
    bad = [vi for vi, _ in entries if not 0 <= vi < query_vectors.shape[0]]
    if bad:
        raise FormatError(f"{path}: query vector index {bad[0]} out of range ({query_vectors.shape[0]} vectors)")
    return [RfannsQuery(query_vectors[vi], pred, k) for vi, pred in entries]


# ---------------------------------------------------------------------------
# ground truth: u32 count; per query u32 |O_B|, u32 r, r * (u32 id, f32 distance)

_PAIR = np.dtype([("id", "<u4"), ("dist", "<f4")])


def write_ground_truth(path, truths: list[GroundTruth]) -> None:
    chunks = [struct.pack("<I", len(truths))]
    for t in truths:
        chunks.append(struct.pack("<II", t.filtered_size, len(t)))
        rec = np.empty(len(t), _PAIR)
        rec["id"] = t.ids
        rec["dist"] = t.distances
        chunks.append(rec.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_ground_truth(path) -> list[GroundTruth]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated at byte offset {len(raw)}")
    (count,) = struct.unpack_from("<I", raw, 0)
    off = 4
    out = []
    for q in range(count):
        if off + 8 > len(raw):
            raise FormatError(f"{path}: truncated in query {q} header at byte offset {off}")
        size, r = struct.unpack_from("<II", raw, off)
        off += 8
        if off + r * _PAIR.itemsize > len(raw):
            raise FormatError(f"{path}: truncated in query {q} results at byte offset {off}")
        rec = np.frombuffer(raw, _PAIR, r, off)
        off += r * _PAIR.itemsize
        out.append(GroundTruth(rec["id"].astype(np.int64), rec["dist"].astype(np.float64), int(size)))
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes at offset {off}")
    return out
