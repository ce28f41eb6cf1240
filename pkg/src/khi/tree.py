"""Skew-aware attribute-space partitioning tree.

Nodes are numbered in breadth-first order (root 0, then each level left to
right), so parents always precede children and a level is a contiguous run
of ids.  Objects are physically reordered: ``ordered_ids[begin:end]`` is the
object set of a node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np


@dataclass(frozen=True)
class TreeParams:
    tau: float = 3.0
    leaf_capacity: int = 2

    def __post_init__(self) -> None:
        if not self.tau > 1.0:
            raise ValueError(f"tau must be > 1, got {self.tau}")
        if self.leaf_capacity < 1:
            raise ValueError("leaf_capacity must be >= 1")

    @property
    def rho(self) -> float:
        return self.tau / (self.tau + 1.0)


def height_bound(n: int, params: TreeParams) -> int:
    """ceil(log_{1/rho}(n / c_l)) + 1, clamped at 1 for n <= c_l."""
    ratio = n / params.leaf_capacity
    if ratio <= 1.0:
        return 1
    # tolerate float noise when n / c_l is an exact power of 1/rho
    levels = math.log(ratio) / math.log(1.0 / params.rho)
    return math.ceil(levels - 1e-12) + 1


@nb.njit(cache=True, inline="always")
def _has_bit(mask, j):
    return (mask >> np.uint64(j)) & np.uint64(1) == np.uint64(1)


@nb.njit(cache=True)
def _popcount(mask):
    c = 0
    while mask != np.uint64(0):
        mask &= mask - np.uint64(1)
        c += 1
    return c


@nb.njit(cache=True)
def compute_regions(attrs, left, right, split_dim, split_value):
    """Node rectangles: data bounding box at the root, clamped at each split."""
    n, m = attrs.shape
    count = left.shape[0]
    region_lo = np.empty((count, m), np.float64)
    region_hi = np.empty((count, m), np.float64)
    for j in range(m):
        lo = np.inf
        hi = -np.inf
        for i in range(n):
            v = attrs[i, j]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        region_lo[0, j] = lo
        region_hi[0, j] = hi
    for p in range(count):
        if left[p] >= 0:
            for c in (left[p], right[p]):
                region_lo[c, :] = region_lo[p, :]
                region_hi[c, :] = region_hi[p, :]
            region_hi[left[p], split_dim[p]] = split_value[p]
            region_lo[right[p], split_dim[p]] = split_value[p]
    return region_lo, region_hi


@nb.njit(cache=True)
def _build_tree_kernel(attrs, tau, leaf_cap):
    n, m = attrs.shape
    cap = max(2 * n - 1, 1)
    parent = np.full(cap, -1, np.int32)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    level = np.zeros(cap, np.int32)
    split_dim = np.full(cap, -1, np.int32)
    split_value = np.zeros(cap, np.float64)
    bl = np.zeros(cap, np.uint64)
    begin = np.zeros(cap, np.int64)
    end = np.zeros(cap, np.int64)
    start_dim = np.zeros(cap, np.int32)
    order = np.arange(n).astype(np.int64)

    end[0] = n
    count = 1
    head = 0
    while head < count:
        p = head
        head += 1
        b = begin[p]
        e = end[p]
        size = e - b
        dim = start_dim[p]
        while True:
            if size <= leaf_cap or _popcount(bl[p]) == m:
                break
            while _has_bit(bl[p], dim):
                dim = (dim + 1) % m
            seg = order[b:e].copy()
            vals = np.empty(size, np.float64)
            for i in range(size):
                vals[i] = attrs[seg[i], dim]
            idx = np.argsort(vals, kind="mergesort")
            s = vals[idx[(size - 1) // 2]]
            nl = 0
            for i in range(size):
                if vals[i] <= s:
                    nl += 1
            nr = size - nl
            if tau * min(nl, nr) <= max(nl, nr):
                bl[p] |= np.uint64(1) << np.uint64(dim)
                continue
            for i in range(size):
                order[b + i] = seg[idx[i]]
            lc = count
            rc = count + 1
            count += 2
            left[p] = lc
            right[p] = rc
            split_dim[p] = dim
            split_value[p] = s
            nxt = (dim + 1) % m
            for c in (lc, rc):
                parent[c] = p
                level[c] = level[p] + 1
                bl[c] = bl[p]
                start_dim[c] = nxt
            begin[lc] = b
            end[lc] = b + nl
            begin[rc] = b + nl
            end[rc] = e
            break

    region_lo, region_hi = compute_regions(attrs, left[:count], right[:count], split_dim[:count], split_value[:count])
    return (
        order,
        parent[:count].copy(),
        left[:count].copy(),
        right[:count].copy(),
        level[:count].copy(),
        split_dim[:count].copy(),
        split_value[:count].copy(),
        bl[:count].copy(),
        begin[:count].copy(),
        end[:count].copy(),
        region_lo,
        region_hi,
    )


@dataclass
class PartitionTree:
    params: TreeParams
    m: int
    ordered_ids: np.ndarray  # position -> object id
    parent: np.ndarray
    left: np.ndarray
    right: np.ndarray
    level: np.ndarray
    split_dim: np.ndarray  # -1 at leaves
    split_value: np.ndarray
    excluded: np.ndarray  # uint64 bitmask BL(p)
    begin: np.ndarray
    end: np.ndarray
    region_lo: np.ndarray
    region_hi: np.ndarray

    def __post_init__(self) -> None:
        self.position_of = np.empty_like(self.ordered_ids)
        self.position_of[self.ordered_ids] = np.arange(self.ordered_ids.size)
        # depth of the leaf holding each position
        self.leaf_level = np.zeros(self.n, np.int32)
        for p in np.flatnonzero(self.left < 0):
            self.leaf_level[self.begin[p] : self.end[p]] = self.level[p]

    @property
    def n(self) -> int:
        return int(self.ordered_ids.size)

    @property
    def node_count(self) -> int:
        return int(self.parent.size)

    @property
    def height(self) -> int:
        return int(self.level.max()) + 1

    def is_leaf(self, p: int) -> bool:
        return bool(self.left[p] < 0)

    def size(self, p: int) -> int:
        return int(self.end[p] - self.begin[p])

    def objects(self, p: int) -> np.ndarray:
        return self.ordered_ids[self.begin[p] : self.end[p]]

    def excluded_dims(self, p: int) -> frozenset[int]:
        mask = int(self.excluded[p])
        return frozenset(j for j in range(self.m) if mask >> j & 1)

    def levels(self) -> list[np.ndarray]:
        """Node ids grouped by depth, ascending ids within each level."""
        bounds = np.searchsorted(self.level, np.arange(self.height + 1))
        return [np.arange(bounds[i], bounds[i + 1]) for i in range(self.height)]

    def path_of(self, object_id: int) -> list[int]:
        if not 0 <= object_id < self.n:
            raise KeyError(f"unknown object id {object_id}")
        pos = self.position_of[object_id]
        p = 0
        path = [0]
        while self.left[p] >= 0:
            lc = self.left[p]
            p = int(lc if pos < self.end[lc] else self.right[p])
            path.append(p)
        return path


def build_tree(attributes: np.ndarray, params: TreeParams | None = None) -> PartitionTree:
    params = params or TreeParams()
    attrs = np.ascontiguousarray(attributes, dtype=np.float64)
    if attrs.ndim != 2 or attrs.shape[0] < 1:
        raise ValueError("attributes must be a non-empty (n, m) array")
    if attrs.shape[1] > 64:
        raise ValueError("at most 64 attributes are supported")
    if not np.all(np.isfinite(attrs)):
        raise ValueError("attribute values must be finite")
    out = _build_tree_kernel(attrs, float(params.tau), int(params.leaf_capacity))
    return PartitionTree(params, attrs.shape[1], *out)


def tree_stats(tree: PartitionTree) -> dict:
    internal = np.flatnonzero(tree.left >= 0)
    imbalance = 1.0
    if internal.size:
        nl = (tree.end[tree.left[internal]] - tree.begin[tree.left[internal]]).astype(float)
        nr = (tree.end[tree.right[internal]] - tree.begin[tree.right[internal]]).astype(float)
        imbalance = float(np.max(np.maximum(nl, nr) / np.minimum(nl, nr)))
    sizes = tree.end - tree.begin
    per_level = np.bincount(tree.level, weights=sizes, minlength=tree.height).astype(int)
    return {
        "height": tree.height,
        "node_count": tree.node_count,
        "leaf_count": int(np.count_nonzero(tree.left < 0)),
        "max_level_imbalance": imbalance,
        "per_level_objects": per_level.tolist(),
    }
