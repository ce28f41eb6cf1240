"""Dataset generators and brute-force references shared by the tests."""

import numba
import numpy as np

from khi._kernels import pair_distance


def attribute_data(kind, n, m, rng):
    if kind == "uniform":
        return rng.random((n, m))
    if kind == "gaussian":
        return rng.normal(size=(n, m))
    if kind == "zipf":
        return rng.zipf(1.2, size=(n, m)).astype(np.float64)
    raise ValueError(kind)


def check_tree_cover(tree):
    """Every level's node slices are disjoint and each object sits in one node per level of its path."""
    for lv, nodes in enumerate(tree.levels()):
        seen = np.zeros(tree.n, np.int64)
        for p in nodes:
            seen[tree.ordered_ids[tree.begin[p]:tree.end[p]]] += 1
        assert seen.max() <= 1
        # objects whose leaf is at depth >= lv must appear exactly once at lv
        deep = tree.leaf_level[tree.position_of] >= lv
        np.testing.assert_array_equal(seen[deep], 1)
        np.testing.assert_array_equal(seen[~deep], 0)


def rng_violations(vecs, u, nbrs, dists):
    """Pairs (v', v) in u's list where v' strictly shields v, using the index's float32 distance."""
    order = np.lexsort((nbrs, dists))
    nbrs, dists = np.asarray(nbrs)[order], np.asarray(dists)[order]
    bad = []
    for j in range(len(nbrs)):
        for i in range(j):
            if dists[i] < dists[j] and pair_distance(vecs, nbrs[i], nbrs[j]) < dists[j]:
                bad.append((int(nbrs[i]), int(nbrs[j])))
    return bad


@numba.njit(cache=True)
def _scan_rng(vecs, indptr, nbr, dst):
    bad = 0
    for lv in range(indptr.shape[0]):
        for u in range(vecs.shape[0]):
            s, e = indptr[lv, u], indptr[lv, u + 1]
            for j in range(s, e):
                for i in range(s, e):
                    if dst[i] < dst[j] and pair_distance(vecs, nbr[i], nbr[j]) < dst[j]:
                        bad += 1
    return bad


def index_rng_violations(index):
    """Strictly shielded entries across every adjacency list of every node graph."""
    return int(_scan_rng(index.vectors_pos, index.indptr, index.neighbors, index.distances))


# criterion number -> (passed, one-line detail); filled by test_acceptance
ACCEPTANCE = {}


def record(num, title, passed, detail):
    ACCEPTANCE[num] = (title, bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {title}: {detail}")
