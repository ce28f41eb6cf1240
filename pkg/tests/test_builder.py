import numpy as np
import pytest

from conftest import EXAMPLE_ATTRS, EXAMPLE_VECS, uniform_dataset
from helpers import index_rng_violations
from khi.builder import (
    HEADER_BYTES,
    BuildParams,
    build_index,
    build_report,
    graph_bytes,
    space_bound_bytes,
    tree_bytes,
)
from khi.core import DimensionError
from khi.graph import GraphParams
from khi.storage import index_to_bytes


class TestExample:
    def test_seven_graphs(self, example_index):
        graphs = example_index.graphs()
        assert len(graphs) == 7
        assert [len(g) for g in graphs] == [8, 4, 4, 2, 2, 2, 2]
        for g in graphs:
            assert g.degrees().max() <= 2
            assert set(g.neighbors.tolist()) <= set(g.members.tolist())

    def test_leaf_edges_mutual(self, example_index):
        for p in range(3, 7):
            a, b = example_index.graph(p).members
            assert example_index.graph(p).adjacency() == {a: [b], b: [a]}


class TestEdgeCases:
    def test_single_object(self):
        idx = build_index(np.zeros((1, 3), np.float32), np.zeros((1, 2)))
        assert idx.tree.node_count == 1 and idx.neighbor_slots() == 0
        # one degree byte, no edges
        assert graph_bytes(idx) == 1
        assert len(index_to_bytes(idx)) == tree_bytes(idx) + graph_bytes(idx)
        assert tree_bytes(idx) == HEADER_BYTES + 4 + 44

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            build_index(np.zeros((3, 2), np.float32), np.zeros((4, 1)))
        with pytest.raises(ValueError):
            build_index(np.zeros((0, 2), np.float32), np.zeros((0, 1)))
        with pytest.raises(ValueError):
            GraphParams(M=256)


class TestSoundness:
    def test_slices_degrees_rng(self, small_index):
        idx = small_index
        t = idx.tree
        M = idx.params.graph.M
        for p in range(t.node_count):
            lv = t.level[p]
            b, e = t.begin[p], t.end[p]
            ptr = idx.indptr[lv]
            deg = np.diff(ptr[b : e + 1])
            assert deg.max(initial=0) <= M
            nbrs = idx.neighbors[ptr[b] : ptr[e]]
            assert np.all((nbrs >= b) & (nbrs < e))
        assert index_rng_violations(idx) == 0

    def test_stored_distances(self, small_index):
        idx = small_index
        g = idx.graph(0)
        for u in g.members[:100]:
            ref = np.linalg.norm(idx.vectors[g.neighbors_of(u)].astype(np.float64) - idx.vectors[u], axis=1)
            np.testing.assert_allclose(g.distances_of(u), ref, rtol=1e-6)

    def test_space_accounting(self, small_index):
        idx = small_index
        r = build_report(idx)
        assert r["neighbor_slots"] <= idx.n * idx.params.graph.M * idx.tree.height
        assert r["graph_bytes"] <= space_bound_bytes(idx.n, idx.params.graph.M, idx.tree.height)
        assert len(r["per_level_seconds"]) == idx.tree.height
        assert len(index_to_bytes(idx)) == r["graph_bytes"] + r["tree_bytes"]


class TestDeterminism:
    @pytest.fixture(scope="class")
    @staticmethod
    def data():
        return uniform_dataset(3000, d=12, m=3, seed=9)

    def test_repeat_build(self, data):
        a = build_index(*data)
        b = build_index(*data)
        assert index_to_bytes(a) == index_to_bytes(b)
        assert graph_bytes(a) == graph_bytes(b)

    @pytest.mark.parametrize("threads", [2, 8])
    def test_deterministic_parallel(self, data, threads):
        seq = build_index(*data)
        par = build_index(*data, BuildParams(threads=threads, deterministic=True))
        assert index_to_bytes(par) == index_to_bytes(seq)

    def test_fast_mode_independent_of_thread_count(self, data):
        runs = [index_to_bytes(build_index(*data, BuildParams(threads=t, merge_batch=64))) for t in (2, 3)]
        assert runs[0] == runs[1]

    def test_fast_mode_valid(self, data):
        idx = build_index(*data, BuildParams(threads=4, merge_batch=64))
        assert index_rng_violations(idx) == 0
        assert np.diff(idx.indptr, axis=1).max() <= idx.params.graph.M


def test_example_constants():
    # 8 objects, 7 nodes
    idx = build_index(EXAMPLE_VECS, EXAMPLE_ATTRS, BuildParams(graph=GraphParams(M=2)))
    assert tree_bytes(idx) == HEADER_BYTES + 8 * 4 + 7 * 44
