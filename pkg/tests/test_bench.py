import csv

import numpy as np
import pytest

from conftest import EXAMPLE_ATTRS, EXAMPLE_VECS
from khi.bench import BenchInputError, hop_trace, run_bench, write_bench_csv, write_trace_csv
from khi.core import RfannsQuery, normalize_predicate
from khi.oracle import Prefilter, ground_truth
from khi.query import QueryParams, search
from khi.workload import WorkloadSpec, gen_workload


@pytest.fixture(scope="module")
def workload(mid_data):
    v, a = mid_data
    qv = np.random.default_rng(8).random((100, 16), dtype=np.float32)
    queries = gen_workload(a, qv, WorkloadSpec(100, 1 / 32, seed=8))
    return queries, ground_truth(v, a, queries, 10)


def test_trivial(example_index):
    b = normalize_predicate({0: (3.0, 4.0), 1: (4.0, 6.0)}, 2)
    q = [RfannsQuery(np.zeros(2, np.float32), b, k=2)]
    pts = run_bench(example_index, q, ground_truth(EXAMPLE_VECS, EXAMPLE_ATTRS, q, 2), [2], k=2)
    assert len(pts) == 1 and pts[0].recall == 1.0 and pts[0].qps > 0 and pts[0].threads == 1


def test_sweep(mid_index, workload):
    queries, truths = workload
    pts = run_bench(mid_index, queries, truths, [16, 32, 64, 128, 256], k=10)
    for a, b in zip(pts, pts[1:]):
        assert b.recall >= a.recall - 0.01
        assert b.dist_comps > a.dist_comps
    assert all(0 <= p.recall <= 1 and p.qps > 0 for p in pts)


def test_threads_same_answers(mid_index, workload):
    queries, truths = workload
    one = run_bench(mid_index, queries, truths, [64], k=10)[0]
    four = run_bench(mid_index, queries, truths, [64], k=10, threads=4)[0]
    assert (one.recall, one.dist_comps, one.hops) == (four.recall, four.dist_comps, four.hops)
    assert four.threads == 4


def test_prefilter_baseline(mid_data, workload):
    queries, truths = workload
    pt = run_bench(Prefilter(*mid_data), queries, truths, [10], k=10)[0]
    assert pt.recall == 1.0
    assert pt.dist_comps == pytest.approx(np.mean([t.filtered_size for t in truths]))


def test_input_errors(mid_index, workload):
    queries, truths = workload
    with pytest.raises(BenchInputError):
        run_bench(mid_index, queries, truths[:-1], [16])
    with pytest.raises(BenchInputError):
        run_bench(mid_index, queries, truths, [32, 16])
    with pytest.raises(BenchInputError):
        run_bench(mid_index, queries, truths, [5], k=10)


class TestTrace:
    def test_empty(self, example_index):
        b = normalize_predicate({0: (100.0, 200.0)}, 2)
        tr = hop_trace(example_index, RfannsQuery(np.zeros(2, np.float32), b), QueryParams(k=2, ef=4))
        assert len(tr) == 0 and tr.first_full_hop() is None

    def test_ef300(self, mid_index, workload):
        queries, _ = workload
        params = QueryParams(k=10, ef=300)
        filled = 0
        for q in queries[:40]:
            tr = hop_trace(mid_index, q, params)
            h = tr.first_full_hop()
            if h is not None:
                filled += 1
                assert np.all(np.diff(tr.thresholds[h:]) <= 0)
            # the final threshold is the farthest survivor of a plain search with k = ef
            res = search(mid_index, q, QueryParams(k=300, ef=300))
            if len(tr):
                assert tr.thresholds[-1] == res.distances[-1]
        assert filled > 0

    def test_csv(self, tmp_path, mid_index, workload):
        queries, truths = workload
        pts = run_bench(mid_index, queries[:5], truths[:5], [16, 32], k=10)
        write_bench_csv(tmp_path / "b.csv", pts)
        rows = list(csv.reader(open(tmp_path / "b.csv")))
        assert rows[0] == ["ef", "recall", "qps", "dist_comps", "hops", "threads"]
        assert len(rows) == 3 and rows[1][0] == "16"
        traces = [hop_trace(mid_index, q, QueryParams(k=10, ef=50)) for q in queries[:3]]
        write_trace_csv(tmp_path / "t.csv", traces)
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["query_id", "hop", "threshold"]
        assert len(rows) == 1 + sum(len(t) for t in traces)
        assert all(len(r[2].replace(".", "").replace("-", "").lstrip("0")) <= 6 for r in rows[1:] if "e" not in r[2])
