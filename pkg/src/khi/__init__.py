"""Range-filtered approximate nearest neighbour search over a partitioning tree of proximity graphs."""

from .bench import BenchPoint, HopTrace, hop_trace, run_bench
from .builder import BuildParams, KhiIndex, build_index, build_report
from .core import (
    DimensionError,
    InvalidIntervalError,
    InvalidPredicateError,
    Object,
    ObjectSchema,
    RangePredicate,
    RfannsQuery,
    distance,
    full_predicate,
    normalize_predicate,
    satisfies,
)
from .graph import GraphParams
from .oracle import GroundTruth, Prefilter, ground_truth, prefilter_knn, recall
from .query import QueryParams, SearchResult, range_filter, recons_nbr, search, traced_search
from .storage import load_index, save_index
from .tree import PartitionTree, TreeParams, build_tree
from .workload import WorkloadSpec, gen_predicate, gen_workload

__version__ = "0.1.0"

__all__ = [
    "BenchPoint",
    "BuildParams",
    "DimensionError",
    "GraphParams",
    "GroundTruth",
    "HopTrace",
    "InvalidIntervalError",
    "InvalidPredicateError",
    "KhiIndex",
    "Object",
    "ObjectSchema",
    "PartitionTree",
    "Prefilter",
    "QueryParams",
    "RangePredicate",
    "RfannsQuery",
    "SearchResult",
    "TreeParams",
    "WorkloadSpec",
    "build_index",
    "build_report",
    "build_tree",
    "distance",
    "full_predicate",
    "gen_predicate",
    "gen_workload",
    "ground_truth",
    "hop_trace",
    "load_index",
    "normalize_predicate",
    "prefilter_knn",
    "range_filter",
    "recall",
    "recons_nbr",
    "run_bench",
    "satisfies",
    "save_index",
    "search",
    "traced_search",
]
