"""Vector index, candidate search and ranking metrics."""
from .ivfpq import (IvfPqIndex, PqConfig, build_index, default_partitions, exact_scorer, exhaustive_search,
                    load_index, rerank, save_index, search)
from .kmeans import KMeansResult, kmeans
from .metrics import RankedRun, average_precision, evaluate_run, precision_at_k, random_mrr, reciprocal_rank
