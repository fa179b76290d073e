"""Train the contrastive retriever on a small synthetic corpus and rank test commits.

Usage: python demos/synthetic_retrieval.py [steps]
"""
import sys
import tempfile
from pathlib import Path

from sfgloc.corpus import SyntheticSpec, write_synthetic_dataset
from sfgloc.hmcbl import HmcblConfig
from sfgloc.pipeline import evaluate, index_changesets, prepare, train_model
from sfgloc.retrieval import random_mrr

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 50

with tempfile.TemporaryDirectory() as tmp:
    root = write_synthetic_dataset(Path(tmp), 0, SyntheticSpec(n_pairs=20, n_distractors=60))
    prep = prepare(root)
    model, hist = train_model(prep, HmcblConfig(bank_size=64), steps, seed=0)
    print("first step", hist[0].as_dict())
    print("last step ", hist[-1].as_dict())
    pool = prep.test_pool()
    bundle = index_changesets(model, prep, pool, seed=0)
    metrics, _ = evaluate(model, prep, bundle, nprobe=bundle.index.n_partitions, n_prime=len(pool))
    for k, v in metrics.items():
        print(f"{k:<5} {v:.3f}")
    print(f"random MRR over {len(pool)} candidates: {random_mrr(len(pool)):.3f}")
