"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line with the measured numbers; the lines
are printed in the terminal summary (see conftest.py) and when this file is
run directly with ``python tests/test_acceptance.py``.
"""
import math
import random
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from javagen import random_method, straight_line
from sfg_goldens import GOLDENS
from sfgloc.corpus import SyntheticSpec, write_synthetic_dataset
from sfgloc.encoder import EncoderConfig, gradient_check, init_params, pretrain_losses
from sfgloc.frontend import parse_method, resolve_types
from sfgloc.hmcbl import HmcblConfig, SimilarityBundle, hierarchical_loss, momentum_update
from sfgloc.pipeline import evaluate, index_changesets, method_input, prepare, train_model
from sfgloc.retrieval import RankedRun, build_index, evaluate_run, random_mrr, search
from sfgloc.sequence import build_attention_mask, expected_zero_count, sample_pretrain_masks
from sfgloc.sfg import EdgeKind, build_sfg, to_json
from sfgloc.vocab import Vocab

GOLDEN_DIR = Path(__file__).parent / "golden"
RESULTS: list = []

# end-to-end synthetic runs
SYNTH_SEED = 13
SYNTH_STEPS = 500
ABLATION_SEEDS = (13, 14, 15)
ABLATION_STEPS = 100


def verdict(n: int, title: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_golden_graphs():
    t0 = time.perf_counter()
    mismatched = []
    for name, (src, _, _) in sorted(GOLDENS.items()):
        g = build_sfg(resolve_types(parse_method(src)), name).check()
        if to_json(g) != (GOLDEN_DIR / f"{name}.json").read_text():
            mismatched.append(name)
    dt = time.perf_counter() - t0
    verdict(1, "SFG goldens exact", not mismatched and dt < 1.0 and len(GOLDENS) == 12,
            f"{12 - len(mismatched)}/12 match, {dt:.3f}s < 1s")


def test_criterion_2_def_use_oracle():
    t0 = time.perf_counter()
    rng = random.Random(2)
    bad = []
    for k in range(100):
        prog = straight_line(1000 + k, n_stmts=rng.randint(1, 20))
        g = build_sfg(resolve_types(parse_method(prog.source)), f"p{k}")
        if {(e.src, e.dst) for e in g.edges_of(EdgeKind.Data)} != prog.edges:
            bad.append(k)
    dt = time.perf_counter() - t0
    verdict(2, "data edges vs def-use oracle", not bad and dt < 10.0, f"{100 - len(bad)}/100 agree, {dt:.2f}s < 10s")


def test_criterion_3_mask():
    t0 = time.perf_counter()
    count_ok = rows_ok = weights_ok = 0
    cfg = None
    for k in range(50):
        inp = method_input("/** does work */\n" + random_method(300 + k, max_depth=1, n_stmts=4))
        m = build_attention_mask(inp)
        pm = sample_pretrain_masks(inp, k)
        _, hidden = pm.apply(inp)
        count_ok += int((m == 0).sum()) == expected_zero_count(inp) and \
            int((hidden == 0).sum()) == expected_zero_count(inp, pm.hidden)
        rows_ok += bool((m[0] == 0).all() and (m[len(inp) - 1] == 0).all()
                        and all((m[p] == 0).all() for p in inp.special_positions))
        if k < 10:
            cfg = cfg or EncoderConfig(vocab_size=4096, d=16, layers=1, heads=2)
            ids = torch.from_numpy(inp.ids % cfg.vocab_size)
            _, attn = encode_with_attention(cfg, ids, m)
            weights_ok += bool(all((a[:, torch.from_numpy(np.isneginf(m))] == 0).all() for a in attn))
    dt = time.perf_counter() - t0
    ok = count_ok == 50 and rows_ok == 50 and weights_ok == 10 and dt < 5.0
    verdict(3, "mask zero count, [CLS]/[SEP] rows, masked weights", ok,
            f"count {count_ok}/50, rows {rows_ok}/50, weights exactly 0 in {weights_ok}/10, {dt:.2f}s < 5s")


def encode_with_attention(cfg, ids, m):
    from sfgloc.encoder import encode

    return encode(init_params(cfg, 0), ids, torch.from_numpy(m).float(), cfg, return_attention=True)


def test_criterion_4_gradient_check():
    t0 = time.perf_counter()
    methods = ["/** Add. */ int add(int a, int b) { int c = a + b; return c; }",
               "/** Max. */ int max(int[] xs, int n) { int m = 0; for (int i = 0; i < n; i++) "
               "{ if (xs[i] > m) { m = xs[i]; } } return m; }",
               "/** Count. */ int count(List items) { int k = 0; for (Object o : items) { k += 1; } return k; }"]
    raw = [method_input(s) for s in methods]
    vocab = Vocab.build([x.tokens for x in raw])
    inputs = [method_input(s, vocab) for s in methods]
    cfg = EncoderConfig(vocab_size=len(vocab), d=16, layers=1, heads=2)
    params = init_params(cfg, 0, torch.float64)
    batch = [(x, sample_pretrain_masks(x, i, len(vocab), vocab.n_reserved)) for i, x in enumerate(inputs)]
    errors = {}
    for name in ("l_mlm", "l_na", "l_gp", "l_tp", "l_rp"):
        errors[name] = gradient_check(params, lambda p: getattr(pretrain_losses(batch, p, cfg), name), n_coords=40,
                                      seed=4, raise_on_failure=False)
    dt = time.perf_counter() - t0
    worst = max(errors.values())
    verdict(4, "gradient check, 5 losses, d=16 L=1", worst < 1e-3 and dt < 60.0,
            f"max rel err {worst:.2e} < 1e-3 over 200 coordinates, {dt:.1f}s < 60s")


def test_criterion_5_loss_identities():
    t = lambda x: torch.tensor(x, dtype=torch.float64)  # noqa: E731
    worst = 0.0
    for s in (-0.7, 0.0, 0.3, 1.0):
        terms = hierarchical_loss(SimilarityBundle(t(s), t(s), t(s), t(s), t(s), t([s] * 3)))
        worst = max(worst, abs(float(terms.l_f) - math.log(2)), abs(float(terms.l_m) - math.log(2)))
    for k in (1, 16, 512):
        terms = hierarchical_loss(SimilarityBundle(t(0.1), t(0.2), t(0.1), t(0.2), t(0.4), t([0.4] * k)))
        worst = max(worst, abs(float(terms.l_b) - math.log(k + 1)))
    q = {"w": t([0.0, 2.0, -1.0])}
    k1 = {"w": t([1.0, 1.0, 1.0])}
    same = torch.equal(momentum_update({"w": k1["w"].clone()}, q, 1.0)["w"], k1["w"])
    copy = torch.equal(momentum_update({"w": k1["w"].clone()}, q, 0.0)["w"], q["w"])
    mix = momentum_update({"w": t([1.0])}, {"w": t([0.0])}, 0.999)["w"].item() == 0.999
    ok = worst < 1e-9 and same and copy and mix
    verdict(5, "L_f = ln 2, L_b = ln(K+1), momentum identities", ok,
            f"max deviation {worst:.1e} <= 1e-9; m=1 fixed {same}, m=0 copy {copy}, m=0.999 -> 0.999 {mix}")


def test_criterion_6_index_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    X = rng.normal(size=(1000, 64))
    idx = build_index(X, seed=6)
    U = X / np.linalg.norm(X, axis=1, keepdims=True)
    same = 0
    for q in rng.normal(size=(100, 64)):
        s = U @ (q / np.linalg.norm(q))
        want = sorted(range(1000), key=lambda i: (-s[i], i))[:10]
        same += [c for c, _ in search(idx, q, nprobe=idx.n_partitions, n_prime=10)] == want
    dt = time.perf_counter() - t0
    verdict(6, "full-probe exact index equals exhaustive top-10", same == 100 and dt < 10.0,
            f"{same}/100 queries identical, {idx.n_partitions} partitions, {dt:.2f}s < 10s")


def test_criterion_7_metric_fixtures():
    def ranking(hits, n=5):
        return [(f"r{j}" if j in hits else f"x{j}", float(n - j)) for j in range(1, n + 1)]

    # (AvgP, RR, P@1, P@3)
    expect = {"{1}": (1.0, 1.0, 1.0, 1 / 3), "{2}": (0.5, 0.5, 0.0, 1 / 3), "{1,3}": ((1 + 2 / 3) / 2, 1.0, 1.0, 2 / 3)}
    worst = 0.0
    for key, hits in (("{1}", {1}), ("{2}", {2}), ("{1,3}", {1, 3})):
        run = RankedRun()
        run.add("q", ranking(hits), {f"r{j}" for j in hits})
        m = evaluate_run(run)
        got = (m["MAP"], m["MRR"], m["P@1"], m["P@3"])
        worst = max(worst, *(abs(g - e) for g, e in zip(got, expect[key])))
    run = RankedRun()
    run.add("a", ranking({1}), {"r1"})
    run.add("b", ranking({2}), {"r2"})
    worst = max(worst, abs(evaluate_run(run)["MRR"] - 0.75))
    verdict(7, "metric fixtures (AvgP, MRR, P@1, P@3)", worst <= 1e-12, f"max deviation {worst:.1e} <= 1e-12")


# -- end-to-end synthetic runs ---------------------------------------------

def synthetic_config(**overrides) -> HmcblConfig:
    return HmcblConfig(**overrides)


def synthetic_run(seed: int, steps: int, root: Path, **overrides):
    """Train on the synthetic corpus and evaluate exactly (full probe, no PQ, full candidate list)."""
    prep = prepare(root)
    model, hist = train_model(prep, synthetic_config(**overrides), steps, seed)
    pool = prep.test_pool()
    bundle = index_changesets(model, prep, pool, seed=seed)
    metrics, _ = evaluate(model, prep, bundle, nprobe=bundle.index.n_partitions, n_prime=len(pool))
    return metrics, random_mrr(len(pool)), hist


@pytest.fixture(scope="module")
def synthetic_root():
    with tempfile.TemporaryDirectory() as d:
        yield write_synthetic_dataset(Path(d), SYNTH_SEED, SyntheticSpec(n_pairs=60, n_distractors=540))


def test_criterion_8_end_to_end(synthetic_root):
    torch.set_num_threads(1)
    t0 = time.perf_counter()
    metrics, base, hist = synthetic_run(SYNTH_SEED, SYNTH_STEPS, synthetic_root)
    dt = time.perf_counter() - t0
    mrr = metrics["MRR"]
    ok = mrr >= 0.5 and mrr >= 3 * base and dt < 600 and len(hist) <= 500
    verdict(8, "synthetic end-to-end retrieval", ok,
            f"test MRR {mrr:.3f} (need >= 0.5 and >= 3 x random {base:.4f}), {len(hist)} steps, {dt:.0f}s < 600s")


def test_criterion_9_bank_ablation(synthetic_root):
    torch.set_num_threads(1)
    wins, pairs = 0, []
    for seed in ABLATION_SEEDS:
        with_bank, _, _ = synthetic_run(seed, ABLATION_STEPS, synthetic_root, alpha_b=1.0, bank_size=512)
        without, _, _ = synthetic_run(seed, ABLATION_STEPS, synthetic_root, alpha_b=0.0, bank_size=512)
        pairs.append(f"seed {seed}: {with_bank['MRR']:.3f} vs {without['MRR']:.3f}")
        wins += with_bank["MRR"] >= without["MRR"]
    verdict(9, "bank-level loss helps (majority of 3 seeds)", wins >= 2,
            f"MRR with vs without bank: {'; '.join(pairs)}; {wins}/3, {ABLATION_STEPS} steps each")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
