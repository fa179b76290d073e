import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from javagen import random_method
from sfgloc.encoder import EncoderConfig, encode, init_params
from sfgloc.errors import LengthError
from sfgloc.frontend import tokenize
from sfgloc.frontend.ast import Span
from sfgloc.frontend.resolve import VarType
from sfgloc.pipeline import method_input
from sfgloc.sequence import (MLM_KEEP, MLM_MASK, MLM_RANDOM, N_SPECIAL, build_attention_mask, build_input,
                             expected_zero_count, hidden_count, sample_pretrain_masks)
from sfgloc.sfg import ROLE_VOCAB, TYPE_VOCAB, EdgeKind, NodeKind, Role, SemanticFlowGraph, SfgEdge, SfgNode

NEG = float("-inf")


def two_node_input(comment=""):
    code = [t for t in tokenize("a=b;").tokens]
    nodes = (SfgNode(0, NodeKind.Variable, Span(0, 1), "a", VarType.INT, Role.Assigned),
             SfgNode(1, NodeKind.Variable, Span(2, 3), "b", VarType.INT, Role.Assignement))
    g = SemanticFlowGraph("m", nodes, (SfgEdge(1, 0, EdgeKind.Data),))
    return build_input(comment, code, g)


def test_layout_order():
    inp = two_node_input()
    head = ["[CLS]", "[C]", "a", "=", "b", ";", "[SEP]", "[N]", "a", "b", "[T]"]
    assert inp.tokens[: len(head)] == head
    t0, t1 = inp.segments["T"]
    r0, r1 = inp.segments["R"]
    assert inp.tokens[t0:t1] == list(TYPE_VOCAB) and inp.tokens[t0 - 1] == "[T]"
    assert inp.tokens[r0:r1] == list(ROLE_VOCAB) and inp.tokens[r0 - 1] == "[R]"
    assert inp.tokens[-1] == "[SEP]"
    assert len(inp) == N_SPECIAL + 4 + 2 + 55 + 24


def test_alignment_and_label_relations():
    inp = two_node_input()
    s0 = inp.segments["S"][0]
    n0 = inp.segments["N"][0]
    t0 = inp.segments["T"][0]
    assert (s0 + 2, n0 + 1) in set(map(tuple, inp.e1.tolist()))  # code 'b' <-> node 'b'
    assert (n0, t0 + TYPE_VOCAB.index("int")) in set(map(tuple, inp.e3.tolist()))
    assert set(map(tuple, inp.e2.tolist())) == {(n0 + 1, n0)}
    m = build_attention_mask(inp)
    assert m[s0 + 2, n0 + 1] == 0 and m[n0 + 1, s0 + 2] == 0
    assert m[n0 + 1, n0] == 0 and m[n0, n0 + 1] == NEG  # node-node entries are directional


def test_mask_clauses():
    inp = two_node_input("copies b into a")
    m = build_attention_mask(inp)
    w0, w1 = inp.segments["W"]
    s0, s1 = inp.segments["S"]
    n0 = inp.segments["N"][0]
    t0 = inp.segments["T"][0]
    assert (m[w0:w1, s0:s1] == 0).all() and (m[s0:s1, w0:w1] == 0).all()
    assert m[n0, t0 + TYPE_VOCAB.index("long")] == NEG
    assert (m[0] == 0).all() and (m[-1] == 0).all()
    for p in inp.special_positions:
        assert (m[p] == 0).all()
    assert set(np.unique(m)) <= {0.0, NEG}


def test_zero_count_matches_closed_form():
    inp = two_node_input("x y")
    assert int((build_attention_mask(inp) == 0).sum()) == expected_zero_count(inp)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 1000))
def test_zero_count_random_inputs(seed, mask_seed):
    inp = method_input("/** computes things */\n" + random_method(seed, max_depth=1, n_stmts=4))
    m = build_attention_mask(inp)
    assert int((m == 0).sum()) == expected_zero_count(inp)
    pm = sample_pretrain_masks(inp, mask_seed)
    _, hidden_mask = pm.apply(inp)
    assert int((hidden_mask == 0).sum()) == expected_zero_count(inp, pm.hidden)


def test_masked_weights_are_exactly_zero():
    inp = method_input("/** sum */ int f(int a, int b) { int c = a + b; return c; }")
    cfg = EncoderConfig(vocab_size=int(inp.ids.max()) + 1, d=16, layers=2, heads=2)
    params = init_params(cfg, 0)
    m = build_attention_mask(inp)
    _, attn = encode(params, torch.from_numpy(inp.ids), torch.from_numpy(m).float(), cfg, return_attention=True)
    blocked = torch.from_numpy(np.isneginf(m))
    for a in attn:
        assert (a[:, blocked] == 0).all()
        # rows with nothing allowed (type and role tokens) carry no attention at all
        expected = torch.from_numpy((~np.isneginf(m)).any(1)).float().expand_as(a.sum(-1))
        assert torch.allclose(a.sum(-1), expected, atol=1e-5)


def test_code_over_budget_raises():
    with pytest.raises(LengthError):
        build_input("", ["x"] * 500, None)


def test_comment_is_cut_before_nodes():
    inp = two_node_input(" ".join(["word"] * 600))
    assert inp.segments["N"][1] - inp.segments["N"][0] == 2
    assert len(inp) == 512


def test_mlm_count_and_actions():
    inp = build_input("", [f"t{i}" for i in range(100)], None)
    pm = sample_pretrain_masks(inp, 7)
    assert len(pm.mlm_positions) == 15
    s0, s1 = inp.segments["S"]
    assert all(s0 <= p < s1 for p in pm.mlm_positions)
    assert set(pm.mlm_actions.tolist()) <= {MLM_MASK, MLM_RANDOM, MLM_KEEP}


def test_mlm_action_proportions():
    inp = build_input("", [f"t{i}" for i in range(200)], None)
    actions = np.concatenate([sample_pretrain_masks(inp, s).mlm_actions for s in range(200)])
    frac = np.bincount(actions, minlength=3) / len(actions)
    assert abs(frac[MLM_MASK] - 0.8) < 0.02 and abs(frac[MLM_RANDOM] - 0.1) < 0.02


def test_hidden_relation_counts():
    assert hidden_count(10) == 2
    assert hidden_count(3) == 1 and hidden_count(0) == 0
    inp = method_input("void f(int a){ int b = a; int c = b; int d = c; a = d + b; b = a; c = a; }")
    n_e2 = len(inp.e2)
    pm = sample_pretrain_masks(inp, 1)
    assert len(pm.hidden["e2"]) == hidden_count(n_e2)


def test_masks_are_deterministic():
    inp = method_input("int f(int a, int b){ if (a > b) { return a; } return b; }")
    a, b = sample_pretrain_masks(inp, 3), sample_pretrain_masks(inp, 3)
    assert np.array_equal(a.mlm_positions, b.mlm_positions) and np.array_equal(a.mlm_tokens, b.mlm_tokens)
    for k in a.hidden:
        assert np.array_equal(a.hidden[k], b.hidden[k]) and np.array_equal(a.negatives[k], b.negatives[k])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_negatives_are_disjoint_from_relations(prog_seed, seed):
    inp = method_input(random_method(prog_seed, max_depth=1, n_stmts=4))
    pm = sample_pretrain_masks(inp, seed)
    for name, pairs in inp.relations.items():
        truth = set(map(tuple, pairs.tolist()))
        hidden = set(map(tuple, pm.hidden[name].tolist()))
        neg = set(map(tuple, pm.negatives[name].tolist()))
        assert hidden <= truth and not (neg & truth) and not (neg & hidden)
        rows, cols = inp.product_space(name)
        assert all(r in rows and c in cols for r, c in neg)
        _, m = pm.apply(inp)
        for r, c in hidden:
            assert m[r, c] == NEG or r in inp.special_positions


def test_relation_positions_stay_in_segments():
    inp = method_input("void f(int[] xs){ for (int x : xs) { x = x + 1; } }")
    for name, pairs in inp.relations.items():
        rows, cols = inp.product_space(name)
        assert all(r in rows and c in cols for r, c in pairs.tolist())
