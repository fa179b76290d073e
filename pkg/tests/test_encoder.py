import math

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, settings
from hypothesis import strategies as st

from sfgloc.encoder import (Adam, EncoderConfig, edge_probability, encode, encode_input, gradient_check, init_params,
                            load_params, loss_and_grads, pad_batch, pretrain, pretrain_losses, relation_bce,
                            save_params)
from sfgloc.errors import GradCheckFailure, ShapeError
from sfgloc.pipeline import method_input
from sfgloc.sequence import build_attention_mask, sample_pretrain_masks
from sfgloc.vocab import Vocab

METHODS = [
    "/** Adds the two values. */ int add(int a, int b) { int c = a + b; return c; }",
    "/** Largest element. */ int max(int[] xs, int n) { int m = 0; for (int i = 0; i < n; i++) "
    "{ if (xs[i] > m) { m = xs[i]; } } return m; }",
    "/** Counts items. */ int count(List items) { int k = 0; for (Object o : items) { k += 1; } return k; }",
]


def corpus_inputs(methods=METHODS):
    raw = [method_input(m) for m in methods]
    vocab = Vocab.build([x.tokens for x in raw])
    return [method_input(m, vocab) for m in methods], vocab


def test_output_shape_default_config():
    inp = method_input(METHODS[0])
    cfg = EncoderConfig(vocab_size=int(inp.ids.max()) + 1)
    h = encode_input(init_params(cfg), inp, cfg)
    assert h.shape == (len(inp), 64) and torch.isfinite(h).all()


def test_shape_mismatch():
    cfg = EncoderConfig(vocab_size=10, d=16, heads=2)
    with pytest.raises(ShapeError):
        encode(init_params(cfg), torch.arange(5), torch.zeros(4, 4), cfg)


def test_unmasked_matches_reference_transformer():
    cfg = EncoderConfig(vocab_size=30, d=16, layers=2, heads=4, ln_eps=1e-5)
    p = init_params(cfg, 3, torch.float64)
    for k in p:
        if k.endswith(".b") or k.startswith("l") and "ln" not in k and k.split(".")[-1].startswith("b"):
            p[k] = torch.randn_like(p[k]) * 0.1  # nonzero biases make the comparison meaningful
    ids = torch.randint(0, 30, (2, 9))
    ours = encode(p, ids, torch.zeros(2, 9, 9, dtype=torch.float64), cfg)

    x = F.layer_norm(p["tok_emb"][ids] + p["pos_emb"][:9], (16,), p["emb_ln.g"], p["emb_ln.b"], 1e-5)
    for i in range(cfg.layers):
        layer = torch.nn.TransformerEncoderLayer(16, 4, dim_feedforward=64, dropout=0.0, activation="gelu",
                                                 layer_norm_eps=1e-5, batch_first=True, dtype=torch.float64)
        pre = f"l{i}."
        with torch.no_grad():
            layer.self_attn.in_proj_weight.copy_(torch.cat([p[pre + "wq"].T, p[pre + "wk"].T, p[pre + "wv"].T]))
            layer.self_attn.in_proj_bias.copy_(torch.cat([p[pre + "bq"], p[pre + "bk"], p[pre + "bv"]]))
            layer.self_attn.out_proj.weight.copy_(p[pre + "wo"].T)
            layer.self_attn.out_proj.bias.copy_(p[pre + "bo"])
            layer.linear1.weight.copy_(p[pre + "w1"].T)
            layer.linear1.bias.copy_(p[pre + "b1"])
            layer.linear2.weight.copy_(p[pre + "w2"].T)
            layer.linear2.bias.copy_(p[pre + "b2"])
            layer.norm1.weight.copy_(p[pre + "ln1.g"])
            layer.norm1.bias.copy_(p[pre + "ln1.b"])
            layer.norm2.weight.copy_(p[pre + "ln2.g"])
            layer.norm2.bias.copy_(p[pre + "ln2.b"])
        layer.eval()
        with torch.no_grad():
            x = layer(x)
    assert torch.allclose(ours, x, atol=1e-10)


def test_blocked_token_is_invisible_to_layer_one():
    cfg = EncoderConfig(vocab_size=20, d=16, layers=1, heads=2)
    p = init_params(cfg, 1)
    L = 6
    mask = torch.zeros(L, L)
    mask[2, 4] = mask[4, 2] = float("-inf")
    ids = torch.tensor([1, 2, 3, 4, 5, 6])
    before = encode(p, ids, mask, cfg)
    changed = ids.clone()
    changed[4] = 9
    after = encode(p, changed, mask, cfg)
    assert torch.equal(before[2], after[2])
    assert not torch.equal(before[3], after[3])


def test_padding_rows():
    ids, mask = pad_batch([(np.array([1, 2, 3]), np.zeros((3, 3))), (np.array([4]), np.zeros((1, 1)))])
    assert ids.shape == (2, 3)
    assert mask[1, 0, 1] == float("-inf") and mask[1, 2, 2] == 0


def test_edge_probability_values():
    assert float(edge_probability(torch.zeros(3), torch.ones(3))) == 0.5
    h = torch.tensor([2.0, 0.0])
    assert round(float(edge_probability(h, h)), 4) == 0.9820
    a, b = torch.randn(8), torch.randn(8)
    assert math.isclose(float(edge_probability(a, -b)), 1 - float(edge_probability(a, b)), abs_tol=1e-6)


def _h_for_probs(probs):
    """Hidden rows such that row 0 dotted with row k gives logit(probs[k-1])."""
    h = torch.zeros(len(probs) + 1, len(probs) + 1, dtype=torch.float64)
    h[0, 0] = 1.0
    for k, p in enumerate(probs, start=1):
        h[k, 0] = math.log(p / (1 - p))
    return h


def test_bce_values():
    h = _h_for_probs([0.5])
    assert math.isclose(float(relation_bce(h, np.array([[0, 1]]), np.array([1.0]))), math.log(2), rel_tol=1e-12)
    h = _h_for_probs([0.8, 0.3])
    loss = float(relation_bce(h, np.array([[0, 1], [0, 2]]), np.array([1.0, 0.0])))
    assert math.isclose(loss, -math.log(0.8) - math.log(0.7), rel_tol=1e-12)
    assert round(loss, 4) == 0.5798
    h = _h_for_probs([1 - 1e-12])
    assert float(relation_bce(h, np.array([[0, 1]]), np.array([1.0]))) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_bce_monotone_toward_label(p, step):
    lo = float(relation_bce(_h_for_probs([p]), np.array([[0, 1]]), np.array([1.0])))
    hi = float(relation_bce(_h_for_probs([p + step]), np.array([[0, 1]]), np.array([1.0])))
    assert hi < lo


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(6))))
def test_bce_permutation_invariant(perm):
    h = torch.randn(7, 4, dtype=torch.float64)
    pairs = np.array([[0, k] for k in range(1, 7)])
    labels = np.array([1, 0, 1, 1, 0, 0], dtype=float)
    a = relation_bce(h, pairs, labels)
    b = relation_bce(h, pairs[list(perm)], labels[list(perm)])
    assert torch.allclose(a, b, atol=1e-12)


def test_losses_non_negative_and_total():
    inputs, vocab = corpus_inputs()
    cfg = EncoderConfig(vocab_size=len(vocab), d=16, layers=1, heads=2)
    batch = [(x, sample_pretrain_masks(x, i, len(vocab), vocab.n_reserved)) for i, x in enumerate(inputs)]
    rep = pretrain_losses(batch, init_params(cfg), cfg)
    parts = [rep.l_mlm, rep.l_na, rep.l_gp, rep.l_tp, rep.l_rp]
    assert all(float(t) >= 0 for t in parts)
    assert math.isclose(float(rep.total), sum(float(t) for t in parts), rel_tol=1e-6)


def test_gradient_check_linear_probe():
    emb = torch.randn(12, 5, dtype=torch.float64)
    params = {"w": torch.randn(5, dtype=torch.float64)}
    err = gradient_check(params, lambda p: (emb @ p["w"]).sum(), n_coords=5)
    assert err < 1e-6


def test_gradient_check_all_five_losses():
    inputs, vocab = corpus_inputs()
    cfg = EncoderConfig(vocab_size=len(vocab), d=16, layers=1, heads=2)
    params = init_params(cfg, 0, torch.float64)
    batch = [(x, sample_pretrain_masks(x, i, len(vocab), vocab.n_reserved)) for i, x in enumerate(inputs)]
    for name in ("l_mlm", "l_na", "l_gp", "l_tp", "l_rp"):
        err = gradient_check(params, lambda p: getattr(pretrain_losses(batch, p, cfg), name), n_coords=40, seed=1)
        assert err < 1e-3, name


def test_gradient_check_reports_failure():
    params = {"w": torch.ones(3, dtype=torch.float64)}

    def right(p):
        return p["w"].sum() + (p["w"] ** 2).sum()

    # detach hides the quadratic term from autograd, so the analytic gradient is wrong
    def wrong(p):
        return p["w"].sum() + (p["w"] ** 2).sum().detach()

    assert gradient_check(params, right, n_coords=3) < 1e-6
    with pytest.raises(GradCheckFailure):
        gradient_check(params, wrong, n_coords=3)


def test_zero_loss_point_has_small_gradient():
    h = torch.zeros(2, 2, dtype=torch.float64)
    h[0, 0], h[1, 0] = 1.0, 40.0
    params = {"h": h}
    _, g = loss_and_grads(params, lambda p: relation_bce(p["h"], np.array([[0, 1]]), np.array([1.0])))
    assert float(g["h"].norm()) < 1e-15


def test_adam_first_step_moves_by_lr():
    p = {"w": torch.tensor([1.0, -2.0])}
    Adam(p, lr=0.1).step({"w": torch.tensor([3.0, -0.5])})
    assert torch.allclose(p["w"], torch.tensor([0.9, -1.9]), atol=1e-6)


def test_checkpoint_round_trip(tmp_path):
    cfg = EncoderConfig(vocab_size=11, d=8, heads=2, layers=1)
    p = init_params(cfg, 2)
    save_params(tmp_path / "ckpt.npz", p, {"d": 8}, {"note": "x"})
    q, manifest = load_params(tmp_path / "ckpt.npz")
    assert manifest["version"] == 1 and manifest["config"] == {"d": 8} and manifest["extra"] == {"note": "x"}
    assert set(q) == set(p) and all(torch.equal(p[k], q[k]) for k in p)


def test_pretraining_lowers_the_loss():
    methods = [f"/** step {i} */ int f{i}(int a, int b) {{ int c = a * {i}; if (c > b) {{ c = b; }} return c + a; }}"
               for i in range(12)]
    inputs, vocab = corpus_inputs(methods)
    cfg = EncoderConfig(vocab_size=len(vocab), d=16, layers=1, heads=2)
    params = init_params(cfg, 0)
    hist = pretrain(inputs, params, cfg, steps=60, seed=0, lr=3e-3, batch_size=4, vocab_size=len(vocab),
                    n_reserved=vocab.n_reserved)
    first = np.mean([h["total"] for h in hist[:5]])
    last = np.mean([h["total"] for h in hist[-5:]])
    assert last < first


def test_mask_shape_guard_for_inputs():
    inp = method_input(METHODS[0])
    cfg = EncoderConfig(vocab_size=int(inp.ids.max()) + 1, d=16, heads=2, layers=1)
    with pytest.raises(ShapeError):
        encode_input(init_params(cfg), inp, cfg, mask=build_attention_mask(inp)[:-1, :-1])
