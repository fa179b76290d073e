"""Small BERT-style encoder with an additive attention mask, plus the five
pre-training objectives.

Parameters live in a flat ``dict[str, torch.Tensor]`` so that optimizers,
momentum updates and checkpoints can treat every model uniformly.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch
import torch.nn.functional as F

from .errors import GradCheckFailure, ShapeError
from .sequence import ModelInput, PretrainMasks, build_attention_mask

CHECKPOINT_FORMAT = "sfgloc-params"
CHECKPOINT_VERSION = 1


@dataclass
class EncoderConfig:
    vocab_size: int
    d: int = 64
    layers: int = 2
    heads: int = 4
    max_len: int = 512
    ffn_mult: int = 4
    ln_eps: float = 1e-12
    init_std: float = 0.02
    tok_init_std: Optional[float] = None  # token table scale; defaults to init_std

    def __post_init__(self):
        if self.d % self.heads:
            raise ShapeError(f"d={self.d} is not divisible by heads={self.heads}")


def init_params(cfg: EncoderConfig, seed: int = 0, dtype=torch.float32) -> dict:
    g = torch.Generator().manual_seed(seed)
    d, f = cfg.d, cfg.d * cfg.ffn_mult

    def normal(*shape):
        return (torch.randn(*shape, generator=g, dtype=torch.float64) * cfg.init_std).to(dtype)

    def zeros(*shape):
        return torch.zeros(*shape, dtype=dtype)

    def ones(*shape):
        return torch.ones(*shape, dtype=dtype)

    tok_std = cfg.init_std if cfg.tok_init_std is None else cfg.tok_init_std
    p = {
        "tok_emb": normal(cfg.vocab_size, d) * (tok_std / cfg.init_std),
        "pos_emb": normal(cfg.max_len, d),
        "emb_ln.g": ones(d),
        "emb_ln.b": zeros(d),
    }
    for i in range(cfg.layers):
        pre = f"l{i}."
        for name in ("q", "k", "v", "o"):
            p[pre + "w" + name] = normal(d, d)
            p[pre + "b" + name] = zeros(d)
        p[pre + "ln1.g"], p[pre + "ln1.b"] = ones(d), zeros(d)
        p[pre + "w1"], p[pre + "b1"] = normal(d, f), zeros(f)
        p[pre + "w2"], p[pre + "b2"] = normal(f, d), zeros(d)
        p[pre + "ln2.g"], p[pre + "ln2.b"] = ones(d), zeros(d)
    p["mlm.bias"] = zeros(cfg.vocab_size)
    return p


def safe_mask(mask: torch.Tensor):
    """(mask with fully blocked rows opened up, per-row allowed flags or None when every row is allowed)."""
    row_ok = torch.isfinite(mask).any(dim=-1, keepdim=True)
    if bool(row_ok.all()):
        return mask, None
    return torch.where(row_ok, mask, torch.zeros_like(mask)), row_ok.to(mask.dtype)


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor, prepared=None) -> torch.Tensor:
    """Softmax of ``scores + mask`` along the last axis.

    Blocked entries get weight exactly 0; a row with nothing allowed yields
    all-zero weights (and zero gradient) instead of NaN. ``prepared`` is the
    result of ``safe_mask(mask)`` when one mask is reused across layers.
    """
    m, row_ok = prepared if prepared is not None else safe_mask(mask)
    w = torch.softmax(scores + m, dim=-1)
    return w if row_ok is None else w * row_ok


def _ln(x, g, b, eps):
    return F.layer_norm(x, (x.shape[-1],), g, b, eps)


def encode(params: dict, ids, mask, cfg: EncoderConfig, return_attention: bool = False):
    """Hidden states (B, L, d) for token ids (B, L) under additive mask (B, L, L).

    Unbatched inputs (L,) / (L, L) give (L, d).
    """
    ids = torch.as_tensor(ids)
    mask = torch.as_tensor(mask, dtype=params["tok_emb"].dtype)
    single = ids.dim() == 1
    if single:
        ids, mask = ids[None], mask[None]
    B, L = ids.shape
    if mask.shape != (B, L, L):
        raise ShapeError(f"mask shape {tuple(mask.shape)} does not match sequence length {L}")
    if L > cfg.max_len:
        raise ShapeError(f"sequence length {L} exceeds max_len {cfg.max_len}")
    H, dh = cfg.heads, cfg.d // cfg.heads
    x = params["tok_emb"][ids] + params["pos_emb"][:L][None]
    x = _ln(x, params["emb_ln.g"], params["emb_ln.b"], cfg.ln_eps)
    m = mask[:, None]  # broadcast over heads
    prepared = safe_mask(m)
    attentions = []
    for i in range(cfg.layers):
        pre = f"l{i}."

        def proj(name):
            y = x @ params[pre + "w" + name] + params[pre + "b" + name]
            return y.view(B, L, H, dh).transpose(1, 2)

        q, k, v = proj("q"), proj("k"), proj("v")
        w = masked_softmax(q @ k.transpose(-1, -2) / math.sqrt(dh), m, prepared)
        attentions.append(w)
        ctx = (w @ v).transpose(1, 2).reshape(B, L, cfg.d)
        h = _ln(x + ctx @ params[pre + "wo"] + params[pre + "bo"], params[pre + "ln1.g"], params[pre + "ln1.b"],
                cfg.ln_eps)
        ff = F.gelu(h @ params[pre + "w1"] + params[pre + "b1"]) @ params[pre + "w2"] + params[pre + "b2"]
        x = _ln(h + ff, params[pre + "ln2.g"], params[pre + "ln2.b"], cfg.ln_eps)
    out = x[0] if single else x
    if return_attention:
        return out, [a[0] for a in attentions] if single else attentions
    return out


def pad_batch(items, pad_id: int = 0):
    """Stack (ids, mask) pairs of unequal length.

    Real positions never see padding; each padding position attends only to
    itself so that no row is fully blocked.
    """
    L = max(len(ids) for ids, _ in items)
    B = len(items)
    ids = np.full((B, L), pad_id, dtype=np.int64)
    mask = np.full((B, L, L), -np.inf)
    for b, (i, m) in enumerate(items):
        n = len(i)
        ids[b, :n] = i
        mask[b, :n, :n] = m
        pad = np.arange(n, L)
        mask[b, pad, pad] = 0.0
    return torch.from_numpy(ids), torch.from_numpy(mask)


def edge_probability(h_i, h_j):
    """sigmoid(h_i . h_j), batched over leading axes."""
    return torch.sigmoid((torch.as_tensor(h_i) * torch.as_tensor(h_j)).sum(-1))


def relation_bce(h: torch.Tensor, pairs, labels) -> torch.Tensor:
    """Summed binary cross-entropy of sigmoid(dot) edge probabilities."""
    if len(pairs) == 0:
        return h.sum() * 0.0
    pairs = torch.as_tensor(np.asarray(pairs), dtype=torch.long)
    y = torch.as_tensor(np.asarray(labels), dtype=h.dtype)
    z = (h[pairs[:, 0]] * h[pairs[:, 1]]).sum(-1)
    return -(y * F.logsigmoid(z) + (1 - y) * F.logsigmoid(-z)).sum()


@dataclass
class PretrainLossReport:
    l_mlm: torch.Tensor
    l_na: torch.Tensor
    l_gp: torch.Tensor
    l_tp: torch.Tensor
    l_rp: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.l_mlm + self.l_na + self.l_gp + self.l_tp + self.l_rp

    def as_dict(self):
        d = {k: float(v.detach()) for k, v in vars(self).items()}
        d["total"] = float(self.total.detach())
        return d


def pretrain_losses(batch, params: dict, cfg: EncoderConfig) -> PretrainLossReport:
    """The five pre-training losses, each averaged over the batch.

    ``batch`` is a list of (ModelInput, PretrainMasks). Relation losses sum
    the binary cross-entropy over hidden pairs and their negatives; the MLM
    loss sums the cross-entropy over the corrupted code positions. Relation
    pairs hidden by the masks are also blocked in the attention mask.
    """
    items = [m.apply(inp) for inp, m in batch]
    ids, mask = pad_batch(items)
    h = encode(params, ids, mask, cfg)
    sums = {k: h.sum() * 0.0 for k in ("mlm", "e1", "e2", "e3", "e4")}
    for b, (inp, masks) in enumerate(batch):
        hb = h[b]
        if len(masks.mlm_positions):
            pos = torch.as_tensor(masks.mlm_positions)
            logits = hb[pos] @ params["tok_emb"].T + params["mlm.bias"]
            sums["mlm"] = sums["mlm"] + F.cross_entropy(logits, torch.as_tensor(masks.mlm_targets), reduction="sum")
        for name in ("e1", "e2", "e3", "e4"):
            pairs, labels = masks.labelled_pairs(name)
            sums[name] = sums[name] + relation_bce(hb, pairs, labels)
    n = len(batch)
    return PretrainLossReport(sums["mlm"] / n, sums["e1"] / n, sums["e2"] / n, sums["e3"] / n, sums["e4"] / n)


# -- optimisation ----------------------------------------------------------

class Adam:
    """Adam with bias correction over a dict of tensors."""

    def __init__(self, params: dict, lr=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr, self.betas, self.eps = lr, betas, eps
        self.t = 0
        self.m = {k: torch.zeros_like(v) for k, v in params.items()}
        self.v = {k: torch.zeros_like(v) for k, v in params.items()}

    @torch.no_grad()
    def step(self, grads: dict):
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for k, g in grads.items():
            if g is None:
                continue
            self.m[k].mul_(b1).add_(g, alpha=1 - b1)
            self.v[k].mul_(b2).addcmul_(g, g, value=1 - b2)
            self.params[k].sub_(self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps))


def loss_and_grads(params: dict, loss_fn: Callable):
    """Evaluate ``loss_fn(params)`` and d loss / d params via autograd."""
    live = {k: v.detach().requires_grad_(True) for k, v in params.items()}
    loss = loss_fn(live)
    keys = list(live)
    grads = torch.autograd.grad(loss, [live[k] for k in keys], allow_unused=True)
    return loss.detach(), {k: (g if g is not None else torch.zeros_like(live[k])) for k, g in zip(keys, grads)}


def gradient_check(params: dict, loss_fn: Callable, eps: float = 1e-4, n_coords: int = 200, seed: int = 0,
                   threshold: float = 1e-3, raise_on_failure: bool = True) -> float:
    """Max relative error between autograd and central differences.

    Half of the probed coordinates are drawn among those with a non-zero
    analytic gradient, the rest uniformly over all coordinates.
    """
    params = {k: v.detach().to(torch.float64).clone() for k, v in params.items()}
    _, grads = loss_and_grads(params, loss_fn)
    keys = list(params)
    sizes = np.array([params[k].numel() for k in keys])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat_grad = torch.cat([grads[k].reshape(-1) for k in keys]).numpy()
    rng = np.random.default_rng(seed)
    nz = np.flatnonzero(flat_grad != 0)
    k_nz = min(len(nz), n_coords // 2)
    picks = list(rng.choice(nz, size=k_nz, replace=False)) if k_nz else []
    picks += list(rng.choice(offsets[-1], size=n_coords - k_nz, replace=False))
    worst = 0.0
    with torch.no_grad():
        for flat in picks:
            t = int(np.searchsorted(offsets, flat, side="right") - 1)
            key, local = keys[t], int(flat - offsets[t])
            view = params[key].view(-1)
            orig = view[local].item()
            view[local] = orig + eps
            up = float(loss_fn(params))
            view[local] = orig - eps
            down = float(loss_fn(params))
            view[local] = orig
            numeric = (up - down) / (2 * eps)
            analytic = float(flat_grad[flat])
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, err)
    if raise_on_failure and worst > threshold:
        raise GradCheckFailure(worst, threshold)
    return worst


# -- checkpoints -----------------------------------------------------------

def save_params(path, params: dict, config: Optional[dict] = None, extra: Optional[dict] = None):
    """Write an .npz tensor dump with an embedded JSON shape manifest."""
    arrays = {k: v.detach().cpu().numpy() for k, v in params.items()}
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config or {},
        "extra": extra or {},
        "tensors": {k: {"shape": list(a.shape), "dtype": str(a.dtype)} for k, a in arrays.items()},
    }
    with open(path, "wb") as fh:
        np.savez(fh, __manifest__=np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8), **arrays)


def load_params(path):
    """Inverse of save_params: returns (params, manifest)."""
    with np.load(path) as z:
        manifest = json.loads(bytes(z["__manifest__"]).decode())
        if manifest.get("format") != CHECKPOINT_FORMAT or manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} file")
        params = {}
        for k, meta in manifest["tensors"].items():
            a = z[k]
            if list(a.shape) != meta["shape"]:
                raise ShapeError(f"{path}: tensor {k} has shape {a.shape}, manifest says {meta['shape']}")
            params[k] = torch.from_numpy(a.copy())
    return params, manifest


def encode_input(params: dict, inp: ModelInput, cfg: EncoderConfig, mask: Optional[np.ndarray] = None):
    """Hidden states for one ModelInput under its graph-guided mask."""
    if mask is None:
        mask = build_attention_mask(inp)
    return encode(params, torch.from_numpy(inp.ids), torch.from_numpy(mask), cfg)


def config_dict(cfg: EncoderConfig) -> dict:
    return asdict(cfg)


def pretrain(inputs, params: dict, cfg: EncoderConfig, steps: int, seed: int = 0, lr: float = 1e-4,
             batch_size: int = 8, vocab_size: Optional[int] = None, n_reserved: int = 0, log=None):
    """Run ``steps`` Adam updates of the summed pre-training loss.

    Fresh MLM and relation masks are drawn for every sampled input. Returns
    the list of per-step loss dicts; ``params`` is updated in place.
    """
    from .sequence import sample_pretrain_masks

    rng = np.random.default_rng(seed)
    opt = Adam(params, lr=lr)
    history = []
    for step in range(steps):
        pick = rng.choice(len(inputs), size=min(batch_size, len(inputs)), replace=False)
        batch = [(inputs[i], sample_pretrain_masks(inputs[i], rng, vocab_size, n_reserved)) for i in pick]
        box = {}

        def loss_fn(p):
            box["report"] = pretrain_losses(batch, p, cfg)
            return box["report"].total

        _, grads = loss_and_grads(params, loss_fn)
        opt.step(grads)
        row = {"step": step + 1, **box["report"].as_dict()}
        history.append(row)
        if log is not None:
            log(row)
    return history
