"""Hierarchical momentum contrastive training.

The query model holds a plain report encoder, the graph-masked changeset
encoder and one projector per side. The key model is a slowly moving copy
of the changeset side. Similarities are compared at three levels: encoder
features, projected vectors and a FIFO bank of key-model negatives.
"""
from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .encoder import Adam, EncoderConfig, encode, init_params, loss_and_grads, pad_batch
from .errors import ConfigError, ShapeError, StatsError
from .sequence import ModelInput, build_attention_mask

log = logging.getLogger(__name__)


@dataclass
class HmcblConfig:
    d_proj: int = 128
    momentum: float = 0.999
    bank_size: int = 512
    batch_size: int = 8
    lr: float = 3e-5
    gamma: float = 0.07
    alpha_f: float = 1.0
    alpha_m: float = 1.0
    alpha_b: float = 1.0
    leaky_slope: float = 0.01
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    share_embeddings: bool = True  # report encoder reads the changeset token table
    share_encoder: bool = False  # report encoder is the changeset encoder without the graph mask
    pool: str = "mean"  # sequence vector for q/p/n features: "first" token or "mean" over text/code tokens

    def validate(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.bank_size < 0:
            raise ConfigError("bank_size must be >= 0")
        if self.bank_size == 0 and self.alpha_b > 0:
            raise ConfigError("bank-level loss enabled (alpha_b > 0) with an empty bank (K = 0)")
        if self.gamma <= 0:
            raise ConfigError("temperature gamma must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.pool not in ("first", "mean"):
            raise ConfigError(f"pool must be 'first' or 'mean', got {self.pool!r}")


# -- projector -------------------------------------------------------------

@dataclass
class BatchNormStats:
    """Running statistics of a non-affine batch norm."""

    dim: int
    mean: torch.Tensor = None
    var: torch.Tensor = None
    updates: int = 0

    def __post_init__(self):
        if self.mean is None:
            self.mean = torch.zeros(self.dim, dtype=torch.float64)
            self.var = torch.ones(self.dim, dtype=torch.float64)


def batch_norm(x: torch.Tensor, stats: BatchNormStats, train: bool, eps=1e-5, momentum=0.1):
    if train:
        mu = x.mean(0)
        var = x.var(0, unbiased=False)
        with torch.no_grad():
            n = x.shape[0]
            unbiased = var.detach() * (n / (n - 1)) if n > 1 else var.detach()
            stats.mean.mul_(1 - momentum).add_(mu.detach().to(stats.mean.dtype), alpha=momentum)
            stats.var.mul_(1 - momentum).add_(unbiased.to(stats.var.dtype), alpha=momentum)
            stats.updates += 1
        return (x - mu) / torch.sqrt(var + eps)
    if stats.updates == 0:
        raise StatsError("projector evaluated before any training step; no running statistics")
    return (x - stats.mean.to(x.dtype)) / torch.sqrt(stats.var.to(x.dtype) + eps)


def init_projector(d: int, d_proj: int, g: torch.Generator, dtype=torch.float32) -> dict:
    def w(i, o):
        return (torch.randn(i, o, generator=g, dtype=torch.float64) / np.sqrt(i)).to(dtype)

    return {"w1": w(d, d_proj), "w2": w(d_proj, d_proj)}


def project(v: torch.Tensor, proj: dict, stats: BatchNormStats, train: bool = True, slope: float = 0.01,
            eps: float = 1e-5, momentum: float = 0.1) -> torch.Tensor:
    """W2 . BN(leaky_relu(W1 . v)); bias-free. ``v`` is (B, d) or (d,)."""
    single = v.dim() == 1
    x = v[None] if single else v
    h = batch_norm(F.leaky_relu(x @ proj["w1"], slope), stats, train, eps, momentum) @ proj["w2"]
    return h[0] if single else h


# -- parameters ------------------------------------------------------------

def _sub(params: dict, prefix: str) -> dict:
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


def _prefixed(params: dict, prefix: str) -> dict:
    return {prefix + k: v for k, v in params.items()}


def momentum_update(key: dict, query: dict, m: float) -> dict:
    """theta_k <- m theta_k + (1 - m) theta_q, in place on ``key``; returns it."""
    with torch.no_grad():
        for name, tk in key.items():
            tq = query.get(name)
            if tq is None or tq.shape != tk.shape:
                raise ShapeError(f"key tensor {name}: no query tensor of shape {tuple(tk.shape)}")
            if m == 0.0:
                tk.copy_(tq)
            elif m != 1.0:
                tk.mul_(m).add_(tq.to(tk.dtype), alpha=1 - m)
    return key


class MemoryBank:
    """FIFO queue of unit vectors with a fixed capacity."""

    def __init__(self, capacity: int, dim: int):
        self.capacity, self.dim = capacity, dim
        self._q: deque = deque(maxlen=capacity if capacity > 0 else 0)
        self.inserted = 0

    def __len__(self):
        return len(self._q)

    def enqueue(self, vectors):
        v = torch.as_tensor(vectors).detach().to(torch.float64)
        if v.dim() == 1:
            v = v[None]
        if v.shape[-1] != self.dim:
            raise ShapeError(f"bank dim {self.dim}, got vectors of dim {v.shape[-1]}")
        v = F.normalize(v, dim=-1)
        for row in v:
            self.inserted += 1
            if self.capacity > 0:
                self._q.append(row.clone())

    def tensor(self, dtype=torch.float32) -> torch.Tensor:
        """Stored vectors, oldest first, shape (size, dim)."""
        if not self._q:
            return torch.zeros(0, self.dim, dtype=dtype)
        return torch.stack(list(self._q)).to(dtype)


def bank_update(bank: MemoryBank, key_vectors) -> MemoryBank:
    bank.enqueue(key_vectors)
    return bank


@dataclass
class DualModel:
    enc_cfg: EncoderConfig
    cfg: HmcblConfig
    query: dict  # report.*, code.*, proj_b.*, proj_c.*
    key: dict  # code.*, proj_c.*
    bn: dict  # q_b, q_c, k_c -> BatchNormStats
    bank: MemoryBank
    steps: int = 0
    momentum_updates: int = 0

    @classmethod
    def create(cls, enc_cfg: EncoderConfig, cfg: HmcblConfig, seed: int = 0, encoder_params: Optional[dict] = None,
               dtype=torch.float32):
        """Fresh model; both encoders start from ``encoder_params`` when given."""
        cfg.validate()
        base = encoder_params if encoder_params is not None else init_params(enc_cfg, seed, dtype)
        base = {k: v.detach().to(dtype).clone() for k, v in base.items()}
        g = torch.Generator().manual_seed(seed + 1)
        query = {}
        shared = set(base) if cfg.share_encoder else {"tok_emb"} if cfg.share_embeddings else set()
        query.update(_prefixed({k: v.clone() for k, v in base.items() if k not in shared}, "report."))
        query.update(_prefixed({k: v.clone() for k, v in base.items()}, "code."))
        query.update(_prefixed(init_projector(enc_cfg.d, cfg.d_proj, g, dtype), "proj_b."))
        query.update(_prefixed(init_projector(enc_cfg.d, cfg.d_proj, g, dtype), "proj_c."))
        key = {k: v.clone() for k, v in query.items() if k.startswith(("code.", "proj_c."))}
        bn = {name: BatchNormStats(cfg.d_proj) for name in ("q_b", "q_c", "k_c")}
        return cls(enc_cfg, cfg, query, key, bn, MemoryBank(cfg.bank_size, cfg.d_proj))


# -- encoding --------------------------------------------------------------

@dataclass
class Encoded:
    """Feature-level (encoder) and model-level (projected) vectors, batched."""

    feature: torch.Tensor
    model: Optional[torch.Tensor] = None


def report_batch(report_ids: Sequence[np.ndarray]):
    """Pad plain report sequences; attention is unrestricted within each."""
    return pad_batch([(ids, np.zeros((len(ids), len(ids)))) for ids in report_ids])


def changeset_batch(inputs: Sequence[ModelInput], masks: Optional[Sequence[np.ndarray]] = None):
    masks = masks if masks is not None else [build_attention_mask(x) for x in inputs]
    return pad_batch([(x.ids, m) for x, m in zip(inputs, masks)])


def _code_mean(h: torch.Tensor, inputs: Sequence[ModelInput]) -> torch.Tensor:
    rows = []
    for b, x in enumerate(inputs):
        s0, s1 = x.segments["S"]
        rows.append(h[b, s0:s1].mean(0) if s1 > s0 else h[b, 0])
    return torch.stack(rows)


def report_params(params: dict) -> dict:
    p = _sub(params, "report.")
    for k, v in _sub(params, "code.").items():
        p.setdefault(k, v)
    return p


def encode_reports(params: dict, enc_cfg: EncoderConfig, report_ids, pool: str = "first") -> torch.Tensor:
    ids, mask = report_batch(report_ids)
    p = report_params(params)
    h = encode(p, ids, mask.to(p["tok_emb"].dtype), enc_cfg)
    if pool == "first":
        return h[:, 0]
    # mean over the words between [CLS] and [SEP]
    return torch.stack([h[b, 1:len(r) - 1].mean(0) if len(r) > 2 else h[b, 0] for b, r in enumerate(report_ids)])


def encode_changesets(params: dict, enc_cfg: EncoderConfig, inputs, masks=None, pool: str = "first"):
    ids, mask = changeset_batch(inputs, masks)
    h = encode(_sub(params, "code."), ids, mask.to(params["code.tok_emb"].dtype), enc_cfg)
    return h[:, 0] if pool == "first" else _code_mean(h, inputs)


def encode_pair(report_ids: np.ndarray, changeset: ModelInput, model: DualModel, mask=None):
    """(q_feature, p_feature) for one report and one changeset, pooled per ``model.cfg.pool``."""
    pool = model.cfg.pool
    with torch.no_grad():
        q = encode_reports(model.query, model.enc_cfg, [report_ids], pool)[0]
        p = encode_changesets(model.query, model.enc_cfg, [changeset], None if mask is None else [mask], pool)[0]
    return q, p


# -- similarities and losses -----------------------------------------------

@dataclass
class SimilarityBundle:
    f_pos: torch.Tensor
    f_neg: torch.Tensor
    m_pos: torch.Tensor
    m_neg: torch.Tensor
    b_pos: torch.Tensor
    b_neg: torch.Tensor  # (B, K)


def _cos(a, b):
    return F.cosine_similarity(a, b, dim=-1, eps=1e-12)


def compute_similarities(q: Encoded, p: Encoded, n: Encoded, bank, p_key: Optional[torch.Tensor] = None):
    """Cosine similarities at the feature, model and bank levels.

    ``bank`` is a MemoryBank or an (K, d') tensor; the bank level compares
    the projected query against ``p_key`` and every stored negative.
    """
    qm = q.model if q.model is not None else q.feature
    pk = p_key if p_key is not None else (p.model if p.model is not None else p.feature)
    bank_t = bank.tensor(qm.dtype) if isinstance(bank, MemoryBank) else torch.as_tensor(bank, dtype=qm.dtype)
    single = qm.dim() == 1
    q2 = qm[None] if single else qm
    if len(bank_t):
        b_neg = F.normalize(q2, dim=-1, eps=1e-12) @ F.normalize(bank_t, dim=-1, eps=1e-12).T
    else:
        b_neg = q2.new_zeros(q2.shape[0], 0)
    if single:
        b_neg = b_neg[0]
    pm = p.model if p.model is not None else p.feature
    nm = n.model if n.model is not None else n.feature
    return SimilarityBundle(_cos(q.feature, p.feature), _cos(q.feature, n.feature), _cos(qm, pm), _cos(qm, nm),
                            _cos(qm, pk), b_neg)


@dataclass
class LossTerms:
    l_f: torch.Tensor
    l_m: torch.Tensor
    l_b: torch.Tensor
    total: torch.Tensor

    def as_dict(self):
        return {"L_f": self.l_f.item(), "L_m": self.l_m.item(), "L_b": self.l_b.item(), "L": self.total.item()}


def info_nce(pos: torch.Tensor, neg: torch.Tensor, gamma: float) -> torch.Tensor:
    """-log softmax of the positive among [pos, neg...]; ``neg`` is (..., k)."""
    if neg.dim() == pos.dim():
        neg = neg[..., None]
    logits = torch.cat([pos[..., None], neg], dim=-1) / gamma
    return torch.logsumexp(logits, dim=-1) - logits[..., 0]


def hierarchical_loss(sims: SimilarityBundle, gamma: float = 0.07, alpha_f: float = 1.0, alpha_m: float = 1.0,
                      alpha_b: float = 1.0) -> LossTerms:
    """Three InfoNCE terms averaged over the batch and their weighted sum.

    An empty bank gives L_b = 0; alpha_b = 0 drops the bank term entirely.
    """
    l_f = info_nce(sims.f_pos, sims.f_neg, gamma).mean()
    l_m = info_nce(sims.m_pos, sims.m_neg, gamma).mean()
    if sims.b_neg.shape[-1] == 0:
        l_b = l_f.new_zeros(())
    else:
        l_b = info_nce(sims.b_pos, sims.b_neg, gamma).mean()
    total = alpha_f * l_f + alpha_m * l_m
    if alpha_b != 0:
        total = total + alpha_b * l_b
    return LossTerms(l_f, l_m, l_b, total)


# -- training --------------------------------------------------------------

@dataclass
class TripletData:
    """Encoded training material: reports, changesets and positive links.

    ``pairs`` are (report index, changeset index); the negative for each
    triplet is drawn uniformly from ``negative_pool`` minus the report's own
    positives.
    """

    reports: list  # token id arrays
    changesets: list  # ModelInput
    pairs: list
    negative_pool: Optional[list] = None
    masks: list = field(default=None, repr=False)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("empty training split")
        if self.negative_pool is None:
            self.negative_pool = list(range(len(self.changesets)))
        if self.masks is None:
            self.masks = [build_attention_mask(x) for x in self.changesets]
        self.positives = {}
        for r, c in self.pairs:
            self.positives.setdefault(r, set()).add(c)
        self._pool = np.asarray(self.negative_pool)

    def sample_negative(self, r: int, rng: np.random.Generator) -> int:
        own = self.positives.get(r, set())
        if len(own) >= len(self._pool) or all(int(c) in own for c in self._pool):
            raise ValueError(f"report {r} has no available negative changeset")
        while True:
            c = int(self._pool[rng.integers(len(self._pool))])
            if c not in own:
                return c


def _key_vectors(model: DualModel, data: TripletData, idx):
    enc = encode_changesets(model.key, model.enc_cfg, [data.changesets[i] for i in idx],
                            [data.masks[i] for i in idx], pool="mean")
    c = model.cfg
    return project(enc, _sub(model.key, "proj_c."), model.bn["k_c"], True, c.leaky_slope, c.bn_eps, c.bn_momentum)


def train_step(model: DualModel, data: TripletData, batch, opt: Adam) -> dict:
    """One update on a batch of (report, positive, negative) index triplets."""
    c = model.cfg
    rs = [t[0] for t in batch]
    ps = [t[1] for t in batch]
    ns = [t[2] for t in batch]
    use_bank = c.alpha_b != 0
    with torch.no_grad():
        if use_bank:
            keys = _key_vectors(model, data, ps + ns)
            p_key, n_key = keys[: len(ps)], keys[len(ps):]
        bank_t = model.bank.tensor(next(iter(model.query.values())).dtype) if use_bank else None
    box = {}

    def loss_fn(params):
        qf = encode_reports(params, model.enc_cfg, [data.reports[r] for r in rs], c.pool)
        cf = encode_changesets(params, model.enc_cfg, [data.changesets[i] for i in ps + ns],
                               [data.masks[i] for i in ps + ns], c.pool)
        qm = project(qf, _sub(params, "proj_b."), model.bn["q_b"], True, c.leaky_slope, c.bn_eps, c.bn_momentum)
        cm = project(cf, _sub(params, "proj_c."), model.bn["q_c"], True, c.leaky_slope, c.bn_eps, c.bn_momentum)
        B = len(rs)
        q = Encoded(qf, qm)
        p = Encoded(cf[:B], cm[:B])
        n = Encoded(cf[B:], cm[B:])
        if use_bank:
            sims = compute_similarities(q, p, n, bank_t, p_key)
        else:
            sims = compute_similarities(q, p, n, qm.new_zeros(0, c.d_proj), cm[:B])
        box["terms"] = hierarchical_loss(sims, c.gamma, c.alpha_f, c.alpha_m, c.alpha_b)
        return box["terms"].total

    _, grads = loss_and_grads(model.query, loss_fn)
    opt.step(grads)
    momentum_update(model.key, model.query, c.momentum)
    model.momentum_updates += 1
    if use_bank:
        if len(model.bank) == 0:
            log.debug("bank empty at step %d: bank-level loss taken as 0", model.steps + 1)
        bank_update(model.bank, n_key)
    model.steps += 1
    return {"step": model.steps, **box["terms"].as_dict()}


def train_steps(model: DualModel, data: TripletData, steps: int, seed: int = 0, opt: Optional[Adam] = None,
                on_step=None):
    """Run ``steps`` updates with seeded batch and negative sampling; returns the log rows."""
    model.cfg.validate()
    rng = np.random.default_rng(seed)
    opt = opt if opt is not None else Adam(model.query, lr=model.cfg.lr)
    order = []
    history = []
    for _ in range(steps):
        batch = []
        while len(batch) < model.cfg.batch_size:
            if not order:
                order = list(rng.permutation(len(data.pairs)))
            r, p = data.pairs[order.pop()]
            batch.append((r, p, data.sample_negative(r, rng)))
        row = train_step(model, data, batch, opt)
        history.append(row)
        if on_step is not None:
            on_step(row)
    return history


def train_epoch(model: DualModel, data: TripletData, seed: int = 0, opt: Optional[Adam] = None):
    """One pass over the training pairs (rounded up to whole batches)."""
    steps = -(-len(data.pairs) // model.cfg.batch_size)
    return train_steps(model, data, steps, seed, opt)


def write_log(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "L_f", "L_m", "L_b", "L"])
        for r in rows:
            w.writerow([r["step"], repr(r["L_f"]), repr(r["L_m"]), repr(r["L_b"]), repr(r["L"])])


# -- inference -------------------------------------------------------------

def _eval_project(model, side, x):
    c = model.cfg
    stats = model.bn["q_" + side]
    return project(x, _sub(model.query, f"proj_{side}."), stats, False, c.leaky_slope, c.bn_eps, c.bn_momentum)


def embed_changesets(model: DualModel, inputs, masks=None, batch_size: int = 16) -> np.ndarray:
    """Retrieval vectors for changesets: feature and projected vectors, each unit-normalized, concatenated."""
    out = []
    with torch.no_grad():
        for i in range(0, len(inputs), batch_size):
            chunk = inputs[i:i + batch_size]
            mk = None if masks is None else masks[i:i + batch_size]
            f = encode_changesets(model.query, model.enc_cfg, chunk, mk, model.cfg.pool)
            out.append(_joint(f, _eval_project(model, "c", f)))
    return np.concatenate(out) if out else np.zeros((0, model.enc_cfg.d + model.cfg.d_proj))


def embed_reports(model: DualModel, report_ids, batch_size: int = 16) -> np.ndarray:
    out = []
    with torch.no_grad():
        for i in range(0, len(report_ids), batch_size):
            f = encode_reports(model.query, model.enc_cfg, report_ids[i:i + batch_size], model.cfg.pool)
            out.append(_joint(f, _eval_project(model, "b", f)))
    return np.concatenate(out) if out else np.zeros((0, model.enc_cfg.d + model.cfg.d_proj))


def _joint(feature, model_vec) -> np.ndarray:
    f = F.normalize(feature.to(torch.float64), dim=-1, eps=1e-12)
    m = F.normalize(model_vec.to(torch.float64), dim=-1, eps=1e-12)
    return torch.cat([f, m], dim=-1).numpy()


# -- persistence -----------------------------------------------------------

def model_tensors(model: DualModel) -> dict:
    t = _prefixed(model.query, "q.")
    t.update(_prefixed(model.key, "k."))
    for name, st in model.bn.items():
        t[f"bn.{name}.mean"], t[f"bn.{name}.var"] = st.mean, st.var
    t["bank"] = model.bank.tensor(torch.float64)
    return t


def model_meta(model: DualModel) -> dict:
    return {"encoder": asdict(model.enc_cfg), "hmcbl": asdict(model.cfg), "steps": model.steps,
            "momentum_updates": model.momentum_updates, "bank_inserted": model.bank.inserted,
            "bn_updates": {k: v.updates for k, v in model.bn.items()}}


def model_from_tensors(tensors: dict, meta: dict) -> DualModel:
    enc_cfg = EncoderConfig(**meta["encoder"])
    cfg = HmcblConfig(**meta["hmcbl"])
    bn = {}
    for name in ("q_b", "q_c", "k_c"):
        bn[name] = BatchNormStats(cfg.d_proj, tensors[f"bn.{name}.mean"].clone(), tensors[f"bn.{name}.var"].clone(),
                                  meta["bn_updates"][name])
    bank = MemoryBank(cfg.bank_size, cfg.d_proj)
    if len(tensors["bank"]):
        bank.enqueue(tensors["bank"])
    bank.inserted = meta["bank_inserted"]
    return DualModel(enc_cfg, cfg, _sub(tensors, "q."), _sub(tensors, "k."), bn, bank, meta["steps"],
                     meta["momentum_updates"])
