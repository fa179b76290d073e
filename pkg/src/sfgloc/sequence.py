"""Model input layout, graph-guided attention mask and pre-training masks.

Sequence layout::

    [CLS] W [C] S [SEP] [N] N [T] T [R] R [SEP]

W is the comment, S the code tokens, N the graph nodes, T the full type
vocabulary and R the full role vocabulary. Positions in the relation arrays
are absolute sequence positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LengthError
from .sfg.model import ROLE_VOCAB, TYPE_VOCAB, SemanticFlowGraph
from .vocab import CLS, MASK, SEG_C, SEG_N, SEG_R, SEG_T, SEP, SPECIALS, Vocab, simple_tokenize

MAX_LEN = 512
N_SPECIAL = 7  # [CLS] [C] [SEP] [N] [T] [R] [SEP]
MLM_RATE = 0.15
RELATION_HIDE_RATE = 0.2
MLM_MASK, MLM_RANDOM, MLM_KEEP = 0, 1, 2

NEG_INF = float("-inf")
MASK_ID = SPECIALS.index(MASK)


def _empty_pairs():
    return np.zeros((0, 2), dtype=np.int64)


@dataclass
class ModelInput:
    tokens: list
    ids: np.ndarray
    segments: dict  # name -> (start, end) half-open, for W S N T R
    special_positions: np.ndarray
    e1: np.ndarray = field(default_factory=_empty_pairs)  # (code pos, node pos)
    e2: np.ndarray = field(default_factory=_empty_pairs)  # (node pos, node pos)
    e3: np.ndarray = field(default_factory=_empty_pairs)  # (node pos, type pos)
    e4: np.ndarray = field(default_factory=_empty_pairs)  # (node pos, role pos)

    def __len__(self):
        return len(self.tokens)

    def segment(self, name) -> range:
        return range(*self.segments[name])

    @property
    def relations(self):
        return {"e1": self.e1, "e2": self.e2, "e3": self.e3, "e4": self.e4}

    def product_space(self, name):
        """The two position ranges a relation set is drawn from."""
        seg = {"e1": ("S", "N"), "e2": ("N", "N"), "e3": ("N", "T"), "e4": ("N", "R")}[name]
        return self.segment(seg[0]), self.segment(seg[1])


def _pairs(rows):
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def build_input(comment: str, code: Sequence, sfg: Optional[SemanticFlowGraph], vocab: Optional[Vocab] = None,
                max_len: int = MAX_LEN) -> ModelInput:
    """Lay out the concatenated sequence and its four relation sets.

    ``code`` holds the code tokens S. Items may be plain strings or objects
    with ``text`` and ``start`` attributes (lexer tokens); a variable node is
    aligned to the code token whose start offset equals the node's span
    start. When over budget the comment is cut first, then the node list;
    the code is never cut (LengthError instead), and the type and role
    segments are always complete.
    """
    code_texts = [c if isinstance(c, str) else c.text for c in code]
    code_starts = [None if isinstance(c, str) else getattr(c, "start", None) for c in code]
    words = simple_tokenize(comment) if comment else []
    nodes = list(sfg.nodes) if sfg is not None else []

    budget = max_len - N_SPECIAL - len(TYPE_VOCAB) - len(ROLE_VOCAB)
    if len(code_texts) > budget:
        raise LengthError(f"code has {len(code_texts)} tokens; at most {budget} fit in {max_len}")
    room = budget - len(code_texts)
    if len(nodes) > room:
        nodes, words = nodes[:room], []
    else:
        words = words[: room - len(nodes)]
    kept = {n.id for n in nodes}

    tokens = [CLS] + words + [SEG_C] + code_texts + [SEP, SEG_N]
    segs = {"W": (1, 1 + len(words))}
    s0 = len(words) + 2
    segs["S"] = (s0, s0 + len(code_texts))
    n0 = len(tokens)
    tokens += [n.symbol for n in nodes] + [SEG_T]
    segs["N"] = (n0, n0 + len(nodes))
    t0 = len(tokens)
    tokens += list(TYPE_VOCAB) + [SEG_R]
    segs["T"] = (t0, t0 + len(TYPE_VOCAB))
    r0 = len(tokens)
    tokens += list(ROLE_VOCAB) + [SEP]
    segs["R"] = (r0, r0 + len(ROLE_VOCAB))
    special = [0, s0 - 1, s0 + len(code_texts), n0 - 1, t0 - 1, r0 - 1, len(tokens) - 1]

    node_pos = {n.id: n0 + k for k, n in enumerate(nodes)}
    by_start = {st: s0 + k for k, st in enumerate(code_starts) if st is not None}
    type_pos = {t: t0 + k for k, t in enumerate(TYPE_VOCAB)}
    role_pos = {r: r0 + k for k, r in enumerate(ROLE_VOCAB)}

    e1, e3, e4 = [], [], []
    for n in nodes:
        p = node_pos[n.id]
        cp = by_start.get(n.span.start)
        if cp is not None:
            e1.append((cp, p))
        e3.append((p, type_pos[n.type_label]))
        if n.is_variable:
            e4.append((p, role_pos[str(n.role)]))
    e2 = []
    if sfg is not None:
        e2 = sorted({(node_pos[e.src], node_pos[e.dst]) for e in sfg.edges
                     if e.src in kept and e.dst in kept})

    vocab = vocab if vocab is not None else Vocab(tokens)
    return ModelInput(tokens=tokens, ids=np.asarray(vocab.encode(tokens), dtype=np.int64), segments=segs,
                      special_positions=np.asarray(special, dtype=np.int64),
                      e1=_pairs(sorted(e1)), e2=_pairs(e2), e3=_pairs(e3), e4=_pairs(e4))


def build_attention_mask(inp: ModelInput, hidden: Optional[dict] = None) -> np.ndarray:
    """Additive mask: 0 where attention is allowed, -inf elsewhere.

    Allowed: every entry of a special-token row ([CLS], [SEP] and the four
    segment markers), any pair inside W and S, both directions of each
    code-node alignment, and the listed direction of node-node, node-type
    and node-role relations. Pairs in ``hidden`` (relation name -> pairs)
    stay blocked.
    """
    L = len(inp)
    m = np.full((L, L), NEG_INF)
    w0, w1 = inp.segments["W"]
    s0, s1 = inp.segments["S"]
    ws = np.r_[w0:w1, s0:s1]
    m[np.ix_(ws, ws)] = 0.0
    for name, pairs in inp.relations.items():
        if len(pairs) == 0:
            continue
        if hidden is not None and name in hidden and len(hidden[name]):
            drop = {tuple(p) for p in np.asarray(hidden[name]).tolist()}
            pairs = np.asarray([p for p in pairs.tolist() if tuple(p) not in drop], dtype=np.int64).reshape(-1, 2)
            if len(pairs) == 0:
                continue
        m[pairs[:, 0], pairs[:, 1]] = 0.0
        if name == "e1":
            m[pairs[:, 1], pairs[:, 0]] = 0.0
    m[inp.special_positions, :] = 0.0
    return m


def expected_zero_count(inp: ModelInput, hidden: Optional[dict] = None) -> int:
    """Closed-form count of allowed entries, clause by clause."""
    L = len(inp)
    n_ws = (inp.segments["W"][1] - inp.segments["W"][0]) + (inp.segments["S"][1] - inp.segments["S"][0])
    hidden = hidden or {}
    count = len(inp.special_positions) * L + n_ws * n_ws
    for name, pairs in inp.relations.items():
        k = len(pairs) - len(hidden.get(name, ()))
        count += 2 * k if name == "e1" else k
    return count


@dataclass
class PretrainMasks:
    mlm_positions: np.ndarray
    mlm_actions: np.ndarray  # MLM_MASK | MLM_RANDOM | MLM_KEEP
    mlm_tokens: np.ndarray  # id fed to the model at each masked position
    mlm_targets: np.ndarray  # original id the model must recover
    hidden: dict  # relation name -> (k, 2) pairs removed from the mask (label 1)
    negatives: dict  # relation name -> (k', 2) pairs outside the relation (label 0)

    def labelled_pairs(self, name):
        """(pairs, labels) for one relation-prediction loss."""
        pos, neg = self.hidden[name], self.negatives[name]
        pairs = np.concatenate([pos, neg]) if len(neg) else pos
        labels = np.r_[np.ones(len(pos)), np.zeros(len(neg))]
        return pairs.reshape(-1, 2), labels

    def apply(self, inp: ModelInput):
        """Corrupted ids and the attention mask with hidden relations blocked."""
        ids = inp.ids.copy()
        ids[self.mlm_positions] = self.mlm_tokens
        return ids, build_attention_mask(inp, self.hidden)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def hidden_count(n: int, rate: float = RELATION_HIDE_RATE) -> int:
    if n == 0:
        return 0
    return max(1, _round_half_up(rate * n))


def sample_pretrain_masks(inp: ModelInput, seed, vocab_size: Optional[int] = None,
                          n_reserved: int = 0) -> PretrainMasks:
    """Draw the MLM corruption and the hidden relation pairs (with 1:1 negatives)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s = np.arange(*inp.segments["S"])
    k = min(len(s), _round_half_up(MLM_RATE * len(s)))
    positions = np.sort(rng.choice(s, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)
    u = rng.random(k)
    actions = np.where(u < 0.8, MLM_MASK, np.where(u < 0.9, MLM_RANDOM, MLM_KEEP)).astype(np.int64)
    targets = inp.ids[positions].copy()
    replacement = targets.copy()
    vocab_size = vocab_size if vocab_size is not None else int(inp.ids.max()) + 1
    lo = n_reserved if n_reserved < vocab_size else 0
    for j, a in enumerate(actions):
        if a == MLM_MASK:
            replacement[j] = MASK_ID
        elif a == MLM_RANDOM:
            replacement[j] = rng.integers(lo, vocab_size)

    hidden, negatives = {}, {}
    for name, pairs in inp.relations.items():
        h = hidden_count(len(pairs))
        idx = np.sort(rng.choice(len(pairs), size=h, replace=False)) if h else np.zeros(0, dtype=np.int64)
        hidden[name] = pairs[idx].reshape(-1, 2)
        negatives[name] = _sample_negatives(inp, name, pairs, h, rng)
    return PretrainMasks(positions.astype(np.int64), actions, replacement, targets, hidden, negatives)


def _sample_negatives(inp, name, pairs, k, rng):
    """k distinct pairs from the relation's product space that are not in it."""
    rows, cols = inp.product_space(name)
    space = len(rows) * len(cols)
    taken = {tuple(p) for p in pairs.tolist()}
    if name == "e1":
        taken |= {(b, a) for a, b in taken}
    free = space - len([p for p in taken if p[0] in rows and p[1] in cols])
    k = min(k, free)
    out = set()
    if k == 0:
        return _empty_pairs()
    if free <= 4 * k:
        cand = [(r, c) for r in rows for c in cols if (r, c) not in taken]
        pick = rng.choice(len(cand), size=k, replace=False)
        return _pairs(sorted(cand[i] for i in pick))
    while len(out) < k:
        p = (int(rows[rng.integers(len(rows))]), int(cols[rng.integers(len(cols))]))
        if p not in taken:
            out.add(p)
    return _pairs(sorted(out))
