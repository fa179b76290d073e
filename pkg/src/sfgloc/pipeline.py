"""End-to-end glue: changesets and reports to model inputs, training, indexing and evaluation."""
from __future__ import annotations

import bisect
import json
import logging
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .corpus.changeset import Changeset, LineKind, encoded_lines, preprocess
from .corpus.dataset import Dataset, DatasetSplit, load_dataset, split_chronological
from .encoder import EncoderConfig, load_params, save_params
from .errors import InputError, SfglocError
from .frontend import parse_method, resolve_types, tokenize
from .frontend.ast import Span
from .hmcbl import (DualModel, HmcblConfig, TripletData, embed_changesets, embed_reports, model_from_tensors,
                    model_meta, model_tensors, train_steps)
from .retrieval import PqConfig, RankedRun, build_index, evaluate_run, rerank, search
from .retrieval.ivfpq import IvfPqIndex, load_index, save_index, unit
from .sequence import MAX_LEN, N_SPECIAL, ModelInput, build_input
from .sfg.builder import build_sfg
from .sfg.model import ROLE_VOCAB, TYPE_VOCAB, SemanticFlowGraph
from .vocab import CLS, SEP, Vocab, simple_tokenize

log = logging.getLogger(__name__)

WRAPPER = "void __changeset__() {\n"
LINE_KEY = 1_000_000  # alignment key = line index * LINE_KEY + column offset
MAX_CODE = 256
_FALLBACK = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*|\d+(?:\.\d+)?|\S")


@dataclass(frozen=True)
class CodeToken:
    text: str
    start: Optional[int] = None


def _line_tokens(text: str, key_base: int) -> list[CodeToken]:
    try:
        toks = tokenize(text).tokens
        return [CodeToken(t.text, key_base + t.start) for t in toks if t.kind != "eof"]
    except SfglocError:
        return [CodeToken(m.group(), key_base + m.start()) for m in _FALLBACK.finditer(text)]


def _graph_for(texts: list[str], keys: list[int]) -> Optional[SemanticFlowGraph]:
    """Graph of statement lines wrapped in a method; node spans re-keyed to line positions."""
    src = WRAPPER + "\n".join(texts) + "\n}\n"
    bases, pos = [], len(WRAPPER)
    for t in texts:
        bases.append(pos)
        pos += len(t) + 1
    try:
        g = build_sfg(resolve_types(parse_method(src), strict=False), "changeset")
    except SfglocError:
        return None

    def rekey(span: Span) -> Span:
        k = bisect.bisect_right(bases, span.start) - 1
        if k < 0:
            return span
        return replace(span, start=keys[k] + span.start - bases[k], end=keys[k] + span.end - bases[k])

    return SemanticFlowGraph(g.method_id, tuple(replace(n, span=rekey(n.span)) for n in g.nodes), g.edges)


def _merge(graphs) -> SemanticFlowGraph:
    nodes, edges, off = [], [], 0
    for g in graphs:
        nodes += [replace(n, id=n.id + off) for n in g.nodes]
        edges += [replace(e, src=e.src + off, dst=e.dst + off) for e in g.edges]
        off += len(g.nodes)
    return SemanticFlowGraph("changeset", tuple(nodes), tuple(edges))


def fragment_graph(lines) -> SemanticFlowGraph:
    """Graph over the post-change (added and context) lines of a changeset.

    The lines are parsed as one method body when possible; otherwise each
    line is tried on its own and the parseable ones are merged.
    """
    post = [(i, ln.text) for i, ln in enumerate(lines) if ln.kind is not LineKind.Removed]
    if not post:
        return SemanticFlowGraph("changeset")
    whole = _graph_for([t for _, t in post], [i * LINE_KEY for i, _ in post])
    if whole is not None:
        return whole
    parts = [g for i, t in post if (g := _graph_for([t], [i * LINE_KEY])) is not None]
    return _merge(parts)


def changeset_code(lines, strategy) -> list[CodeToken]:
    """Code tokens S of a changeset under an encoding; markers carry no alignment key."""
    out = []
    index = {id(ln): i for i, ln in enumerate(lines)}
    for marker, ln in encoded_lines(lines, strategy):
        if marker:
            out.append(CodeToken(marker))
        out += _line_tokens(ln.text, index[id(ln)] * LINE_KEY)
    return out


def changeset_input(cs, strategy, vocab: Optional[Vocab] = None, max_len: int = MAX_LEN,
                    max_code: int = MAX_CODE) -> ModelInput:
    """Comment-free model input of a (comment-stripped) changeset; code beyond ``max_code`` tokens is cut."""
    lines = preprocess(cs).lines if isinstance(cs, Changeset) else tuple(cs)
    code = changeset_code(lines, strategy)
    budget = max_len - N_SPECIAL - len(TYPE_VOCAB) - len(ROLE_VOCAB)
    code = code[: min(max_code, budget)]
    return build_input("", code, fragment_graph(lines), vocab, max_len)


_LEADING_COMMENT = re.compile(r"^\s*((?:/\*.*?\*/\s*|//[^\n]*\n\s*)+)", re.S)


def method_input(source: str, vocab: Optional[Vocab] = None, max_len: int = MAX_LEN) -> ModelInput:
    """Model input for a commented method: leading comment as W, method tokens as S."""
    stream = tokenize(source)
    comment = " ".join(c.body for c in stream.comments)
    code = [t for t in stream.tokens if t.kind != "eof"]
    g = build_sfg(resolve_types(parse_method(stream), strict=False))
    return build_input(comment, code, g, vocab, max_len)


def report_tokens(text: str) -> list[str]:
    return simple_tokenize(text)


def report_ids(text: str, vocab: Vocab, max_len: int = MAX_LEN) -> np.ndarray:
    toks = [CLS] + report_tokens(text)[: max_len - 2] + [SEP]
    return np.asarray(vocab.encode(toks), dtype=np.int64)


# -- dataset preparation ---------------------------------------------------

@dataclass
class Prepared:
    dataset: Dataset
    granularity: str
    encoding: str
    records: dict  # changeset id -> Changeset
    pairs: list
    split: DatasetSplit
    vocab: Vocab
    _inputs: dict = field(default_factory=dict, repr=False)

    def input(self, cid: str) -> ModelInput:
        if cid not in self._inputs:
            self._inputs[cid] = changeset_input(self.records[cid], self.encoding, self.vocab)
        return self._inputs[cid]

    def report_ids(self, rid: str) -> np.ndarray:
        return report_ids(self.dataset.reports[rid].text, self.vocab)

    def test_pool(self) -> list:
        return sorted({c for _, c in self.split.test_pairs} | set(self.split.test_negatives))

    def train_pool(self) -> list:
        return sorted({c for _, c in self.split.train_pairs} | set(self.split.train_negatives))


def build_vocab(dataset: Dataset, records: dict, encoding) -> Vocab:
    """Vocabulary over every report and changeset token of the dataset."""
    lists = [report_tokens(r.text) for r in dataset.reports.values()]
    for cs in records.values():
        lines = preprocess(cs).lines
        lists.append([t.text for t in changeset_code(lines, encoding)])
    return Vocab.build(lists)


def prepare(dataset, granularity: str = "commit", encoding: str = "arcl", vocab: Optional[Vocab] = None) -> Prepared:
    ds = dataset if isinstance(dataset, Dataset) else load_dataset(dataset)
    records, pairs = ds.changesets(granularity)
    if not pairs:
        raise InputError("dataset has no linked bug-report / changeset pairs")
    times = {cid: ds.committed_at.get(cs.commit_hash, "") for cid, cs in records.items()}
    split = split_chronological(pairs, ds.reports, times, sorted(records))
    vocab = vocab if vocab is not None else build_vocab(ds, records, encoding)
    return Prepared(ds, str(granularity), str(encoding), records, pairs, split, vocab)


def triplet_data(prep: Prepared) -> TripletData:
    pool = prep.train_pool()
    index = {c: i for i, c in enumerate(pool)}
    rids = prep.split.train_reports
    rindex = {r: i for i, r in enumerate(rids)}
    return TripletData(reports=[prep.report_ids(r) for r in rids], changesets=[prep.input(c) for c in pool],
                       pairs=[(rindex[r], index[c]) for r, c in prep.split.train_pairs])


def train_model(prep: Prepared, hcfg: HmcblConfig, steps: int, seed: int = 0, enc_cfg: Optional[EncoderConfig] = None,
                encoder_params: Optional[dict] = None, on_step=None):
    """Create and train a dual model; returns (model, log rows)."""
    enc_cfg = enc_cfg or EncoderConfig(vocab_size=len(prep.vocab))
    if enc_cfg.vocab_size != len(prep.vocab):
        raise InputError(f"encoder vocabulary {enc_cfg.vocab_size} != dataset vocabulary {len(prep.vocab)}")
    torch.manual_seed(seed)
    model = DualModel.create(enc_cfg, hcfg, seed, encoder_params)
    data = triplet_data(prep)
    history = train_steps(model, data, steps, seed, on_step=on_step)
    return model, history


# -- model files -----------------------------------------------------------

def save_model(path, model: DualModel, vocab: Vocab, info: Optional[dict] = None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    save_params(path / "model.npz", model_tensors(model), model_meta(model), info or {})
    vocab.save(path / "vocab.json")


def load_model(path):
    """(model, vocab, info) from a model directory."""
    path = Path(path)
    if not (path / "model.npz").is_file():
        raise InputError(f"{path}: no model.npz")
    tensors, manifest = load_params(path / "model.npz")
    return model_from_tensors(tensors, manifest["config"]), Vocab.load(path / "vocab.json"), manifest["extra"]


# -- index and evaluation --------------------------------------------------

@dataclass
class IndexBundle:
    index: IvfPqIndex
    exact: dict  # changeset id -> exact embedding

    def save(self, path, meta: dict):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        save_index(self.index, path / "index.bin")
        ids = list(self.exact)
        np.save(path / "exact.npy", np.stack([self.exact[i] for i in ids]) if ids else np.zeros((0, 0)))
        (path / "meta.json").write_text(json.dumps({**meta, "exact_ids": ids}, indent=2) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not (path / "index.bin").is_file():
            raise InputError(f"{path}: no index.bin")
        meta = json.loads((path / "meta.json").read_text())
        vecs = np.load(path / "exact.npy")
        return cls(load_index(path / "index.bin"), dict(zip(meta["exact_ids"], vecs))), meta


def index_changesets(model: DualModel, prep: Prepared, ids, n_partitions: Optional[int] = None,
                     pq: Optional[PqConfig] = None, seed: int = 0) -> IndexBundle:
    ids = list(ids)
    inputs = [prep.input(c) for c in ids]
    vecs = embed_changesets(model, inputs)
    return IndexBundle(build_index(vecs, ids, n_partitions, pq, seed), dict(zip(ids, vecs)))


def rank(bundle: IndexBundle, query_vec, nprobe: int = 4, n_prime: int = 100):
    cands = search(bundle.index, query_vec, nprobe, n_prime)
    q = unit(query_vec)
    return rerank(cands, exact={c: float(unit(bundle.exact[c]) @ q) for c, _ in cands})


def evaluate(model: DualModel, prep: Prepared, bundle: IndexBundle, ks=(1, 3, 5), nprobe: int = 4,
             n_prime: int = 100):
    """Metrics over the test reports of the split; returns (metrics, run)."""
    rids = prep.split.test_reports
    qv = embed_reports(model, [prep.report_ids(r) for r in rids])
    relevant = {}
    for r, c in prep.split.test_pairs:
        relevant.setdefault(r, set()).add(c)
    run = RankedRun()
    for r, v in zip(rids, qv):
        run.add(r, rank(bundle, v, nprobe, n_prime), relevant[r])
    return evaluate_run(run, ks), run


def enc_config_dict(cfg: EncoderConfig) -> dict:
    return asdict(cfg)
