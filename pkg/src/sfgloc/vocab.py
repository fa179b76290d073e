"""Token vocabulary and the whitespace/punctuation tokenizer."""
from __future__ import annotations

import json
import re
from collections import Counter
from pathlib import Path

from .sfg.model import ROLE_VOCAB, TYPE_VOCAB

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SEG_C, SEG_N, SEG_T, SEG_R = "[C]", "[N]", "[T]", "[R]"
ADD, REM, CTX = "[ADD]", "[REM]", "[CTX]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK, SEG_C, SEG_N, SEG_T, SEG_R, ADD, REM, CTX)

_WORD = re.compile(r"\[(?:ADD|REM|CTX)\]|[A-Za-z_$][A-Za-z0-9_$]*|\d+(?:\.\d+)?|\S")


def simple_tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation; diff markers stay single tokens."""
    return _WORD.findall(text)


class Vocab:
    def __init__(self, tokens=()):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        for t in list(SPECIALS) + list(TYPE_VOCAB) + list(ROLE_VOCAB):
            self.add(t)
        self.n_reserved = len(self.itos)
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __getitem__(self, token) -> int:
        return self.stoi.get(token, self.stoi[UNK])

    def encode(self, tokens) -> list[int]:
        return [self[t] for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]

    @property
    def pad_id(self):
        return self.stoi[PAD]

    @property
    def mask_id(self):
        return self.stoi[MASK]

    @classmethod
    def build(cls, token_lists, min_count=1):
        """Corpus vocabulary; tokens sorted by descending count, then lexically."""
        counts = Counter(t for toks in token_lists for t in toks)
        ranked = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
        return cls(ranked)

    def save(self, path):
        Path(path).write_text(json.dumps({"version": 1, "tokens": self.itos[self.n_reserved:]}, indent=0))

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(data["tokens"])
