"""Changeset records, granularity expansion, comment stripping and the D / ARC / ARC_L encodings."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..vocab import ADD, CTX, REM
from .diff import DiffLine, FileDiff, LineKind, parse_unified_diff

MARKERS = {LineKind.Added: ADD, LineKind.Removed: REM, LineKind.Context: CTX}


class Granularity(str, enum.Enum):
    commit = "commit"
    file = "file"
    hunk = "hunk"

    def __str__(self):
        return self.value


class Strategy(str, enum.Enum):
    D = "d"
    ARC = "arc"
    ARC_L = "arcl"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, s) -> "Strategy":
        if isinstance(s, cls):
            return s
        key = str(s).lower().replace("_", "")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown encoding {s!r}; expected one of d, arc, arcl")


@dataclass(frozen=True)
class Changeset:
    id: str
    commit_hash: str
    granularity: Granularity
    file_path: str | None
    lines: tuple  # DiffLine
    files: tuple = ()  # FileDiff, kept on commit-level records for expansion

    @classmethod
    def from_diff(cls, commit_hash: str, text: str) -> "Changeset":
        files = tuple(parse_unified_diff(text))
        lines = tuple(ln for f in files for ln in f.lines)
        return cls(commit_hash, commit_hash, Granularity.commit, None, lines, files)


def expand_granularity(cs: Changeset) -> tuple[list[Changeset], list[Changeset]]:
    """(file records, hunk records) of a commit-level changeset."""
    file_recs, hunk_recs = [], []
    for fi, f in enumerate(cs.files):
        if not f.hunks:
            continue
        file_recs.append(Changeset(f"{cs.commit_hash}:f{fi}", cs.commit_hash, Granularity.file, f.path, f.lines,
                                   (f,)))
        for hi, h in enumerate(f.hunks):
            hunk_recs.append(Changeset(f"{cs.commit_hash}:f{fi}:h{hi}", cs.commit_hash, Granularity.hunk, f.path,
                                       h.lines, (FileDiff(f.old_path, f.new_path, (h,)),)))
    return file_recs, hunk_recs


def at_granularity(cs: Changeset, granularity) -> list[Changeset]:
    g = Granularity(str(granularity))
    if g is Granularity.commit:
        return [cs] if cs.lines else []
    files, hunks = expand_granularity(cs)
    return files if g is Granularity.file else hunks


def strip_comments(lines) -> tuple:
    """Remove // and /* */ comments (block state carried across lines).

    Lines left blank are dropped. String and char literals are respected.
    """
    out = []
    in_block = False
    for ln in lines:
        text, in_block = _strip_line(ln.text, in_block)
        if text.strip():
            out.append(DiffLine(ln.kind, text.rstrip()))
    return tuple(out)


def _strip_line(s: str, in_block: bool):
    res = []
    i, n = 0, len(s)
    quote = None
    while i < n:
        c = s[i]
        if in_block:
            if s.startswith("*/", i):
                in_block = False
                i += 2
            else:
                i += 1
            continue
        if quote:
            res.append(c)
            if c == "\\" and i + 1 < n:
                res.append(s[i + 1])
                i += 2
                continue
            if c == quote:
                quote = None
            i += 1
            continue
        if c in "\"'":
            quote = c
        elif s.startswith("//", i):
            break
        elif s.startswith("/*", i):
            in_block = True
            i += 2
            res.append(" ")
            continue
        res.append(c)
        i += 1
    return "".join(res), in_block


def preprocess(cs: Changeset) -> Changeset:
    return replace(cs, lines=strip_comments(cs.lines))


def encoded_lines(lines, strategy) -> list[tuple[str | None, DiffLine]]:
    """Lines in emission order, each with the marker emitted before it (or None)."""
    st = Strategy.parse(strategy)
    if st is Strategy.D:
        return [(None, ln) for ln in lines]
    if st is Strategy.ARC_L:
        return [(MARKERS[ln.kind], ln) for ln in lines]
    out = []
    for kind in (LineKind.Added, LineKind.Removed, LineKind.Context):
        group = [ln for ln in lines if ln.kind is kind]
        for j, ln in enumerate(group):
            out.append((MARKERS[kind] if j == 0 else None, ln))
    return out


def encode_changeset(cs, strategy) -> str:
    """Token text of a changeset (or a plain sequence of DiffLines) under one strategy.

    D concatenates the line texts, ARC groups added / removed / context lines
    behind one marker per non-empty group, ARC_L keeps line order and puts
    a marker before every line.
    """
    lines = cs.lines if isinstance(cs, Changeset) else tuple(cs)
    parts = []
    for marker, ln in encoded_lines(lines, strategy):
        if marker:
            parts.append(marker)
        if ln.text.strip():
            parts.append(ln.text.strip())
    return " ".join(parts)
