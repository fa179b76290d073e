"""Unified diff parsing (git diff output) and re-serialization."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from ..errors import DiffParseError

_HUNK = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$")
_PREFIX = {"+": "Added", "-": "Removed", " ": "Context"}


class LineKind(str, enum.Enum):
    Added = "Added"
    Removed = "Removed"
    Context = "Context"

    def __str__(self):
        return self.value

    @property
    def marker(self) -> str:
        return {"Added": "+", "Removed": "-", "Context": " "}[self.value]


@dataclass(frozen=True)
class DiffLine:
    kind: LineKind
    text: str

    def serialize(self) -> str:
        return self.kind.marker + self.text


@dataclass(frozen=True)
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    section: str = ""
    lines: tuple = ()

    @property
    def header(self) -> str:
        return f"@@ -{self.old_start},{self.old_len} +{self.new_start},{self.new_len} @@{self.section}"

    def body(self) -> list[str]:
        """The marker-prefixed body lines."""
        return [ln.serialize() for ln in self.lines]


@dataclass(frozen=True)
class FileDiff:
    old_path: str
    new_path: str
    hunks: tuple = ()

    @property
    def path(self) -> str:
        return self.new_path if self.new_path != "/dev/null" else self.old_path

    @property
    def lines(self) -> tuple:
        return tuple(ln for h in self.hunks for ln in h.lines)


def _strip_prefix(p: str) -> str:
    p = p.split("\t", 1)[0].strip()
    if p.startswith(("a/", "b/")):
        return p[2:]
    return p


def parse_unified_diff(text: str) -> list[FileDiff]:
    """Split diff text into files and hunks; body line kinds come from the markers.

    Text before the first file header (e.g. commit metadata) is ignored.
    Hunk bodies are delimited by the line counts in their ``@@`` headers.
    """
    files: list[FileDiff] = []
    lines = text.splitlines()
    i, n = 0, len(lines)
    old = new = None
    hunks: list[Hunk] = []
    in_file = False

    def close():
        if in_file:
            files.append(FileDiff(old or new or "", new or old or "", tuple(hunks)))

    while i < n:
        line = lines[i]
        lineno = i + 1
        if line.startswith("diff --git "):
            close()
            parts = line[len("diff --git "):].split(" ")
            old = _strip_prefix(parts[0]) if parts else None
            new = _strip_prefix(parts[-1]) if len(parts) > 1 else old
            hunks, in_file = [], True
            i += 1
            continue
        if line.startswith("--- ") and i + 1 < n and lines[i + 1].startswith("+++ "):
            if not in_file or hunks:
                close()
                hunks, in_file = [], True
            old = _strip_prefix(line[4:])
            new = _strip_prefix(lines[i + 1][4:])
            i += 2
            continue
        if line.startswith("@@"):
            if not in_file:
                raise DiffParseError("hunk header before any file header", lineno, 1)
            m = _HUNK.match(line)
            if not m:
                raise DiffParseError(f"malformed hunk header: {line!r}", lineno, 1)
            os_, ol, ns, nl, section = m.groups()
            ol = 1 if ol is None else int(ol)
            nl = 1 if nl is None else int(nl)
            need_old, need_new = ol, nl
            body = []
            i += 1
            while need_old > 0 or need_new > 0:
                if i >= n:
                    raise DiffParseError("hunk body shorter than its header declares", i, 1)
                b = lines[i]
                if b.startswith("\\"):
                    i += 1
                    continue
                mark = b[:1] if b else " "
                if mark not in _PREFIX:
                    raise DiffParseError(f"unexpected line inside hunk: {b!r}", i + 1, 1)
                kind = LineKind(_PREFIX[mark])
                if kind is not LineKind.Added:
                    need_old -= 1
                if kind is not LineKind.Removed:
                    need_new -= 1
                if need_old < 0 or need_new < 0:
                    raise DiffParseError("hunk body longer than its header declares", i + 1, 1)
                body.append(DiffLine(kind, b[1:]))
                i += 1
            while i < n and lines[i].startswith("\\"):
                i += 1
            hunks.append(Hunk(int(os_), ol, int(ns), nl, section, tuple(body)))
            continue
        if in_file and line[:1] in ("+", "-", " ") and not line.startswith(("--- ", "+++ ")):
            raise DiffParseError("diff content without a preceding @@ hunk header", lineno, 1)
        # metadata (index, mode, rename, similarity) or preamble
        i += 1
    close()
    return files


def serialize_diff(files) -> str:
    out = []
    for f in files:
        out.append(f"diff --git a/{f.old_path} b/{f.new_path}")
        out.append(f"--- a/{f.old_path}")
        out.append(f"+++ b/{f.new_path}")
        for h in f.hunks:
            out.append(h.header)
            out.extend(h.body())
    return "\n".join(out) + ("\n" if out else "")


def make_hunk(lines, old_start: int = 1, new_start: int = 1, section: str = "") -> Hunk:
    """A hunk whose header counts are derived from its lines."""
    lines = tuple(lines)
    ol = sum(1 for ln in lines if ln.kind is not LineKind.Added)
    nl = sum(1 for ln in lines if ln.kind is not LineKind.Removed)
    return Hunk(old_start, ol, new_start, nl, section, lines)
