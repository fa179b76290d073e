"""Seeded synthetic corpora.

``write_synthetic_dataset`` produces bug reports linked to inducing commits
through planted identifiers that occur in both the report text and the
commit's added lines, plus unlinked distractor commits. ``synthetic_methods``
produces small commented Java methods for pre-training.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .dataset import BugReport, ManifestRow, write_manifest, write_reports
from .diff import DiffLine, FileDiff, LineKind, make_hunk, serialize_diff

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr", "pl",
           "st", "tr", "qu", "sn", "th"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "ee"]
_CODAS = ["", "n", "x", "r", "m", "s", "k", "l", "th"]
_SUFFIXES = ["Count", "Index", "Buffer", "Limit", "Offset", "State", "Cache", "Queue", "Total", "Delta", "Flag",
             "Size", "Map", "List", "Name", "Key"]
COMMON = ["count", "index", "buffer", "value", "result", "total", "offset", "length", "size", "item", "node",
          "entry", "cursor", "limit", "temp", "flag", "width", "height", "score", "level", "key", "data", "max",
          "min", "sum", "pos", "step", "start", "end", "ratio"]
_CALLS = ["compute", "update", "reset", "check", "apply", "load", "store", "merge", "scale", "clamp", "encode",
          "decode", "parse", "flush"]
_FILES = ["Decoder", "Reader", "Writer", "Parser", "Encoder", "Matrix", "Bitmap", "Detector", "Scanner", "Cache",
          "Buffer", "Format", "Result", "Table", "Stream", "Codec"]
_FILLER = ["the", "when", "after", "is", "not", "a", "with", "in", "on", "fails", "wrong", "value", "error",
           "crash", "returns", "incorrect", "during", "while", "calling", "null", "unexpected", "exception",
           "reported", "user", "sometimes", "large", "input", "output", "broken", "regression", "since", "update"]
_SUMMARIES = ["{0} returns wrong value after {1} changes", "Crash in {0} when {1} is reset",
              "{0} ignores {1} on large input", "Regression: {0} not updated with {1}",
              "Unexpected exception from {0} while {1} is empty"]


def _word(rng) -> str:
    n = rng.integers(2, 4)
    return "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                   + _CODAS[rng.integers(len(_CODAS))] for _ in range(n))


def unique_identifiers(rng, k: int, taken: set) -> list[str]:
    out = []
    while len(out) < k:
        w = _word(rng) + _SUFFIXES[rng.integers(len(_SUFFIXES))]
        if w not in taken and w.lower() not in COMMON:
            taken.add(w)
            out.append(w)
    return out


def _statement(rng, names) -> str:
    """One self-contained Java statement over the given variable names."""
    def pick():
        return names[rng.integers(len(names))]

    a, b, c = pick(), pick(), pick()
    f = _CALLS[rng.integers(len(_CALLS))]
    form = rng.integers(7)
    if form == 0:
        return f"int {a} = {b} + {c};"
    if form == 1:
        return f"{a} = {f}({b}, {c});"
    if form == 2:
        return f"if ({a} > {b}) {{ {c} = {a} - {b}; }}"
    if form == 3:
        return f"for (int i = 0; i < {a}; i++) {{ {b} += i * {c}; }}"
    if form == 4:
        return f"{a} += {b} * {c};"
    if form == 5:
        return f"while ({a} < {b}) {{ {a} = {a} + {c}; }}"
    return f"{f}({a});"


def _planted_line(rng, name: str, base: list[str]) -> str:
    others = base + [name]
    while True:
        s = _statement(rng, others)
        if name in s:
            return "    " + s


def _commit(rng, key_names: list[str]) -> str:
    n_files = int(rng.integers(1, 3))
    groups = [list(g) for g in np.array_split(np.array(key_names, dtype=object), n_files)]
    files = []
    for fi, group in enumerate(groups):
        path = f"src/main/java/org/sample/{_FILES[rng.integers(len(_FILES))]}{fi}.java"
        n_hunks = 1 if len(group) < 2 else int(rng.integers(1, 3))
        hunks, start = [], int(rng.integers(10, 200))
        for sub in np.array_split(np.array(group, dtype=object), n_hunks):
            base = [COMMON[i] for i in rng.choice(len(COMMON), size=4, replace=False)]
            lines = [DiffLine(LineKind.Context, "    " + _statement(rng, base))
                     for _ in range(int(rng.integers(1, 3)))]
            if rng.random() < 0.5:
                lines.append(DiffLine(LineKind.Removed, "    " + _statement(rng, base)))
            for name in sub:
                lines.append(DiffLine(LineKind.Added, _planted_line(rng, str(name), base[:2])))
            if len(sub) == 0:
                lines.append(DiffLine(LineKind.Added, "    " + _statement(rng, base)))
            lines.append(DiffLine(LineKind.Context, "    " + _statement(rng, base)))
            hunks.append(make_hunk(lines, start, start))
            start += 40 + len(lines)
        files.append(FileDiff(path, path, tuple(hunks)))
    return serialize_diff(files)


def _report_text(rng, planted: list[str]) -> tuple[str, str]:
    summary = _SUMMARIES[rng.integers(len(_SUMMARIES))].format(planted[0], planted[1])
    words = [_FILLER[i] for i in rng.integers(len(_FILLER), size=int(rng.integers(8, 16)))]
    for p in planted[1:]:
        words.insert(int(rng.integers(len(words) + 1)), p)
    text = " ".join(words)
    desc = text[:1].upper() + text[1:] + "."
    return summary, desc


def _hash(seed: int, tag: str) -> str:
    return hashlib.sha1(f"{seed}:{tag}".encode()).hexdigest()


@dataclass
class SyntheticSpec:
    n_pairs: int = 60
    n_distractors: int = 540
    planted: int = 3
    distractor_unique: int = 3
    components: int = 0  # > 0: planted names are drawn from a shared pool of this many identifiers
    start: str = "2020-01-01T00:00:00"


def write_synthetic_dataset(root, seed: int = 0, spec: SyntheticSpec | None = None) -> Path:
    """Write reports.jsonl, manifest.csv and diffs/ under ``root``."""
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)
    root = Path(root)
    (root / "diffs").mkdir(parents=True, exist_ok=True)
    t0 = datetime.fromisoformat(spec.start)
    span_days = 2 * spec.n_pairs + 10
    taken: set = set()
    shared = unique_identifiers(rng, spec.components, taken) if spec.components else []

    def names(k):
        if not shared:
            return unique_identifiers(rng, k, taken)
        return [shared[i] for i in rng.choice(len(shared), size=k, replace=False)]

    reports, rows = [], []
    for i in range(spec.n_pairs):
        planted = names(spec.planted)
        opened = t0 + timedelta(days=2 * i + 5, hours=int(rng.integers(24)))
        committed = opened - timedelta(days=int(rng.integers(1, 5)))
        summary, desc = _report_text(rng, planted)
        bug_id = f"BUG-{i + 1:04d}"
        reports.append(BugReport(bug_id, summary, desc, opened.isoformat()))
        h = _hash(seed, f"pos{i}")
        (root / "diffs" / f"{h}.diff").write_text(_commit(rng, planted))
        rows.append(ManifestRow(h, bug_id, f"diffs/{h}.diff", committed.isoformat()))
    for j in range(spec.n_distractors):
        own = names(spec.distractor_unique)
        when = t0 + timedelta(days=float(rng.uniform(0, span_days)))
        h = _hash(seed, f"neg{j}")
        (root / "diffs" / f"{h}.diff").write_text(_commit(rng, own))
        rows.append(ManifestRow(h, "", f"diffs/{h}.diff", when.isoformat(timespec="seconds")))
    order = rng.permutation(len(reports))
    write_reports(root / "reports.jsonl", [reports[k] for k in order])
    write_manifest(root / "manifest.csv", rows)
    return root


def synthetic_methods(n: int, seed: int = 0) -> list[str]:
    """Commented Java methods in the supported subset."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        names = [COMMON[i] for i in rng.choice(len(COMMON), size=4, replace=False)]
        params = ", ".join(f"int {p}" for p in names[:2])
        body = [f"int {names[2]} = 0;", f"int {names[3]} = 1;"]
        body += [_statement(rng, names) for _ in range(int(rng.integers(2, 5)))]
        body.append(f"return {names[2]};")
        verb = _CALLS[rng.integers(len(_CALLS))]
        comment = f"/** {verb.capitalize()} the {names[2]} from {names[0]} and {names[1]}. */"
        out.append(f"{comment}\nint {verb}{k}({params}) {{\n    " + "\n    ".join(body) + "\n}\n")
    return out
